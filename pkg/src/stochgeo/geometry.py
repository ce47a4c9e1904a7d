"""Vectors, hyperplanes, caps of the unit ball and orthonormal frames.

All points are plain ``numpy`` arrays of shape ``(d,)`` or ``(m, d)``.  The
small value types below copy their inputs and freeze them, so they can be
shared between threads without further care.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-12
FRAME_TOL = 1e-10
MAX_DIM = 8


def ball_volume(j: int) -> float:
    """Volume of the unit ball in dimension ``j`` (``kappa_j``); 1 for j=0."""
    return math.pi ** (j / 2) / math.gamma(j / 2 + 1)


def sphere_area(d: int) -> float:
    """(d-1)-dimensional surface area of the unit sphere in R^d."""
    return d * ball_volume(d)


def check_dim(d: int, lo: int = 2, hi: int = MAX_DIM) -> int:
    if int(d) != d or not lo <= d <= hi:
        raise ValueError(f"dimension must be an integer in [{lo}, {hi}], got {d!r}")
    return int(d)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def as_vector(x, d: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if d is not None and v.shape[0] != d:
        raise ValueError(f"expected dimension {d}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def unit_vector(x, d: int | None = None) -> np.ndarray:
    """Validate that ``x`` has unit norm (within 1e-12) and renormalize it."""
    v = as_vector(x, d)
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > UNIT_TOL:
        raise ValueError(f"expected a unit vector, got norm {nrm!r}")
    return v / nrm


def orthonormal_complement(x: np.ndarray) -> np.ndarray:
    """Rows form an orthonormal basis of the hyperplane orthogonal to ``x``.

    Deterministic: a Householder reflection sending e_1 to ``x/|x|``.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    u = x / np.linalg.norm(x)
    e = np.zeros(d)
    e[0] = 1.0
    w = e - u
    nw = np.linalg.norm(w)
    if nw < 1e-15:
        return np.eye(d)[1:]
    w /= nw
    H = np.eye(d) - 2.0 * np.outer(w, w)
    return H[1:]


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """The plane {y : <y, normal> = offset} with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = as_vector(self.normal)
        nrm = float(np.linalg.norm(n))
        if nrm == 0.0:
            raise ValueError("hyperplane normal must be non-zero")
        object.__setattr__(self, "normal", _frozen(n / nrm))
        object.__setattr__(self, "offset", float(self.offset) / nrm)

    def signed_distance(self, pts) -> np.ndarray:
        return np.asarray(pts, dtype=float) @ self.normal - self.offset


@dataclass(frozen=True, eq=False)
class Cap:
    """The smaller cap C(x, t) of the unit ball cut off by <z, x> = 1 - t."""

    direction: np.ndarray
    height: float

    def __post_init__(self):
        t = float(self.height)
        if not 0.0 < t < 1.0:
            raise ValueError(f"cap height must lie in (0, 1), got {t!r}")
        object.__setattr__(self, "direction", _frozen(unit_vector(self.direction)))
        object.__setattr__(self, "height", t)

    @property
    def dim(self) -> int:
        return self.direction.shape[0]

    @property
    def base_center(self) -> np.ndarray:
        return (1.0 - self.height) * self.direction

    @property
    def base_radius(self) -> float:
        t = self.height
        return math.sqrt(t * (2.0 - t))

    @property
    def angular_radius(self) -> float:
        return math.acos(1.0 - self.height)

    @property
    def hyperplane(self) -> Hyperplane:
        return Hyperplane(self.direction, 1.0 - self.height)

    def contains(self, pts, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        in_ball = np.einsum("ij,ij->i", pts, pts) <= 1.0 + tol
        return in_ball & (pts @ self.direction >= 1.0 - self.height - tol)


def cap_from_direction(x, t: float):
    """Cap, cutting hyperplane, base centre and base radius for direction x, height t."""
    cap = Cap(x, t)
    return cap, cap.hyperplane, cap.base_center, cap.base_radius


@dataclass(frozen=True, eq=False)
class Frame:
    """Orthonormal basis (rows of ``basis``) of an s-dimensional subspace of R^d."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.basis, dtype=float))
        s, d = B.shape
        if not 1 <= s <= d:
            raise ValueError(f"frame must have 1 <= s <= d, got s={s}, d={d}")
        if np.max(np.abs(B @ B.T - np.eye(s))) > FRAME_TOL:
            raise ValueError("frame basis is not orthonormal")
        object.__setattr__(self, "basis", _frozen(B))

    @property
    def s(self) -> int:
        return self.basis.shape[0]

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    def project(self, pts) -> np.ndarray:
        return project_points(pts, self)


def project_points(pts, frame: Frame) -> np.ndarray:
    """Coordinates of the orthogonal projection of ``pts`` in the frame basis."""
    pts = np.asarray(pts, dtype=float)
    if pts.shape[-1] != frame.d:
        raise ValueError(f"points have dimension {pts.shape[-1]}, frame has {frame.d}")
    return pts @ frame.basis.T


def angle_to_subspace(z, frame: Frame) -> float:
    """Smallest angle between the unit vector z and a vector of the subspace."""
    z = unit_vector(z, frame.d)
    c = float(np.linalg.norm(frame.basis @ z))
    return math.acos(min(1.0, c))
