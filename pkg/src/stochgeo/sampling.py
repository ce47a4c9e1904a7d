"""Seeded sampling: points in balls/ellipsoids, on spheres, Haar subspaces.

Randomness is keyed by ``RngStream(seed, stream_id)``.  Each stream maps to an
independent Philox counter-based generator through numpy's ``SeedSequence``,
so a replication's draws depend only on its key and never on scheduling.
Sampling functions accept either an ``RngStream`` (a fresh generator is
built from it) or an already running ``numpy.random.Generator``.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import Frame, ball_volume, check_dim

GS_DEGENERACY = 1e-8
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))

    def derive(self, *keys) -> "RngStream":
        """Child stream whose id is a stable 64-bit hash of (stream_id, keys)."""
        h = hashlib.blake2b(digest_size=8)
        h.update(struct.pack("<Q", self.stream_id))
        for k in keys:
            h.update(repr(k).encode())
            h.update(b"\x00")
        return RngStream(self.seed, int.from_bytes(h.digest(), "little"))


def as_generator(stream) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    if isinstance(stream, RngStream):
        return stream.generator()
    raise TypeError(f"expected RngStream or numpy Generator, got {type(stream).__name__}")


@dataclass(frozen=True)
class BodySpec:
    """Axis-parallel ellipsoid with the given semi-axes; the ball has all ones."""

    semiaxes: tuple

    def __post_init__(self):
        a = tuple(float(v) for v in self.semiaxes)
        if not a or any(not math.isfinite(v) or v <= 0 for v in a):
            raise ValueError(f"semi-axes must be positive, got {self.semiaxes!r}")
        object.__setattr__(self, "semiaxes", a)

    @classmethod
    def ball(cls, d: int) -> "BodySpec":
        return cls((1.0,) * check_dim(d, lo=1))

    @classmethod
    def ellipsoid(cls, semiaxes) -> "BodySpec":
        return cls(tuple(semiaxes))

    @property
    def d(self) -> int:
        return len(self.semiaxes)

    @property
    def is_ball(self) -> bool:
        return all(a == 1.0 for a in self.semiaxes)

    @property
    def kind(self) -> str:
        return "ball" if self.is_ball else "ellipsoid"

    @property
    def volume(self) -> float:
        return ball_volume(self.d) * math.prod(self.semiaxes)

    @cached_property
    def curvature_bounds(self) -> tuple[float, float]:
        """(lower, upper) bounds on the principal curvatures of the boundary.

        For semi-axes a_i the principal curvatures lie in
        [min a / (max a)^2, max a / (min a)^2].
        """
        lo, hi = min(self.semiaxes), max(self.semiaxes)
        return lo / hi**2, hi / lo**2

    def contains(self, pts, tol: float = 0.0) -> np.ndarray:
        y = np.atleast_2d(pts) / np.asarray(self.semiaxes)
        return np.einsum("ij,ij->i", y, y) <= 1.0 + tol

    def describe(self) -> str:
        if self.is_ball:
            return f"ball{self.d}"
        return "ellipsoid(" + ",".join(f"{a:g}" for a in self.semiaxes) + ")"


def _gaussian_directions(d: int, rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal((n, d))
    nrm = np.linalg.norm(g, axis=1)
    bad = nrm == 0.0
    while np.any(bad):  # probability zero; keeps the law exact
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        nrm[bad] = np.linalg.norm(g[bad], axis=1)
        bad = nrm == 0.0
    return g / nrm[:, None]


def uniform_sphere(d: int, stream, size: int | None = None) -> np.ndarray:
    """Uniform point(s) on S^{d-1}: a normalized standard Gaussian vector."""
    d = check_dim(d, lo=1)
    rng = as_generator(stream)
    out = _gaussian_directions(d, rng, 1 if size is None else int(size))
    return out[0] if size is None else out


def uniform_ball(d: int, stream, size: int | None = None) -> np.ndarray:
    """Uniform point(s) in B^d: Gaussian direction times radius U^(1/d)."""
    d = check_dim(d, lo=1)
    rng = as_generator(stream)
    n = 1 if size is None else int(size)
    u = _gaussian_directions(d, rng, n)
    r = rng.random(n) ** (1.0 / d)
    out = u * r[:, None]
    return out[0] if size is None else out


def uniform_body(spec: BodySpec, stream, size: int | None = None) -> np.ndarray:
    """Uniform point(s) in the body; ellipsoids are diagonal images of the ball."""
    pts = uniform_ball(spec.d, stream, size)
    if spec.is_ball:
        return pts
    return pts * np.asarray(spec.semiaxes)


def uniform_simplex(vertices, stream, size: int | None = None) -> np.ndarray:
    """Uniform point(s) in the simplex spanned by the rows of ``vertices``."""
    V = np.asarray(vertices, dtype=float)
    rng = as_generator(stream)
    n = 1 if size is None else int(size)
    w = rng.exponential(size=(n, V.shape[0]))
    w /= w.sum(axis=1, keepdims=True)
    out = w @ V
    return out[0] if size is None else out


def haar_bases(d: int, s: int, stream, size: int) -> np.ndarray:
    """Orthonormal bases of ``size`` Haar-random s-subspaces, shape (size, s, d).

    Modified Gram-Schmidt with one re-orthogonalization pass on independent
    standard Gaussian vectors; draws whose residual norm falls below 1e-8 of
    the original are redrawn.
    """
    d = check_dim(d, lo=1)
    if not 1 <= s <= d:
        raise ValueError(f"need 1 <= s <= d, got s={s}, d={d}")
    rng = as_generator(stream)
    out = np.empty((size, s, d))
    todo = np.arange(size)
    while todo.size:
        G = rng.standard_normal((todo.size, s, d))
        ok = np.ones(todo.size, dtype=bool)
        for j in range(s):
            v = G[:, j, :]
            n0 = np.linalg.norm(v, axis=1)
            for _ in range(2):
                for i in range(j):
                    q = G[:, i, :]
                    v -= np.einsum("ij,ij->i", v, q)[:, None] * q
            nv = np.linalg.norm(v, axis=1)
            ok &= nv > GS_DEGENERACY * n0
            G[:, j, :] = v / np.where(nv > 0, nv, 1.0)[:, None]
        out[todo[ok]] = G[ok]
        todo = todo[~ok]
    return out


def haar_subspace(d: int, s: int, stream) -> Frame:
    """A single Haar-random element of G(d, s) as a Frame."""
    return Frame(haar_bases(d, s, stream, 1)[0])
