"""Caps of the unit ball: volumes, wet part, simplex construction, V-hat, covers.

Heights ``t`` here are cap heights (distance from the cutting plane to the
sphere) unless a docstring says the parameter is a volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect
from scipy.spatial import cKDTree
from scipy.special import betainc

from .errors import OutOfRange, TooSmallCone
from .geometry import ball_volume, check_dim, orthonormal_complement, unit_vector
from .hull import _simplex_volumes
from .intrinsic import projection_volume
from .sampling import RngStream, as_generator, haar_bases, uniform_simplex, uniform_sphere

MIN_ACCEPTANCE = 1e-6


# ---------------------------------------------------------------- volumes

def cap_volume(d: int, t: float) -> float:
    """Volume of the height-t cap of B^d, kappa_{d-1} int_{1-t}^1 (1-u^2)^((d-1)/2) du."""
    d = check_dim(d, lo=1)
    if not 0.0 <= t <= 2.0:
        raise OutOfRange(f"cap height must lie in [0, 2], got {t!r}")
    if t == 0.0:
        return 0.0
    if t > 1.0:
        return ball_volume(d) - cap_volume(d, 2.0 - t)
    e = (d - 1) / 2.0
    # v = 1 - u avoids cancellation in 1 - u^2 near the pole
    val, _ = quad(lambda v: (v * (2.0 - v)) ** e, 0.0, t, epsabs=0.0, epsrel=1e-12, limit=200)
    return ball_volume(d - 1) * val


def cap_height(d: int, volume: float) -> float:
    """Inverse of :func:`cap_volume` on [0, 1] by bisection (xtol 1e-12)."""
    half = ball_volume(d) / 2.0
    # quadrature round-off can put cap_volume(d, 1) a few ulps above kappa_d/2
    if not 0.0 <= volume <= half * (1.0 + 1e-12):
        raise OutOfRange(f"cap volume must lie in [0, kappa_d/2 = {half:.6g}], got {volume!r}")
    if volume == 0.0:
        return 0.0
    if volume >= half:
        return 1.0
    return bisect(lambda h: cap_volume(d, h) - volume, 0.0, 1.0, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)


def v_function(x) -> float:
    """Minimal volume of a cap of B^d containing x."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r > 1.0 + 1e-12:
        raise OutOfRange("point lies outside the unit ball")
    return cap_volume(x.shape[0], max(0.0, 1.0 - r))


@dataclass(frozen=True)
class WetPartProfile:
    d: int
    t: float
    cap_height: float
    floating_radius: float
    wet_volume: float


def wet_part(d: int, t: float) -> WetPartProfile:
    """Wet part of B^d for the volume parameter t: a shell 1 - h <= |x| <= 1."""
    d = check_dim(d, lo=1)
    if not 0.0 < t <= ball_volume(d) / 2.0:
        raise OutOfRange(f"volume parameter must lie in (0, kappa_d/2], got {t!r}")
    h = cap_height(d, t)
    r = 1.0 - h
    return WetPartProfile(d, t, h, r, ball_volume(d) * (1.0 - r**d))


# ---------------------------------------------------- simplices and cones

def chord_half_angle(chord: float) -> float:
    """Angular radius of S^{d-1} intersected with a ball of radius ``chord`` about a pole."""
    return 2.0 * math.asin(min(1.0, chord / 2.0))


def _regular_simplex(d: int) -> np.ndarray:
    """d unit vectors forming a regular (d-1)-simplex centred at 0 in {sum = 0}."""
    E = np.eye(d) - 1.0 / d
    return E / np.linalg.norm(E, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class SimplexFamily:
    direction: np.ndarray
    height: float
    vertices: np.ndarray  # (d+1, d): w_0 = x, then w_1..w_d
    small: np.ndarray  # (d+1, d+1, d): vertices of Delta_0..Delta_d
    inner_radius: float
    outer_radius: float

    @property
    def d(self) -> int:
        return self.direction.shape[0]

    @property
    def apex(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def base(self) -> np.ndarray:
        return self.vertices[1:]

    @property
    def inner_half_angle(self) -> float:
        return chord_half_angle(self.inner_radius)

    @property
    def outer_half_angle(self) -> float:
        return chord_half_angle(self.outer_radius)

    def sample(self, j: int, stream, size: int | None = None) -> np.ndarray:
        return uniform_simplex(self.small[j], stream, size)

    def small_volume(self, j: int = 0) -> float:
        return float(_simplex_volumes(self.small[j][None])[0])


def cap_construction(x, t: float) -> SimplexFamily:
    """Regular simplex inscribed in C(x,t), its 1/(4d) homothets and cone radii."""
    x = unit_vector(x)
    d = check_dim(x.shape[0])
    if not 0.0 < t < 1.0:
        raise OutOfRange(f"cap height must lie in (0, 1), got {t!r}")
    rho = math.sqrt(t * (2.0 - t))
    Q = orthonormal_complement(x)  # (d-1, d)
    R = _regular_simplex(d)  # d vertices in R^d, orthogonal to the all-ones vector
    # coordinates of R inside {sum = 0} via the complement of the all-ones vector
    C = orthonormal_complement(np.ones(d) / math.sqrt(d))
    base = (1.0 - t) * x + rho * (R @ C.T) @ Q
    W = np.vstack([x, base])
    small = np.stack([W[j] + (W - W[j]) / (4.0 * d) for j in range(d + 1)])
    return SimplexFamily(x, float(t), W, small, math.sqrt(t) / 8.0, 2.0 * d * math.sqrt(t))


def apex_normal_generators(z: np.ndarray) -> np.ndarray:
    """Outer unit normals of the d facets of [z_0..z_d] that contain z_0."""
    z = np.asarray(z, dtype=float)
    d = z.shape[1]
    out = []
    for j in range(1, d + 1):
        F = np.delete(z, j, axis=0)
        _, _, vt = np.linalg.svd(F[1:] - F[0])
        n = vt[-1]
        if n @ (z[j] - F[0]) > 0:
            n = -n
        out.append(n)
    return np.array(out)


def in_apex_normal_cone(z: np.ndarray, u: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """u lies in the normal cone at z_0 iff z_0 maximizes <., u> over the simplex."""
    z = np.asarray(z, dtype=float)
    u = np.atleast_2d(u)
    return np.all((z[1:] - z[0]) @ u.T <= tol, axis=0)


def extremal_normal_tangent(z: np.ndarray, x: np.ndarray, v: np.ndarray) -> float:
    """tan of the angle to x of the boundary normal cos(a) x + sin(a) v at z_0."""
    D = np.asarray(z[1:], dtype=float) - z[0]
    dx = D @ x
    dv = D @ v
    pos = dv > 0
    if not pos.any():
        return math.inf
    return float(np.min(-dx[pos] / dv[pos]))


def in_dual_outer_cone(y, x: np.ndarray, half_angle: float) -> np.ndarray:
    """Membership in {y : <y,u> <= 0 for all u in the cap of S^{d-1} of the given
    angular radius about x}, i.e. angle(y, x) >= pi/2 + half_angle."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if half_angle >= math.pi / 2:
        return np.linalg.norm(y, axis=1) == 0.0
    ny = np.linalg.norm(y, axis=1)
    c = (y @ x) / np.where(ny > 0, ny, 1.0)
    return (ny == 0.0) | (c <= math.cos(math.pi / 2 + half_angle) + 1e-15)


def capind_holds(d: int, gamma: float, t: float, stream, n_points: int = 4000, n_apex: int = 16) -> bool:
    """Sampled check of  B^d minus C(x, gamma t)  contained in  z_0 + dual(Sigma_2)."""
    x = np.zeros(d)
    x[0] = 1.0
    if gamma * t >= 2.0:
        return True
    fam = cap_construction(x, t)
    rng = as_generator(stream)
    phi = fam.outer_half_angle
    # worst points sit on the rim of the excluded cap; add uniform sphere points
    h = gamma * t
    rim = uniform_sphere(d, rng, n_points)
    rim[:, 0] = 0.0
    rim /= np.maximum(np.linalg.norm(rim, axis=1, keepdims=True), 1e-300)
    c = 1.0 - h
    rim = c * x + math.sqrt(max(0.0, 1.0 - c * c)) * rim
    extra = uniform_sphere(d, rng, n_points)
    extra = extra[extra @ x < c]
    Y = np.vstack([rim, extra])
    for z0 in fam.sample(0, rng, n_apex):
        if not np.all(in_dual_outer_cone(Y - z0, x, phi)):
            return False
    return True


@lru_cache(maxsize=None)
def capind_constant(d: int, seed: int = 0) -> float:
    """Doubling search (from 4) for a gamma valid at t in {1e-2, 1e-3, 1e-4}."""
    gamma = 4.0
    stream = RngStream(seed).derive("capind", d)
    while gamma < 1e6:
        if all(capind_holds(d, gamma, t, stream.derive(t)) for t in (1e-2, 1e-3, 1e-4)):
            return gamma
        gamma *= 2.0
    raise OutOfRange(f"no cap-inclusion constant found for d={d}")


def axis_points(fam: SimplexFamily) -> tuple[np.ndarray, np.ndarray]:
    """The two points on the axis of Delta_0 at 1/3 and 2/3 of its height."""
    w = fam.small[0][1:].mean(axis=0)
    x = fam.apex
    return 2.0 / 3.0 * x + w / 3.0, x / 3.0 + 2.0 / 3.0 * w


def sample_axis_region(fam: SimplexFamily, which: int, stream, size: int) -> tuple[np.ndarray, float]:
    """Uniform points of the region of Delta_0 above the upper axis point
    inside the reversed dual cone (``which=1``), or below the lower axis point
    inside the dual cone (``which=2``).  Also returns the accepted fraction,
    an estimate of the region's share of vol(Delta_0).
    """
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    rng = as_generator(stream)
    p1, p2 = axis_points(fam)
    x = fam.apex
    phi = fam.outer_half_angle
    got, tried = [], 0
    while sum(len(g) for g in got) < size:
        Z = fam.sample(0, rng, max(1024, 4 * size))
        tried += len(Z)
        if which == 1:
            ok = in_dual_outer_cone(p1 - Z, x, phi)
        else:
            ok = in_dual_outer_cone(Z - p2, x, phi)
        got.append(Z[ok])
        if tried > 10_000_000 and not any(len(g) for g in got):
            raise TooSmallCone("axis region has negligible volume")
    Z = np.vstack(got)
    return Z[:size], len(Z) / tried


# ------------------------------------------------------------------ V-hat

def subspace_hit_probability(d: int, s: int, half_angle: float) -> float:
    """nu_s{L : angle(x, L) <= half_angle}; |x|L|^2 ~ Beta(s/2, (d-s)/2)."""
    if s == d or half_angle >= math.pi / 2:
        return 1.0
    c2 = math.cos(half_angle) ** 2
    return float(1.0 - betainc(s / 2.0, (d - s) / 2.0, c2))


def conditioned_frames(x: np.ndarray, s: int, half_angle: float, N: int, stream) -> np.ndarray:
    """N Haar frames conditioned on angle(x, L) <= half_angle, by rejection."""
    d = x.shape[0]
    p = subspace_hit_probability(d, s, half_angle)
    if p < MIN_ACCEPTANCE:
        raise TooSmallCone(f"acceptance probability {p:.3g} below {MIN_ACCEPTANCE:g}")
    rng = as_generator(stream)
    c2 = math.cos(half_angle) ** 2
    out = []
    have = 0
    while have < N:
        batch = int(min(2_000_000, max(256, 1.2 * (N - have) / p)))
        B = haar_bases(d, s, rng, batch)
        keep = np.einsum("nsd,d->ns", B, x)
        keep = np.einsum("ns,ns->n", keep, keep) >= c2
        out.append(B[keep])
        have += int(keep.sum())
    return np.concatenate(out)[:N]


def hat_vs(z0, F, x, t: float, s: int, N: int, stream, frames: np.ndarray | None = None) -> float:
    """Integral of lambda_s([z_0, F] | L) over subspaces L meeting Sigma_2(x, t).

    Monte Carlo: mean over frames conditioned on hitting Sigma_2, times the
    exact Haar measure of that set.  Pass ``frames`` (from
    :func:`conditioned_frames`) to reuse common frames across calls.
    """
    x = unit_vector(x)
    d = x.shape[0]
    z = np.vstack([np.asarray(z0, dtype=float)[None], np.asarray(F, dtype=float)])
    if z.shape != (d + 1, d):
        raise ValueError("expected z0 and d points of F")
    if not 1 <= s <= d:
        raise ValueError(f"need 1 <= s <= d, got s={s}")
    if s == d:
        return float(_simplex_volumes(z[None])[0])
    phi = chord_half_angle(2.0 * d * math.sqrt(t))
    p = subspace_hit_probability(d, s, phi)
    if p < MIN_ACCEPTANCE:
        raise TooSmallCone(f"acceptance probability {p:.3g} below {MIN_ACCEPTANCE:g}")
    if frames is None:
        frames = conditioned_frames(x, s, phi, N, stream)
    if s == 1:
        Y = z @ frames[:, 0, :].T
        vals = Y.max(axis=0) - Y.min(axis=0)
    else:
        vals = np.array([projection_volume(z, B) for B in frames])
    return p * math.fsum(vals) / len(vals)


# ------------------------------------------------------- economic covering

@dataclass(frozen=True, eq=False)
class CapCover:
    """Caps C(y_i, beta h) and inner caps C(y_i, h/beta) for a ball wet part.

    ``t`` is the normalized volume parameter (unit-volume body), ``height``
    the cap height h with cap volume t * kappa_d.
    """

    d: int
    t: float
    height: float
    centers: np.ndarray
    beta: float
    separation: float

    @property
    def m(self) -> int:
        return len(self.centers)

    @property
    def outer_height(self) -> float:
        return min(2.0, self.beta * self.height)

    @property
    def inner_height(self) -> float:
        return self.height / self.beta

    @property
    def wet_volume(self) -> float:
        return ball_volume(self.d) * (1.0 - (1.0 - self.height) ** self.d)

    @property
    def normalized_wet_volume(self) -> float:
        return self.wet_volume / ball_volume(self.d)

    @property
    def count_ratio(self) -> float:
        """m t / lambda(K(t)) in unit-volume normalization."""
        return self.m * self.t / self.normalized_wet_volume

    def _tree(self) -> cKDTree:
        return cKDTree(self.centers)

    def covered(self, pts) -> np.ndarray:
        """Whether each point lies in some outer cap C(y_i, beta h)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        u = pts / np.where(r > 0, r, 1.0)[:, None]
        _, idx = self._tree().query(u)
        return np.einsum("ij,ij->i", pts, self.centers[idx]) >= 1.0 - self.outer_height - 1e-12

    def inner_disjoint(self) -> bool:
        """Exact test: inner caps of angular radius a are disjoint iff all
        centre angles exceed 2a."""
        if self.m < 2:
            return True
        a = math.acos(1.0 - self.inner_height)
        if 2 * a >= math.pi:
            return False
        dist, _ = self._tree().query(self.centers, k=2)
        min_angle = 2.0 * math.asin(min(1.0, float(dist[:, 1].min()) / 2.0))
        return min_angle > 2.0 * a

    def sample_wet_part(self, stream, size: int) -> np.ndarray:
        rng = as_generator(stream)
        u = uniform_sphere(self.d, rng, size)
        lo = (1.0 - self.height) ** self.d
        r = (lo + (1.0 - lo) * rng.random(size)) ** (1.0 / self.d)
        return u * r[:, None]

    def contains_cap(self, direction, height: float) -> bool:
        """Whether C(direction, height) lies in some outer cap (exact for ball caps)."""
        u = np.asarray(direction, dtype=float)
        _, i = self._tree().query(u)
        ang = math.acos(max(-1.0, min(1.0, float(u @ self.centers[i]))))
        return ang + math.acos(1.0 - height) <= math.acos(1.0 - self.outer_height) + 1e-12

    def audit_small_caps(self, stream, size: int = 2000) -> float:
        """Fraction of random caps disjoint from the floating body that some C_i contains."""
        rng = as_generator(stream)
        U = uniform_sphere(self.d, rng, size)
        H = self.height * rng.random(size)
        return float(np.mean([self.contains_cap(u, h) for u, h in zip(U, H)]))


def greedy_sphere_packing(d: int, sep: float, stream, batch: int | None = None) -> np.ndarray:
    """Random-order greedy packing of S^{d-1} with chord separation ``sep``.

    Candidates arrive in batches; the loop stops after two consecutive
    batches add nothing, so the packing is maximal up to uncovered holes
    too small to be hit by a batch.
    """
    rng = as_generator(stream)
    if batch is None:
        est = (2.0 / max(sep, 1e-6)) ** (d - 1) * 2 * math.pi
        batch = int(min(200_000, max(512, 8 * est)))
    centers = np.empty((0, d))
    stale = 0
    while stale < 2:
        cand = uniform_sphere(d, rng, batch)
        if len(centers):
            dist, _ = cKDTree(centers).query(cand)
            cand = cand[dist >= sep]
        added = []
        for c in cand:
            if added:
                A = np.asarray(added)
                if np.min(np.einsum("ij,ij->i", A - c, A - c)) < sep * sep:
                    continue
            added.append(c)
        if added:
            centers = np.vstack([centers, added])
            stale = 0
        else:
            stale += 1
    return centers


def economic_cover(d: int, t: float, stream, beta: float = 8.0, spacing: float = 2.0) -> CapCover:
    """Constructive cap cover of the wet part of B^d at normalized volume t.

    h is the cap height with cap volume t*kappa_d; centres form a maximal
    packing of S^{d-1} at chord distance spacing*sqrt(h).
    """
    d = check_dim(d)
    if not 0.0 < t < 0.5:
        raise OutOfRange(f"normalized volume parameter must lie in (0, 1/2), got {t!r}")
    h = cap_height(d, t * ball_volume(d))
    sep = spacing * math.sqrt(h)
    centers = greedy_sphere_packing(d, sep, stream)
    return CapCover(d, float(t), h, centers, float(beta), sep)


def cover_threshold(d: int) -> float:
    """Smallest-t regime (2d)^(-2d) where the cover constants are guaranteed (unit volume)."""
    return (2.0 * d) ** (-2.0 * d)
