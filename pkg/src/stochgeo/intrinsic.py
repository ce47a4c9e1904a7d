"""Intrinsic volumes of polytopes by three independent routes.

* :func:`kubota_intrinsic` averages projection volumes over Haar subspaces.
* :func:`exact_intrinsic` sums face volumes times external angles.
* :func:`steiner_fit_oracle` measures vol(P + lam*B) by hit-or-miss and fits
  the Steiner polynomial.

Kubota normalization: V_s(K) = c(d,s) * E_L[lambda_s(K|L)] with
c(d,s) = binom(d,s) kappa_d / (kappa_s kappa_{d-s}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, IllConditioned
from .geometry import ball_volume
from .hull import (
    Polytope,
    _simplex_volumes,
    convex_hull,
    distance_to_polytope,
    enumerate_faces,
    face_volume,
    polytope_volume,
)
from .sampling import BodySpec, as_generator, haar_bases

METHODS = ("kubota", "external_angle", "steiner_fit")


@dataclass(frozen=True)
class IntrinsicEstimate:
    s: int
    value: float
    std_error: float
    method: str


def kubota_constant(d: int, s: int) -> float:
    return math.comb(d, s) * ball_volume(d) / (ball_volume(s) * ball_volume(d - s))


def ball_intrinsic_volume(d: int, s: int) -> float:
    """V_s(B^d) = binom(d,s) kappa_d / kappa_{d-s} (read off (1+lam)^d kappa_d)."""
    return math.comb(d, s) * ball_volume(d) / ball_volume(d - s)


def projection_volume(pts: np.ndarray, basis: np.ndarray) -> float:
    """s-volume of the convex hull of ``pts`` projected onto the rows of ``basis``."""
    Y = pts @ basis.T
    s = basis.shape[0]
    if s == 1:
        return float(Y.max() - Y.min())
    return polytope_volume(convex_hull(Y))


def projection_volumes(pts: np.ndarray, bases: np.ndarray) -> np.ndarray:
    """Projection volumes for a stack of bases of shape (N, s, d)."""
    N, s, d = bases.shape
    if s == 1:
        Y = pts @ bases[:, 0, :].T
        return Y.max(axis=0) - Y.min(axis=0)
    if s == d:
        return np.full(N, polytope_volume(convex_hull(pts)))
    return np.array([projection_volume(pts, B) for B in bases])


def kubota_intrinsic(P: Polytope, s: int, N: int, stream, frames: np.ndarray | None = None) -> IntrinsicEstimate:
    """Kubota estimate of V_s(P) from N Haar frames (or the given frames).

    A frame whose projected hull is degenerate is redrawn; with
    caller-supplied frames it is simply dropped.
    """
    d = P.dim
    if not 0 <= s <= d:
        raise ValueError(f"need 0 <= s <= d, got s={s}")
    if s == 0:  # every projection to {0} is a point
        return IntrinsicEstimate(0, 1.0, 0.0, "kubota")
    if s == d:
        return IntrinsicEstimate(s, polytope_volume(P), 0.0, "kubota")
    V = P.vertices
    c = kubota_constant(d, s)
    if frames is not None:
        vals = []
        for B in frames:
            try:
                vals.append(projection_volume(V, B))
            except DegenerateInput:
                continue
        vals = np.asarray(vals)
    else:
        if N < 1:
            raise ValueError("need at least one frame")
        rng = as_generator(stream)
        vals = np.empty(0)
        while vals.size < N:
            bases = haar_bases(d, s, rng, N - vals.size)
            if s == 1:
                vals = np.concatenate([vals, projection_volumes(V, bases)])
                continue
            got = []
            for B in bases:
                try:
                    got.append(projection_volume(V, B))
                except DegenerateInput:
                    pass
            vals = np.concatenate([vals, got])
    n = vals.size
    mean = math.fsum(vals) / n
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return IntrinsicEstimate(s, c * mean, c * se, "kubota")


def _complement_basis(X: np.ndarray, d: int) -> np.ndarray:
    """Orthonormal basis (rows) of the orthogonal complement of aff(X)'s direction space."""
    if len(X) == 1:
        return np.eye(d)
    u, sv, vt = np.linalg.svd(X[1:] - X[0])
    k = int(np.sum(sv > 1e-9 * max(1.0, sv[0])))
    return vt[k:]


def _ridge_term(P: Polytope) -> float:
    """Sum over (d-2)-faces of volume times external angle, via the triangulation.

    Ridges interior to a flat facet have parallel normals and contribute 0.
    """
    S = P.simplices
    T, d = S.shape
    i = np.repeat(np.arange(T), d)
    k = np.tile(np.arange(d), T)
    j = P.neighbors.ravel()
    keep = i < j
    i, k, j = i[keep], k[keep], j[keep]
    cols = np.arange(d)[None, :] != k[:, None]
    ridge_idx = S[i][cols].reshape(len(i), d - 1)
    vols = _simplex_volumes(P.vertices[ridge_idx])
    dn = np.linalg.norm(P.normals[i] - P.normals[j], axis=1)
    ang = 2.0 * np.arcsin(np.clip(dn / 2.0, 0.0, 1.0))
    return math.fsum(vols * ang / (2.0 * math.pi))


def _planar_cone_fraction(gens: np.ndarray) -> float:
    """Fraction of the circle covered by the convex cone spanned by 2-d vectors."""
    ang = np.sort(np.arctan2(gens[:, 1], gens[:, 0]))
    gaps = np.diff(np.concatenate([ang, ang[:1] + 2.0 * math.pi]))
    return float((2.0 * math.pi - gaps.max()) / (2.0 * math.pi))


def external_angle(P: Polytope, face, samples: int = 0, stream=None) -> tuple[float, float]:
    """Normalized external angle of P at a face and its Monte Carlo error.

    Closed forms in normal dimension 1 and 2; otherwise ``samples`` Gaussian
    directions of the normal space are tested for membership in the normal
    cone (u is normal at F iff every vertex v has <v,u> <= <F,u>).
    """
    d = P.dim
    idx = list(face)
    X = P.vertices[idx]
    Q = _complement_basis(X, d)
    m = Q.shape[0]
    if m == 1:
        return 0.5, 0.0
    fs = set(idx)
    normals = np.array([f.normal for f in P.facets if fs <= set(f.vertices)])
    if m == 2:
        return _planar_cone_fraction(normals @ Q.T), 0.0
    if samples < 1:
        raise ValueError("normal dimension >= 3 requires angle samples")
    rng = as_generator(stream)
    g = rng.standard_normal((samples, m)) @ Q
    ref = g @ X[0]
    tol = 1e-12 * max(1.0, float(np.abs(P.vertices).max()))
    inside = np.all(P.vertices @ g.T <= ref + tol, axis=0)
    p = float(inside.mean())
    return p, math.sqrt(p * (1.0 - p) / samples)


def exact_intrinsic(P: Polytope, s: int, angle_samples: int = 0, stream=None) -> IntrinsicEstimate:
    """V_s(P) as the sum over s-faces of face volume times external angle."""
    d = P.dim
    if not 0 <= s <= d:
        raise ValueError(f"need 0 <= s <= d, got s={s}")
    if s == d:
        return IntrinsicEstimate(s, polytope_volume(P), 0.0, "external_angle")
    if s == d - 1:
        return IntrinsicEstimate(s, 0.5 * math.fsum(P.simplex_volumes), 0.0, "external_angle")
    if s == d - 2:
        return IntrinsicEstimate(s, _ridge_term(P), 0.0, "external_angle")
    rng = as_generator(stream) if stream is not None else None
    total, var = [], 0.0
    for face in enumerate_faces(P, s).faces:
        g, e = external_angle(P, face, angle_samples, rng)
        if g == 0.0 and e == 0.0:
            continue
        vol = 1.0 if s == 0 else face_volume(P, face)
        total.append(vol * g)
        var += (vol * e) ** 2
    return IntrinsicEstimate(s, math.fsum(total), math.sqrt(var), "external_angle")


def steiner_fit_oracle(P: Polytope, lambdas, M: int, stream) -> tuple[IntrinsicEstimate, ...]:
    """All V_0..V_d from a hit-or-miss fit of vol(P + lam*B^d).

    One cloud of M uniform points in the lam_max-enlarged bounding box gives
    nested counts for every lam; the lam = 0 row is the exact volume.  The
    polynomial sum_k lam^k kappa_k V_{d-k} is fitted by generalized least
    squares with the multinomial covariance of the nested counts.
    """
    d = P.dim
    lam = np.unique(np.asarray(lambdas, dtype=float))
    lam = lam[lam > 0]
    if lam.size < d:
        raise IllConditioned(f"need at least {d} distinct positive radii, got {lam.size}")
    spread = lam.max() - lam.min()
    if np.min(np.diff(lam), initial=spread) < 1e-3 * lam.max():
        raise IllConditioned("radius grid has (nearly) repeated values")
    vol = polytope_volume(P)
    rng = as_generator(stream)
    lo = P.vertices.min(axis=0) - lam.max()
    hi = P.vertices.max(axis=0) + lam.max()
    box = float(np.prod(hi - lo))
    Y = lo + (hi - lo) * rng.random((M, d))
    dist = distance_to_polytope(P, Y)
    p = np.array([(dist <= l).mean() for l in lam])
    y = box * p - vol
    # nested indicator sets: Cov(1[D<=a], 1[D<=b]) = p_min - p_a p_b
    pm = np.minimum.outer(p, p)
    cov = box**2 * (pm - np.outer(p, p)) / M
    X = np.vander(lam, d + 1, increasing=True)[:, 1:]
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > 1e12:
        raise IllConditioned(f"Vandermonde condition number {cond:.3g}")
    jitter = 1e-12 * np.trace(cov) / len(lam) + 1e-300
    Ci = np.linalg.inv(cov + jitter * np.eye(len(lam)))
    A = X.T @ Ci @ X
    beta_cov = np.linalg.inv(A)
    beta = beta_cov @ X.T @ Ci @ y
    out = [IntrinsicEstimate(d, vol, 0.0, "steiner_fit")]
    for k in range(1, d + 1):
        kap = ball_volume(k)
        out.append(IntrinsicEstimate(d - k, float(beta[k - 1] / kap), float(math.sqrt(beta_cov[k - 1, k - 1]) / kap), "steiner_fit"))
    return tuple(sorted(out, key=lambda e: e.s))


def ellipsoid_projection_volume(semiaxes, bases: np.ndarray) -> np.ndarray:
    """lambda_s of the projection of an axis-parallel ellipsoid onto each frame.

    The image of diag(a) B^d under the frame map is an ellipsoid with
    Gram matrix M = B diag(a)^2 B^T, of volume kappa_s sqrt(det M).
    """
    a2 = np.asarray(semiaxes, dtype=float) ** 2
    M = np.einsum("nid,d,njd->nij", bases, a2, bases)
    s = bases.shape[1]
    return ball_volume(s) * np.sqrt(np.linalg.det(M))


def body_intrinsic_volume(spec: BodySpec, s: int, N: int = 200_000, stream=None) -> tuple[float, float]:
    """Reference V_s of the mother body and its standard error.

    Ball: closed form.  Ellipsoid: volume closed form; other s by Kubota
    averaging of the exact projected-ellipsoid volumes.
    """
    d = spec.d
    if not 1 <= s <= d:
        raise ValueError(f"need 1 <= s <= d, got s={s}")
    if spec.is_ball:
        return ball_intrinsic_volume(d, s), 0.0
    if s == d:
        return spec.volume, 0.0
    rng = as_generator(stream)
    vals = ellipsoid_projection_volume(spec.semiaxes, haar_bases(d, s, rng, N))
    c = kubota_constant(d, s)
    return c * math.fsum(vals) / N, c * float(vals.std(ddof=1)) / math.sqrt(N)
