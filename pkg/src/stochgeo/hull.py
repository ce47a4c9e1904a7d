"""Convex hulls in R^d (2 <= d <= 8), volumes, faces and containment.

A :class:`Polytope` stores its boundary as a triangulation into (d-1)-simplices
with outward unit normals and adjacency.  True facets (maximal groups of
coplanar boundary simplices) and the face lattice are derived lazily.

Two construction backends share this representation:

``"qhull"``
    scipy's Qhull binding; fast, tolerant of exactly coplanar input (cubes).
``"incremental"``
    a beneath-beyond insertion hull written here; it raises
    :class:`DegenerateInput` on any near-coplanarity and is used as an
    independent cross-check of the Qhull path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateInput, OriginOutside
from .geometry import MAX_DIM

ORIENT_TOL = 1e-10
FACET_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Facet:
    normal: np.ndarray
    offset: float
    vertices: tuple


@dataclass(frozen=True)
class FaceSet:
    k: int
    faces: tuple

    def __len__(self):
        return len(self.faces)


class Polytope:
    """Full-dimensional convex polytope given by its triangulated boundary.

    Attributes
    ----------
    vertices : (nv, d) array
    simplices : (T, d) int array, boundary simplices indexing ``vertices``
    normals, offsets : outward unit normal and offset of each simplex plane
    neighbors : (T, d) int array, neighbor of simplex i across the ridge
        opposite its k-th vertex
    source_indices : indices of the vertices in the point set the hull was
        built from
    """

    def __init__(self, vertices, simplices, normals, offsets, neighbors, source_indices=None):
        self.vertices = _ro(np.asarray(vertices, dtype=float))
        self.simplices = _ro(np.asarray(simplices, dtype=np.intp))
        self.normals = _ro(np.asarray(normals, dtype=float))
        self.offsets = _ro(np.asarray(offsets, dtype=float))
        self.neighbors = _ro(np.asarray(neighbors, dtype=np.intp))
        if source_indices is None:
            source_indices = np.arange(len(self.vertices))
        self.source_indices = _ro(np.asarray(source_indices, dtype=np.intp))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __repr__(self):
        return f"Polytope(dim={self.dim}, vertices={len(self.vertices)}, facets={len(self.facets)})"

    @cached_property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @cached_property
    def facet_labels(self) -> np.ndarray:
        """Facet index of each boundary simplex (coplanar neighbors merged)."""
        T = len(self.simplices)
        i = np.repeat(np.arange(T), self.dim)
        j = self.neighbors.ravel()
        same = (np.max(np.abs(self.normals[i] - self.normals[j]), axis=1) < FACET_TOL) & (
            np.abs(self.offsets[i] - self.offsets[j]) < FACET_TOL
        )
        if not same.any():
            return np.arange(T)
        g = coo_matrix((np.ones(int(same.sum())), (i[same], j[same])), shape=(T, T))
        _, labels = connected_components(g, directed=False)
        return labels

    @cached_property
    def is_simplicial(self) -> bool:
        return len(np.unique(self.facet_labels)) == len(self.simplices)

    @cached_property
    def facets(self) -> tuple:
        labels = self.facet_labels
        out = []
        for lab in np.unique(labels):
            members = np.flatnonzero(labels == lab)
            n = self.normals[members].mean(axis=0)
            n /= np.linalg.norm(n)
            b = float(self.offsets[members].mean())
            verts = tuple(sorted(set(self.simplices[members].ravel().tolist())))
            out.append(Facet(_ro(n), b, verts))
        return tuple(out)

    @cached_property
    def simplex_volumes(self) -> np.ndarray:
        """(d-1)-volume of each boundary simplex."""
        return _simplex_volumes(self.vertices[self.simplices])

    def contains(self, pts, tol: float = FACET_TOL) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.all(pts @ self.normals.T - self.offsets <= tol, axis=1)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "vertices": self.vertices.tolist(),
            "facets": [
                {"normal": f.normal.tolist(), "offset": f.offset, "vertices": list(f.vertices)}
                for f in self.facets
            ],
        }


def _ro(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def _simplex_volumes(S: np.ndarray) -> np.ndarray:
    """k-volumes of simplices given as (m, k+1, d) vertex arrays."""
    k = S.shape[1] - 1
    if k == 0:
        return np.ones(S.shape[0])
    E = S[:, 1:, :] - S[:, :1, :]
    G = E @ np.transpose(E, (0, 2, 1))
    det = np.linalg.det(G)
    return np.sqrt(np.clip(det, 0.0, None)) / math.factorial(k)


def convex_hull(pts, d: int | None = None, method: str = "qhull") -> Polytope:
    """Convex hull of a point cloud as a :class:`Polytope`.

    Raises :class:`DegenerateInput` when the points do not span R^d (and, for
    the incremental backend, on any near-coplanarity); callers resample.
    """
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be an (n, d) array")
    n, dd = pts.shape
    if d is not None and d != dd:
        raise ValueError(f"points have dimension {dd}, expected {d}")
    if not 2 <= dd <= MAX_DIM:
        raise ValueError(f"hull dimension must be in [2, {MAX_DIM}], got {dd}")
    if n < dd + 1:
        raise DegenerateInput(f"need at least {dd + 1} points in dimension {dd}, got {n}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points have non-finite coordinates")
    if method == "qhull":
        return _qhull(pts)
    if method == "incremental":
        return _beneath_beyond(pts)
    raise ValueError(f"unknown hull method {method!r}")


def _qhull(pts: np.ndarray) -> Polytope:
    try:
        h = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateInput(str(exc).splitlines()[0]) from None
    d = pts.shape[1]
    verts = np.asarray(h.vertices)
    remap = np.full(len(pts), -1, dtype=np.intp)
    remap[verts] = np.arange(len(verts))
    simplices = remap[h.simplices]
    normals = h.equations[:, :d]
    offsets = -h.equations[:, d]
    V = pts[verts]
    # Qhull orients outward already; enforce against the interior centroid.
    c = V.mean(axis=0)
    flip = normals @ c > offsets
    if flip.any():
        normals = np.where(flip[:, None], -normals, normals)
        offsets = np.where(flip, -offsets, offsets)
    return Polytope(V, simplices, normals, offsets, h.neighbors, source_indices=verts)


def _initial_simplex(pts: np.ndarray) -> list[int]:
    n, d = pts.shape
    scale = max(1.0, float(np.max(np.abs(pts))))
    chosen = [int(np.argmin(pts[:, 0]))]
    basis = np.zeros((0, d))
    for _ in range(d):
        diff = pts - pts[chosen[0]]
        resid = diff - (diff @ basis.T) @ basis
        dist = np.linalg.norm(resid, axis=1)
        i = int(np.argmax(dist))
        if dist[i] <= ORIENT_TOL * scale:
            raise DegenerateInput("points do not span R^d")
        chosen.append(i)
        basis = np.vstack([basis, resid[i] / dist[i]])
    return chosen


def _plane_through(P: np.ndarray, interior: np.ndarray, scale: float):
    """Unit normal and offset of the hyperplane through the d rows of P,
    oriented away from ``interior``."""
    E = P[1:] - P[0]
    _, sv, vt = np.linalg.svd(E)
    if sv.size and sv[-1] <= ORIENT_TOL * scale * max(1.0, sv[0]):
        raise DegenerateInput("near-degenerate facet")
    n = vt[-1]
    b = float(n @ P[0])
    h = float(n @ interior) - b
    if abs(h) <= ORIENT_TOL * scale:
        raise DegenerateInput("interior point on facet plane")
    if h > 0:
        n, b = -n, -b
    return n, b


def _beneath_beyond(pts: np.ndarray) -> Polytope:
    n, d = pts.shape
    scale = max(1.0, float(np.max(np.abs(pts))))
    tol = ORIENT_TOL * scale
    init = _initial_simplex(pts)
    interior = pts[init].mean(axis=0)

    facets: dict[int, tuple] = {}  # id -> (sorted vertex tuple, normal, offset)
    ridges: dict[tuple, list] = {}  # sorted (d-1)-tuple -> facet ids
    next_id = 0

    def add_facet(vs):
        nonlocal next_id
        vs = tuple(sorted(vs))
        nrm, off = _plane_through(pts[list(vs)], interior, scale)
        fid = next_id
        next_id += 1
        facets[fid] = (vs, nrm, off)
        for r in itertools.combinations(vs, d - 1):
            ridges.setdefault(r, []).append(fid)

    def drop_facet(fid):
        vs = facets.pop(fid)[0]
        for r in itertools.combinations(vs, d - 1):
            lst = ridges[r]
            lst.remove(fid)
            if not lst:
                del ridges[r]

    for omit in range(d + 1):
        add_facet([v for k, v in enumerate(init) if k != omit])

    in_init = set(init)
    for p in range(n):
        if p in in_init:
            continue
        ids = list(facets)
        N = np.array([facets[f][1] for f in ids])
        B = np.array([facets[f][2] for f in ids])
        h = N @ pts[p] - B
        if np.any(np.abs(h) <= tol):
            raise DegenerateInput(f"point {p} is (nearly) coplanar with a facet")
        vis = {ids[i] for i in np.flatnonzero(h > 0)}
        if not vis:
            continue
        horizon = []
        for fid in vis:
            vs = facets[fid][0]
            for r in itertools.combinations(vs, d - 1):
                other = [g for g in ridges[r] if g != fid]
                if other and other[0] not in vis:
                    horizon.append(r)
        for fid in vis:
            drop_facet(fid)
        for r in horizon:
            add_facet(r + (p,))

    ids = sorted(facets)
    used = sorted({v for f in ids for v in facets[f][0]})
    remap = {v: i for i, v in enumerate(used)}
    simplices = np.array([[remap[v] for v in facets[f][0]] for f in ids], dtype=np.intp)
    normals = np.array([facets[f][1] for f in ids])
    offsets = np.array([facets[f][2] for f in ids])
    pos = {f: i for i, f in enumerate(ids)}
    neighbors = np.empty_like(simplices)
    for i, f in enumerate(ids):
        vs = facets[f][0]
        for k in range(d):
            r = vs[:k] + vs[k + 1:]
            other = [g for g in ridges[r] if g != f]
            neighbors[i, k] = pos[other[0]]
    return Polytope(pts[used], simplices, normals, offsets, neighbors, source_indices=used)


def polytope_volume(P: Polytope) -> float:
    """Volume as a sum of cones from the centroid over the boundary simplices."""
    d = P.dim
    E = P.vertices[P.simplices] - P.centroid
    dets = np.abs(np.linalg.det(E))
    return float(math.fsum(dets)) / math.factorial(d)


def surface_area(P: Polytope) -> float:
    return float(math.fsum(P.simplex_volumes))


def affine_dimension(pts: np.ndarray, tol: float = 1e-9) -> int:
    pts = np.asarray(pts, dtype=float)
    if len(pts) <= 1:
        return 0
    sv = np.linalg.svd(pts[1:] - pts[0], compute_uv=False)
    scale = max(1.0, float(sv[0]) if sv.size else 1.0)
    return int(np.sum(sv > tol * scale))


def enumerate_faces(P: Polytope, k: int) -> FaceSet:
    """All k-faces of P as sorted vertex-index tuples (0 <= k <= d-1).

    Works downward from the facets: the (j-1)-faces are the (j-1)-dimensional
    intersections of j-faces with facets.
    """
    d = P.dim
    if not 0 <= k <= d - 1:
        raise ValueError(f"face dimension must be in [0, {d - 1}], got {k}")
    if k == 0:
        return FaceSet(0, tuple((i,) for i in range(len(P.vertices))))
    facet_sets = [frozenset(f.vertices) for f in P.facets]
    if P.is_simplicial:
        faces = set()
        for f in P.facets:
            faces.update(itertools.combinations(f.vertices, k + 1))
        return FaceSet(k, tuple(sorted(faces)))
    level = set(facet_sets)
    for j in range(d - 1, k, -1):
        nxt = set()
        for G in level:
            cands = {G & F for F in facet_sets if not G <= F}
            cands = {c for c in cands if len(c) >= j and affine_dimension(P.vertices[sorted(c)]) == j - 1}
            nxt.update(cands)
        level = nxt
    return FaceSet(k, tuple(sorted(tuple(sorted(f)) for f in level)))


def face_volume(P: Polytope, face) -> float:
    """k-dimensional volume of a face given by vertex indices."""
    idx = list(face)
    X = P.vertices[idx]
    k = affine_dimension(X)
    if k == 0:
        return 1.0
    if len(idx) == k + 1:
        return float(_simplex_volumes(X[None])[0])
    _, _, vt = np.linalg.svd(X[1:] - X[0])
    Y = (X - X[0]) @ vt[:k].T
    if k == 1:
        return float(Y.max() - Y.min())
    return polytope_volume(convex_hull(Y))


def min_facet_offset(P: Polytope) -> float:
    """Largest r with r*B^d inside P; requires the origin to be interior."""
    if np.any(P.offsets <= 0.0):
        raise OriginOutside("origin is not an interior point of the polytope")
    return float(P.offsets.min())


def _simplex_dist2(Y: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Squared distance from each row of Y to the simplex with vertex rows S."""
    if len(S) == 1:
        return np.einsum("ij,ij->i", Y - S[0], Y - S[0])
    A = (S[1:] - S[0]).T
    G = A.T @ A
    R = Y - S[0]
    # pinv: a flat simplex is the union of its facets, which the recursion covers
    c = R @ A @ np.linalg.pinv(G)
    bary0 = 1.0 - c.sum(axis=1)
    resid = R - c @ A.T
    out = np.einsum("ij,ij->i", resid, resid)
    outside = (bary0 < 0) | np.any(c < 0, axis=1)
    if outside.any():
        Yo = Y[outside]
        best = np.full(len(Yo), np.inf)
        for drop in range(len(S)):
            best = np.minimum(best, _simplex_dist2(Yo, np.delete(S, drop, axis=0)))
        out[outside] = best
    return out


def distance_to_polytope(P: Polytope, pts, chunk: int = 8192) -> np.ndarray:
    """Euclidean distance from each point to P (0 inside).

    The nearest boundary point of an exterior point lies on a facet whose
    plane separates it from P, so only those boundary simplices are searched.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.zeros(len(pts))
    for lo in range(0, len(pts), chunk):
        Y = pts[lo:lo + chunk]
        sd = Y @ P.normals.T - P.offsets
        seen = sd > 0
        outside = seen.any(axis=1)
        best = np.full(len(Y), np.inf)
        for t in np.flatnonzero(seen.any(axis=0)):
            m = seen[:, t]
            d2 = _simplex_dist2(Y[m], P.vertices[P.simplices[t]])
            best[m] = np.minimum(best[m], d2)
        out[lo:lo + chunk] = np.where(outside, np.sqrt(best), 0.0)
    return out


def polytope_from_dict(obj: dict) -> Polytope:
    """Polytope from the JSON interchange layout ``{"dim", "vertices", "facets"?}``.

    Facets, when present, are only checked for consistency; the hull is
    always recomputed from the vertices.
    """
    d = int(obj["dim"])
    V = np.asarray(obj["vertices"], dtype=float)
    if V.ndim != 2 or V.shape[1] != d:
        raise ValueError(f"vertices must be a list of {d}-vectors")
    P = convex_hull(V, d)
    if "facets" in obj and obj["facets"] is not None and len(obj["facets"]) != len(P.facets):
        raise ValueError(
            f"file lists {len(obj['facets'])} facets but the hull of its vertices has {len(P.facets)}"
        )
    return P
