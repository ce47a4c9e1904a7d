import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochgeo.errors import DegenerateInput, OriginOutside
from stochgeo.hull import (
    affine_dimension,
    convex_hull,
    distance_to_polytope,
    enumerate_faces,
    face_volume,
    min_facet_offset,
    polytope_from_dict,
    polytope_volume,
    surface_area,
)
from stochgeo.sampling import RngStream, uniform_ball


def cube(d=3):
    return convex_hull(np.array(list(itertools.product([0.0, 1.0], repeat=d))))


def test_square_and_cube():
    sq = cube(2)
    assert polytope_volume(sq) == pytest.approx(1.0)
    assert surface_area(sq) == pytest.approx(4.0)
    c = cube(3)
    assert polytope_volume(c) == pytest.approx(1.0)
    assert surface_area(c) == pytest.approx(6.0)
    assert [len(enumerate_faces(c, k)) for k in range(3)] == [8, 12, 6]
    assert not c.is_simplicial
    assert all(len(f.vertices) == 4 for f in c.facets)
    assert polytope_volume(cube(4)) == pytest.approx(1.0)
    assert [len(enumerate_faces(cube(4), k)) for k in range(4)] == [16, 32, 24, 8]


def test_interior_points_dropped():
    pts = np.vstack([np.array(list(itertools.product([-1.0, 1.0], repeat=3))), np.zeros((1, 3)), [[0.1, 0.2, 0.3]]])
    P = convex_hull(pts)
    assert len(P.vertices) == 8
    assert sorted(P.source_indices.tolist()) == list(range(8))


@pytest.mark.parametrize("d,n", [(2, 50), (3, 300), (4, 200), (5, 120)])
def test_incremental_matches_qhull(d, n):
    pts = uniform_ball(d, RngStream(4, d), n)
    A = convex_hull(pts, method="qhull")
    B = convex_hull(pts, method="incremental")
    assert polytope_volume(A) == pytest.approx(polytope_volume(B), rel=1e-10)
    assert sorted(A.source_indices.tolist()) == sorted(B.source_indices.tolist())


@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_orientation_and_euler(seed, d):
    pts = uniform_ball(d, RngStream(seed), 40)
    P = convex_hull(pts)
    # outward normals: every vertex lies on the inner side of every facet
    assert np.all(P.vertices @ P.normals.T - P.offsets <= 1e-9)
    np.testing.assert_allclose(np.linalg.norm(P.normals, axis=1), 1.0)
    assert P.contains(P.centroid)[0]
    f = [len(enumerate_faces(P, k)) for k in range(d)]
    euler = sum((-1) ** k * fk for k, fk in enumerate(f))
    assert euler == 1 - (-1) ** d


def test_volume_monotone_in_nesting():
    pts = uniform_ball(3, RngStream(9), 2000)
    vols = [polytope_volume(convex_hull(pts[:n])) for n in (10, 100, 1000, 2000)]
    assert all(a <= b for a, b in zip(vols, vols[1:]))


def test_degenerate_inputs_raise():
    flat = np.column_stack([np.random.default_rng(0).random((20, 2)), np.zeros(20)])
    with pytest.raises(DegenerateInput):
        convex_hull(flat)
    with pytest.raises(DegenerateInput):
        convex_hull(flat, method="incremental")
    with pytest.raises(DegenerateInput):
        convex_hull(np.eye(3)[:2])
    assert affine_dimension(flat) == 2


def test_distance_matches_brute_force():
    sq = cube(2)
    Y = np.array([[0.5, 0.5], [2.0, 0.5], [2.0, 3.0], [-1.0, -1.0], [0.5, -0.25]])
    np.testing.assert_allclose(distance_to_polytope(sq, Y), [0, 1.0, math.hypot(1, 2), math.sqrt(2), 0.25])
    # random hull: compare to a dense boundary sample
    P = convex_hull(uniform_ball(2, RngStream(3), 30))
    Y = uniform_ball(2, RngStream(4), 50) * 3
    t = np.linspace(0, 1, 2001)[:, None]
    edges = [P.vertices[s] for s in P.simplices]
    boundary = np.vstack([e[0] + t * (e[1] - e[0]) for e in edges])
    brute = np.min(np.linalg.norm(Y[:, None, :] - boundary[None], axis=2), axis=1)
    brute[P.contains(Y, tol=0.0)] = 0.0
    np.testing.assert_allclose(distance_to_polytope(P, Y), brute, atol=2e-3)


def test_min_facet_offset():
    c = convex_hull(np.array(list(itertools.product([-1.0, 1.0], repeat=3))) * [1, 2, 3])
    assert min_facet_offset(c) == pytest.approx(1.0)
    with pytest.raises(OriginOutside):
        min_facet_offset(cube(3))


def test_face_volume_and_json_roundtrip():
    c = cube(3)
    edge = enumerate_faces(c, 1).faces[0]
    assert face_volume(c, edge) == pytest.approx(1.0)
    Q = polytope_from_dict(c.to_dict())
    assert polytope_volume(Q) == pytest.approx(1.0)
    assert len(Q.facets) == 6
    bad = dict(c.to_dict(), facets=[])
    with pytest.raises(ValueError):
        polytope_from_dict(bad)
