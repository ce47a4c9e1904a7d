import math

import numpy as np
import pytest
from scipy import stats

from stochgeo.sampling import (
    BodySpec,
    RngStream,
    as_generator,
    haar_bases,
    haar_subspace,
    uniform_ball,
    uniform_body,
    uniform_simplex,
    uniform_sphere,
)


def test_streams_are_reproducible_and_independent():
    a = uniform_ball(3, RngStream(7, 1), 100)
    b = uniform_ball(3, RngStream(7, 1), 100)
    c = uniform_ball(3, RngStream(7, 2), 100)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    s = RngStream(7)
    assert s.derive("rep", 1) == s.derive("rep", 1)
    assert s.derive("rep", 1) != s.derive("rep", 2)


def test_stream_validation():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(TypeError):
        as_generator(42)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_uniform_ball_radial_law(d):
    pts = uniform_ball(d, RngStream(3, d), 20000)
    r = np.linalg.norm(pts, axis=1)
    assert r.max() <= 1.0
    # r^d is uniform on [0, 1]
    assert stats.kstest(r**d, "uniform").pvalue > 1e-3
    # directions are isotropic: mean near 0
    assert np.all(np.abs(pts.mean(axis=0)) < 5 / math.sqrt(20000))


def test_uniform_sphere_norms():
    u = uniform_sphere(4, RngStream(1), 1000)
    np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1.0)
    assert uniform_sphere(3, RngStream(1)).shape == (3,)


def test_ellipsoid_sampling():
    spec = BodySpec.ellipsoid((1.5, 1.0, 0.75))
    pts = uniform_body(spec, RngStream(2), 20000)
    assert spec.contains(pts).all()
    # the diagonal map keeps the volume fraction of the inner half-scaled body
    frac = np.mean(spec.contains(2 * pts))
    assert frac == pytest.approx(1 / 8, abs=0.01)
    assert spec.volume == pytest.approx(4 * math.pi / 3 * 1.125)
    lo, hi = spec.curvature_bounds
    assert lo == pytest.approx(0.75 / 2.25) and hi == pytest.approx(1.5 / 0.5625)
    assert BodySpec.ball(3).curvature_bounds == (1.0, 1.0)
    with pytest.raises(ValueError):
        BodySpec((1.0, -1.0))


def test_uniform_simplex():
    V = np.array([[0.0, 0], [2, 0], [0, 1]])
    pts = uniform_simplex(V, RngStream(5), 20000)
    assert np.all(pts >= -1e-15) and np.all(pts[:, 0] / 2 + pts[:, 1] <= 1 + 1e-12)
    np.testing.assert_allclose(pts.mean(axis=0), V.mean(axis=0), atol=0.02)


@pytest.mark.parametrize("d,s", [(3, 1), (3, 2), (5, 2), (8, 7)])
def test_haar_bases_orthonormal_and_invariant(d, s):
    B = haar_bases(d, s, RngStream(11, d * 10 + s), 5000)
    G = np.einsum("nid,njd->nij", B, B)
    assert np.max(np.abs(G - np.eye(s))) < 1e-12
    # squared projection length of a fixed unit vector is Beta(s/2, (d-s)/2)
    z = np.ones(d) / math.sqrt(d)
    p2 = np.sum((B @ z) ** 2, axis=1)
    assert stats.kstest(p2, stats.beta(s / 2, (d - s) / 2).cdf).pvalue > 1e-3


def test_haar_subspace_frame():
    F = haar_subspace(4, 2, RngStream(0))
    assert (F.s, F.d) == (2, 4)
