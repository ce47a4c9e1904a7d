import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochgeo.caps import (
    apex_normal_generators,
    cap_construction,
    cap_height,
    cap_volume,
    capind_constant,
    capind_holds,
    chord_half_angle,
    conditioned_frames,
    economic_cover,
    extremal_normal_tangent,
    hat_vs,
    in_apex_normal_cone,
    in_dual_outer_cone,
    sample_axis_region,
    subspace_hit_probability,
    v_function,
    wet_part,
)
from stochgeo.errors import OutOfRange, TooSmallCone
from stochgeo.geometry import ball_volume, orthonormal_complement
from stochgeo.hull import _simplex_volumes
from stochgeo.sampling import RngStream, uniform_ball, uniform_sphere


def e1(d):
    x = np.zeros(d)
    x[0] = 1.0
    return x


# ----------------------------------------------------------- cap volumes

def test_cap_volume_oracles():
    for d in range(1, 8):
        assert cap_volume(d, 1.0) == pytest.approx(ball_volume(d) / 2, rel=1e-12)
        assert cap_volume(d, 2.0) == pytest.approx(ball_volume(d), rel=1e-12)
    assert cap_volume(1, 0.3) == pytest.approx(0.3, rel=1e-12)
    segment = math.acos(0.5) - 0.5 * math.sqrt(0.75)
    assert cap_volume(2, 0.5) == pytest.approx(segment, rel=1e-10)
    # spherical cap in R^3: pi t^2 (3 - t) / 3
    assert cap_volume(3, 0.2) == pytest.approx(math.pi * 0.04 * 2.8 / 3, rel=1e-10)
    with pytest.raises(OutOfRange):
        cap_volume(2, 2.5)


@given(st.integers(2, 8), st.floats(1e-8, 1.0))
def test_cap_height_round_trip(d, h):
    v = cap_volume(d, h)
    assert cap_height(d, v) == pytest.approx(h, rel=1e-10, abs=1e-12)


@given(st.integers(1, 6), st.floats(1e-6, 1.9), st.floats(1e-6, 0.1))
def test_cap_volume_strictly_increasing(d, h, dh):
    assert cap_volume(d, h) < cap_volume(d, min(2.0, h + dh))


def test_v_function_is_minimal_over_halfspaces():
    rng = np.random.default_rng(0)
    for d in (2, 3):
        for x in uniform_ball(d, RngStream(1, d), 5):
            v = v_function(x)
            u = uniform_sphere(d, RngStream(2, d), 1000)
            off = u @ x  # half-space {<y,u> >= <x,u>} contains x
            vols = [cap_volume(d, 1.0 - o) for o in off]
            assert min(vols) >= v - 1e-12
    with pytest.raises(OutOfRange):
        v_function([1.5, 0.0])


# -------------------------------------------------------------- wet part

def test_wet_part_extremes_and_monotonicity():
    for d in (2, 3, 4):
        full = wet_part(d, ball_volume(d) / 2)
        assert full.floating_radius == pytest.approx(0.0, abs=1e-10)
        assert full.wet_volume == pytest.approx(ball_volume(d))
        ts = np.geomspace(1e-8, ball_volume(d) / 2, 25)
        profs = [wet_part(d, t) for t in ts]
        assert all(a.floating_radius > b.floating_radius for a, b in zip(profs, profs[1:]))
        assert all(a.wet_volume < b.wet_volume for a, b in zip(profs, profs[1:]))
    with pytest.raises(OutOfRange):
        wet_part(2, math.pi)


@pytest.mark.parametrize("d", [2, 3])
def test_wet_volume_scales_with_two_over_d_plus_one(d):
    ts = np.geomspace(1e-6, 1e-2, 13)
    ratio = np.array([wet_part(d, t).wet_volume for t in ts]) / ts ** (2 / (d + 1))
    assert ratio.max() / ratio.min() <= 1.5


# ---------------------------------------------------- simplex construction

@pytest.mark.parametrize("d", [2, 3, 5])
def test_regular_simplex_inscribed_in_cap_base(d):
    t = 1e-3
    x = uniform_sphere(d, RngStream(3, d))
    fam = cap_construction(x, t)
    np.testing.assert_allclose(fam.apex, x)
    np.testing.assert_allclose(np.linalg.norm(fam.base, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(fam.base @ x, 1.0 - t, atol=1e-12)
    dist = [np.linalg.norm(a - b) for i, a in enumerate(fam.base) for b in fam.base[i + 1:]]
    np.testing.assert_allclose(dist, dist[0], rtol=1e-10)
    # homothets: ratio 1/(4d) about w_j
    for j in range(d + 1):
        D = fam.small[j]
        np.testing.assert_allclose(D[j], fam.vertices[j])
        np.testing.assert_allclose(_simplex_volumes(D[None])[0], _simplex_volumes(fam.vertices[None])[0] / (4 * d) ** d, rtol=1e-8)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_base_contains_ball_of_radius_sqrt_t_over_d(d):
    t = 1e-2
    x = e1(d)
    fam = cap_construction(x, t)
    Q = orthonormal_complement(x)
    rng = np.random.default_rng(d)
    g = rng.standard_normal((5000, d - 1))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = math.sqrt(t) / d * rng.random((5000, 1)) ** (1 / (d - 1))
    pts = (1 - t) * x + (r * g) @ Q
    # barycentric coordinates within the base simplex
    B = fam.base
    coef, *_ = np.linalg.lstsq((B[1:] - B[0]).T, (pts - B[0]).T, rcond=None)
    lam = np.vstack([1 - coef.sum(axis=0), coef])
    assert np.all(lam >= -1e-12)


@pytest.mark.parametrize("d", [2, 3])
def test_small_simplex_volume_window(d):
    ts = np.geomspace(1e-5, 1e-2, 7)
    r = [cap_construction(e1(d), t).small_volume(0) / t ** ((d + 1) / 2) for t in ts]
    assert max(r) / min(r) < 1.5


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("t", [1e-2, 1e-4])
def test_normal_cone_sandwich(d, t):
    x = e1(d)
    fam = cap_construction(x, t)
    Q = orthonormal_complement(x)
    rng = np.random.default_rng(int(d / t))
    for _ in range(30):
        z = np.array([fam.sample(j, rng) for j in range(d + 1)])
        # boundary directions of N along random great circles
        for _ in range(20):
            v = rng.standard_normal(d - 1) @ Q
            v /= np.linalg.norm(v)
            tan = extremal_normal_tangent(z, x, v)
            assert math.sqrt(t) / 4 <= tan <= 2 * d * math.sqrt(t)
        # Sigma_1 inside N
        a = fam.inner_half_angle * rng.random(100)
        V = rng.standard_normal((100, d - 1)) @ Q
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        U = np.cos(a)[:, None] * x + np.sin(a)[:, None] * V
        assert in_apex_normal_cone(z, U).all()
        # N inside Sigma_2
        W = rng.random((100, d)) @ apex_normal_generators(z)
        W /= np.linalg.norm(W, axis=1, keepdims=True)
        assert np.all(np.linalg.norm(W - x, axis=1) <= fam.outer_radius)
        # dual inclusion: rays y - z_0 with y in z_0 + dual(Sigma_2) meet N's dual
        Y = uniform_ball(d, rng, 500) * 3
        dual = in_dual_outer_cone(Y, x, fam.outer_half_angle)
        assert np.all(np.einsum("ij,kj->ik", Y[dual], W) <= 1e-12)


def test_cap_inclusion_constant():
    for d in (2, 3):
        g = capind_constant(d)
        assert capind_holds(d, g, 3e-4, RngStream(99, d))
        assert not capind_holds(d, 1.0, 3e-4, RngStream(99, d))


# ----------------------------------------------------------------- V-hat

def test_subspace_hit_probability_closed_forms():
    a = 0.3
    assert subspace_hit_probability(3, 1, a) == pytest.approx(1 - math.cos(a))
    assert subspace_hit_probability(3, 2, a) == pytest.approx(math.sin(a))
    assert subspace_hit_probability(4, 4, a) == 1.0


def test_hat_vs_full_dimension_and_bounds():
    d, t = 2, 1e-2
    x = e1(d)
    fam = cap_construction(x, t)
    rng = np.random.default_rng(0)
    z = np.array([fam.sample(j, rng) for j in range(d + 1)])
    vol = _simplex_volumes(z[None])[0]
    assert hat_vs(z[0], z[1:], x, t, d, 10, None) == pytest.approx(vol)
    frames = conditioned_frames(x, 1, chord_half_angle(2 * d * math.sqrt(t)), 4000, RngStream(1))
    v1 = hat_vs(z[0], z[1:], x, t, 1, 0, None, frames=frames)
    widths = (z @ frames[:, 0, :].T)
    assert 0 < v1 <= np.ptp(widths, axis=0).max()


def test_hat_vs_too_small_cone():
    x = e1(8)
    fam = cap_construction(x, 1e-8)
    z = np.array([fam.sample(j, RngStream(0, j)) for j in range(9)])
    with pytest.raises(TooSmallCone):
        hat_vs(z[0], z[1:], x, 1e-8, 1, 100, RngStream(1))


@pytest.mark.parametrize("s", [1, 2])
def test_psi_monotonicity(s):
    d, t = 2, 1e-2
    x = e1(d)
    fam = cap_construction(x, t)
    st_ = RngStream(5, s)
    F = np.array([fam.sample(j, st_.derive("F", j)) for j in range(1, d + 1)])
    Z1, g1 = sample_axis_region(fam, 1, st_.derive(1), 200)
    Z2, g2 = sample_axis_region(fam, 2, st_.derive(2), 200)
    assert g1 > 0 and g2 > 0
    frames = None if s == d else conditioned_frames(x, s, fam.outer_half_angle, 2000, st_.derive("fr"))
    a = np.array([hat_vs(z, F, x, t, s, 0, None, frames=frames) for z in Z1])
    b = np.array([hat_vs(z, F, x, t, s, 0, None, frames=frames) for z in Z2])
    assert np.mean(a >= b - 1e-15) >= 0.99


# ------------------------------------------------------------ cap covers

@pytest.mark.parametrize("d", [2, 3])
def test_economic_cover_properties(d):
    cov = economic_cover(d, 1e-3, RngStream(7, d))
    assert cov.inner_height < cov.height < cov.outer_height
    assert cov.covered(cov.sample_wet_part(RngStream(8, d), 10000)).all()
    assert cov.inner_disjoint()
    assert cov.audit_small_caps(RngStream(9, d), 500) == 1.0
    with pytest.raises(OutOfRange):
        economic_cover(d, 0.7, RngStream(0))


def test_cover_detects_overlap_and_gaps():
    cov = economic_cover(2, 1e-3, RngStream(1))
    crowded = type(cov)(cov.d, cov.t, cov.height, np.vstack([cov.centers, cov.centers[:1] * 1.0]), cov.beta, cov.separation)
    assert not crowded.inner_disjoint()
    sparse = type(cov)(cov.d, cov.t, cov.height, cov.centers[::4], cov.beta, cov.separation)
    assert not sparse.covered(cov.sample_wet_part(RngStream(2), 10000)).all()
