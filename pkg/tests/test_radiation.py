import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dicke_forge import statevec as sv
from dicke_forge.ensemble import DipolePattern, EnsembleGeometry
from dicke_forge.radiation import (
    Direction,
    QuadratureSpec,
    Weighting,
    chain_coherence,
    coherence_factor,
    cone_mean_coherence,
    cylinder_expected_coherence,
    default_quadrature,
    detection_fraction,
    emission_rate_S,
    integrate_direction_function,
    intensity,
    mismatch_fidelity,
    single_emitter_pattern,
    total_emission_rate,
)
from helpers import cs_chain, nv_cylinder

Z = np.array([0.0, 0.0, 1.0])


def random_dirs(rng, m):
    v = rng.normal(size=(m, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_geom(rng, n, pattern=DipolePattern.SIGMA_PLUS):
    return EnsembleGeometry(rng.uniform(-2e-6, 2e-6, size=(n, 3)), 852e-9, 30e-9, pattern)


# ---------------------------------------------------------------------------
# directions


def test_direction_normalizes_and_measures_angles():
    d = Direction([0.0, 0.0, 2.0])
    np.testing.assert_array_equal(d.vec, Z)
    e = Direction.from_angles(0.3, 1.1)
    assert math.isclose(d.angle_to(e), 0.3, rel_tol=1e-12)
    assert Direction.from_angles(1e-9).angle_to(d) == pytest.approx(1e-9, rel=1e-6)
    with pytest.raises(ValueError):
        Direction([0.0, 0.0, 0.0])


# ---------------------------------------------------------------------------
# coherence factor


def test_single_emitter_coherence_is_one(rng):
    g = cs_chain(1)
    np.testing.assert_allclose(coherence_factor(g, None, random_dirs(rng, 50)), 1.0, rtol=1e-15)


def test_forward_coherence_is_n(rng):
    for g in (cs_chain(30), nv_cylinder(50), random_geom(rng, 7)):
        assert coherence_factor(g, None, Direction(g.axis)) == g.n


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 25), seed=st.integers(0, 2**31))
def test_coherence_bounds(n, seed):
    rng = np.random.default_rng(seed)
    g = random_geom(rng, n)
    z = coherence_factor(g, random_dirs(rng, 3)[0], random_dirs(rng, 64))
    assert np.all(z >= 0.0) and np.all(z <= n * (1 + 1e-12))


def test_chain_closed_form_matches_direct_sum(rng):
    g = cs_chain(30)
    theta = rng.uniform(0.0, math.pi, 500)
    dirs = np.stack([np.sin(theta), np.zeros_like(theta), np.cos(theta)], axis=1)
    direct = coherence_factor(g, None, dirs)
    closed = chain_coherence(30, 532e-9, 852e-9, theta)
    np.testing.assert_allclose(direct, closed, rtol=1e-12, atol=1e-12)


def test_chain_closed_form_singular_points():
    assert chain_coherence(30, 532e-9, 852e-9, 0.0) == 30.0
    # u = 2 pi exactly: k d (1 - cos theta) = 2 pi with d = lambda gives theta = pi / 2
    assert chain_coherence(5, 1.0, 1.0, math.pi / 2) == pytest.approx(5.0, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_translation_invariance_of_coherence(seed):
    rng = np.random.default_rng(seed)
    g = random_geom(rng, 6)
    shift = rng.uniform(-1e-5, 1e-5, 3)
    dirs = random_dirs(rng, 20)
    a = coherence_factor(g, None, dirs)
    b = coherence_factor(g.translated(shift), None, dirs)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_translation_invariance_of_integrals():
    g = cs_chain(10)
    t = g.translated([3e-6, -2e-6, 7e-6])
    quad = QuadratureSpec(256, 32)
    assert emission_rate_S(g, None, quad) == pytest.approx(emission_rate_S(t, None, quad), rel=1e-12)
    assert detection_fraction(g, None, 0.2, quad) == pytest.approx(detection_fraction(t, None, 0.2, quad), rel=1e-12)


# ---------------------------------------------------------------------------
# quadrature


@pytest.mark.parametrize("quad", [QuadratureSpec(), QuadratureSpec(64, 1), QuadratureSpec(100, 8, refine=False)])
def test_constant_integrates_to_solid_angle(quad):
    one = lambda d: np.ones(len(d))
    assert integrate_direction_function(one, quad) == pytest.approx(4 * math.pi, abs=1e-10)
    for alpha in (1e-3, 0.2, 1.0, 2.5):
        cap = integrate_direction_function(one, quad, alpha)
        assert cap == pytest.approx(2 * math.pi * (1 - math.cos(alpha)), abs=1e-10)


@pytest.mark.parametrize("pattern", list(DipolePattern))
def test_patterns_are_normalized(pattern):
    total = integrate_direction_function(lambda d: pattern.density(d[:, 2]), QuadratureSpec(64, 4))
    assert total == pytest.approx(1.0, abs=1e-9)


def test_off_axis_quadrature_integrates_dipole():
    axis = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)
    f = lambda d: DipolePattern.PI.density(d @ axis)
    assert integrate_direction_function(f, QuadratureSpec(64, 8), axis=(0, 0, 1)) == pytest.approx(1.0, abs=1e-9)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(n_polar=1)
    with pytest.raises(ValueError):
        QuadratureSpec(n_azimuth=0)


@pytest.mark.parametrize("geom", [cs_chain(10), cs_chain(100)], ids=["cs10", "cs100"])
def test_quadrature_convergence(geom):
    q = default_quadrature(geom)
    s1, s2 = emission_rate_S(geom, None, q), emission_rate_S(geom, None, q.doubled())
    e1, e2 = detection_fraction(geom, None, 0.1, q), detection_fraction(geom, None, 0.1, q.doubled())
    assert abs(s1 - s2) < 1e-6 and abs(e1 - e2) < 1e-6


def test_quadrature_convergence_cylinder_realization():
    g = nv_cylinder(30, seed=2)
    q = default_quadrature(g)
    assert abs(emission_rate_S(g, None, q) - emission_rate_S(g, None, q.doubled())) < 1e-6


# ---------------------------------------------------------------------------
# intensity and rates


def test_half_excited_single_atom_radiates_half():
    assert total_emission_rate(cs_chain(1)) == pytest.approx(0.5, abs=1e-12)


def test_single_atom_rate_per_excitation_is_one():
    for pattern in DipolePattern:
        g = EnsembleGeometry([[0, 0, 0]], 852e-9, 30e-9, pattern)
        assert emission_rate_S(g) == pytest.approx(1.0, abs=1e-12)


def test_forward_intensity_of_cs_thirty():
    g = cs_chain(30)
    i0 = DipolePattern.SIGMA_PLUS.density(1.0)
    assert intensity(g, None, Direction(Z)) == pytest.approx(i0 * 30 / 4 * 31, rel=1e-14)


def test_single_atom_has_no_forward_peak():
    g = cs_chain(1)
    theta = np.linspace(0, math.pi, 721)
    dirs = np.stack([np.sin(theta), np.zeros_like(theta), np.cos(theta)], axis=1)
    i = intensity(g, None, dirs)
    assert i.max() / i.min() == pytest.approx(2.0, rel=1e-9)
    np.testing.assert_allclose(i, 0.5 * single_emitter_pattern(g, None, dirs), rtol=1e-14)


def test_cs_thirty_forward_lobe_dominates():
    g = cs_chain(30)
    theta = np.linspace(0.0, math.pi, 4001)
    dirs = np.stack([np.sin(theta), np.zeros_like(theta), np.cos(theta)], axis=1)
    i = intensity(g, None, dirs)
    assert i.argmax() == 0
    # between the forward lobe and the Bragg lobe at u = 2 pi (near 127 deg), past the first side lobes
    u = 2 * math.pi * 532 / 852 * (1 - np.cos(theta))
    width = 2 * math.pi / 30
    away = (u > 2.5 * width) & (u < 2 * math.pi - 2.5 * width)
    assert i[0] > 10 * i[away].max()


def test_cs_thirty_rate():
    assert emission_rate_S(cs_chain(30)) == pytest.approx(1.2, abs=0.15)


# ---------------------------------------------------------------------------
# cone averages


def test_cone_mean_limits(rng):
    g = cs_chain(10)
    assert cone_mean_coherence(g, None, 1e-6) == pytest.approx(10.0, rel=1e-9)
    one = cs_chain(1)
    for a in (0.01, 0.5, math.pi):
        assert cone_mean_coherence(one, None, a) == pytest.approx(1.0, abs=1e-12)


def test_cone_mean_at_design_angle():
    # mismatch budget 0.2 / N saturated near 210 mrad
    assert cone_mean_coherence(cs_chain(10), None, 0.210) == pytest.approx(9.8, abs=0.02)


def test_cone_mean_weightings_differ_but_agree_in_the_limit():
    g = cs_chain(30)
    a = cone_mean_coherence(g, None, 0.2, weighting=Weighting.SOLID_ANGLE)
    b = cone_mean_coherence(g, None, 0.2, weighting=Weighting.INTENSITY)
    assert b > a  # intensity weighting leans on the forward lobe
    assert cone_mean_coherence(g, None, 1e-5, weighting=Weighting.INTENSITY) == pytest.approx(30, rel=1e-6)


def test_detection_fraction_limits_and_table_value():
    g = cs_chain(30)
    assert detection_fraction(g, None, math.pi) == pytest.approx(1.0, abs=1e-12)
    assert detection_fraction(g, None, 0.0) == 0.0
    assert 0.02 <= detection_fraction(g, None, 0.091) <= 0.08


def test_detection_fraction_is_monotone():
    g = cs_chain(30)
    alphas = np.linspace(0.001, math.pi, 60)
    eta = [detection_fraction(g, None, a) for a in alphas]
    assert np.all(np.diff(eta) >= -1e-12)


# ---------------------------------------------------------------------------
# mismatch fidelity


def test_mismatch_fidelity_limits(rng):
    g = random_geom(rng, 5)
    assert mismatch_fidelity(g, None, Direction(g.axis)) == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(mismatch_fidelity(cs_chain(1), None, random_dirs(rng, 10)), 1.0)


def test_mismatch_fidelity_matches_state_vector_oracle(rng):
    for _ in range(20):
        g = random_geom(rng, 4)
        k = random_dirs(rng, 1)[0]
        phases = g.wavenumber * (g.positions @ (k - g.axis))
        target = sv.w_state(g)
        shifted = sv.apply_phases(target, phases)
        assert mismatch_fidelity(g, None, k) == pytest.approx(sv.fidelity(target, shifted), abs=1e-12)


# ---------------------------------------------------------------------------
# cylinder average


def test_expected_coherence_limits(rng):
    c = nv_cylinder(100).cylinder
    assert cylinder_expected_coherence(100, c.radius, c.length, 637e-9, Z, Direction(Z)) == 100.0
    z = cylinder_expected_coherence(1, c.radius, c.length, 637e-9, Z, random_dirs(rng, 10))
    np.testing.assert_allclose(z, 1.0)


def test_expected_coherence_matches_seed_average():
    n, seeds = 100, 4000
    c = nv_cylinder(n).cylinder
    theta = np.linspace(0.0, 0.8, 10)
    dirs = np.stack([np.sin(theta), np.zeros_like(theta), np.cos(theta)], axis=1)
    acc = np.zeros(len(theta))
    for s in range(seeds):
        acc += coherence_factor(nv_cylinder(n, seed=s), None, dirs)
    expected = cylinder_expected_coherence(n, c.radius, c.length, 637e-9, Z, dirs)
    np.testing.assert_allclose(acc / seeds, expected, rtol=0.05)
