import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from nfbeam.analytics import BeamAnalytics
from nfbeam.errors import DomainError
from nfbeam.frontend import (angle_beamformer, focusing_vector, lorentzian_weight, optimal_precoder,
                             range_combiner, relative_gain)
from nfbeam.geometry import DmaGeometry, PolarPosition, field_regions


def test_focusing_vector_matches_oracle(geom):
    p = PolarPosition(17.0, 2.1)
    np.testing.assert_allclose(focusing_vector(geom, p), oracles.steering(17.0, 2.1), atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(r=st.floats(1.0, 300.0), phi=st.floats(0.0, math.pi))
def test_focusing_vector_unit_modulus_and_self_correlation(r, phi):
    geom = DmaGeometry()
    a = focusing_vector(geom, PolarPosition(r, phi), "fresnel")
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)
    assert relative_gain(a, a) == pytest.approx(1.0, abs=1e-12)


def test_single_element_correlation_is_one():
    g = DmaGeometry(n_microstrips=1, n_elements_per_strip=1)
    a = focusing_vector(g, PolarPosition(3.0, 0.2))
    b = focusing_vector(g, PolarPosition(40.0, 2.9))
    assert relative_gain(a, b) == pytest.approx(1.0)


def test_range_mismatch_gain_matches_closed_form(geom, analytics):
    p, q = PolarPosition(30.0, math.pi / 4), PolarPosition(30.5, math.pi / 4)
    brute = relative_gain(focusing_vector(geom, p), focusing_vector(geom, q))
    assert brute == pytest.approx(oracles.gain((30.0, math.pi / 4), (30.5, math.pi / 4)), rel=1e-9)
    assert float(analytics.corr_range(0.5, 30.0, math.pi / 4)) == pytest.approx(brute, rel=0.02)


def test_unknown_distance_model(geom):
    with pytest.raises(DomainError):
        focusing_vector(geom, PolarPosition(1.0, 1.0), "paraxial")


@pytest.mark.parametrize("theta,expected", [(math.pi / 2, 1j), (-math.pi / 2, 0.0), (0.0, 0.5 + 0.5j)])
def test_lorentzian_weight_examples(theta, expected):
    assert lorentzian_weight(theta) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=100)
@given(theta=st.floats(-20.0, 20.0))
def test_lorentzian_weight_on_circle(theta):
    assert abs(lorentzian_weight(theta) - 0.5j) == pytest.approx(0.5, abs=1e-12)


def _random_focus(rng, geom):
    reg = field_regions(geom)
    r0 = rng.uniform(reg.r_fresnel, reg.r_rayleigh)
    return PolarPosition(float(geom.r_from_r0(r0)), rng.uniform(0.0, math.pi))


def test_optimal_gain_is_half_power_times_elements(geom):
    rng = np.random.default_rng(11)
    for _ in range(10):
        p = _random_focus(rng, geom)
        hybrid = optimal_precoder(geom, p, 1.0, model="exact")
        assert hybrid.gain(focusing_vector(geom, p)) == pytest.approx(1000.0, rel=0.02)
        assert hybrid.radiated_power() <= 1.0 + 1e-12


def test_optimal_gain_reference_point(geom):
    p = PolarPosition(30.0, math.pi / 4)
    hybrid = optimal_precoder(geom, p, 1.0)
    assert hybrid.gain(focusing_vector(geom, p, "exact")) == pytest.approx(999.74, abs=0.01)


def test_precoder_transmit_vector_structure(geom):
    p = PolarPosition(25.0, 1.2)
    hybrid = optimal_precoder(geom, p, 2.0)
    a = focusing_vector(geom, p, "fresnel")
    expected = 0.5 * math.sqrt(2 * 2.0 / geom.n_total) * (a + 1j * geom.waveguide_phasors)
    x = hybrid.transmit_vector()
    scale = np.vdot(expected, x) / np.vdot(expected, expected)
    assert abs(scale - 1) < 1e-4
    np.testing.assert_allclose(x, scale * expected, atol=1e-12)


def test_waveguide_residual_small(geom):
    beta_rho = geom.waveguide_wavenumber * geom.feed_distances
    a = focusing_vector(geom, PolarPosition(30.0, math.pi / 4), "fresnel")
    w = (np.exp(-1j * beta_rho) * np.conj(a)).reshape(geom.n_microstrips, -1).sum(axis=1)
    assert np.max(np.abs(w)) / geom.n_elements_per_strip < 0.05


def test_precoder_rejects_non_positive_power(geom):
    with pytest.raises(DomainError):
        optimal_precoder(geom, PolarPosition(5.0, 1.0), 0.0)


@pytest.mark.parametrize("kw", [dict(dielectric_eps=2.2), dict(feed_offset=0.013), dict(dielectric_eps=3.0, feed_offset=0.1)])
def test_focus_gain_independent_of_waveguide(kw):
    base = DmaGeometry()
    other = DmaGeometry(**kw)
    p = PolarPosition(40.0, 0.8)
    g0 = optimal_precoder(base, p, 1.0).gain(focusing_vector(base, p, "fresnel"))
    g1 = optimal_precoder(other, p, 1.0).gain(focusing_vector(other, p, "fresnel"))
    assert g1 == pytest.approx(g0, rel=0.01)


def test_precoder_is_best_at_its_own_focus(geom):
    rng = np.random.default_rng(5)
    p = PolarPosition(20.0, 1.0)
    a = focusing_vector(geom, p, "fresnel")
    g_own = optimal_precoder(geom, p, 1.0).gain(a)
    for _ in range(20):
        q = PolarPosition(20.0 + rng.uniform(-3, 3), 1.0 + rng.uniform(-0.2, 0.2))
        assert optimal_precoder(geom, q, 1.0).gain(a) <= g_own * 1.02


def test_relative_gain_matches_correlation(geom):
    p, q = PolarPosition(20.0, 1.0), PolarPosition(20.4, 1.02)
    a_p, a_q = focusing_vector(geom, p, "fresnel"), focusing_vector(geom, q, "fresnel")
    ratio = optimal_precoder(geom, q, 1.0).gain(a_p) / optimal_precoder(geom, p, 1.0).gain(a_p)
    assert ratio == pytest.approx(relative_gain(a_p, a_q), rel=0.02)


def test_combiner_identity(geom):
    r, phi = 30.0, math.pi / 4
    a = focusing_vector(geom, PolarPosition(r, phi), "fresnel")
    x = range_combiner(geom, r).apply(angle_beamformer(geom, phi, r))
    global_phase = np.exp(1j * geom.wavenumber * (r + geom.z0 ** 2 / (2 * r)))
    v_rep = np.repeat(angle_beamformer(geom, phi, r), geom.n_elements_per_strip)
    expected = 0.5 * (a * global_phase + 1j * geom.waveguide_phasors * v_rep)
    np.testing.assert_allclose(x, expected, atol=1e-10)


def test_combiner_entries_on_lorentzian_circle(geom):
    q = range_combiner(geom, 12.0).element_weights(geom)
    np.testing.assert_allclose(np.abs(q - 0.5j), 0.5, atol=1e-12)


def test_combiner_block_structure(geom):
    m = range_combiner(geom, 12.0).matrix()
    assert m.shape == (geom.n_total, geom.n_microstrips)
    nz = np.abs(m) > 0
    assert np.all(nz.sum(axis=1) == 1)
    strip = np.arange(geom.n_total) // geom.n_elements_per_strip
    for k in range(geom.n_microstrips):
        assert not nz[strip != k, k].any()


def test_combiner_rejects_bad_range(geom):
    with pytest.raises(DomainError):
        range_combiner(geom, 0.0)
    with pytest.raises(DomainError):
        angle_beamformer(geom, 1.0, -2.0)


def test_broadside_digital_vector_all_ones(geom):
    np.testing.assert_allclose(angle_beamformer(geom, math.pi / 2, 10.0), 1.0, atol=1e-12)


@settings(max_examples=40)
@given(phi=st.floats(0.0, math.pi), r=st.floats(1.0, 500.0))
def test_digital_vector_unit_modulus(phi, r):
    np.testing.assert_allclose(np.abs(angle_beamformer(DmaGeometry(), phi, r)), 1.0, atol=1e-12)


def test_scan_peaks_at_true_azimuth(geom):
    r, phi_true = 25.0, 1.1
    a = focusing_vector(geom, PolarPosition(r, phi_true), "fresnel")
    y = range_combiner(geom, r).combine(a)
    phis = np.linspace(phi_true - 0.3, phi_true + 0.3, 601)
    score = np.abs(angle_beamformer(geom, phis, r).conj() @ y) ** 2
    assert phis[int(np.argmax(score))] == pytest.approx(phi_true, abs=1e-3)


def test_analytics_helper_consistent_with_oracle_window(geom):
    ana = BeamAnalytics(geom)
    w = ana.focus_window(30.0, math.pi / 4, 50)
    g = relative_gain(focusing_vector(geom, PolarPosition(30.0, math.pi / 4)),
                      focusing_vector(geom, PolarPosition(30.0 - w.delta_r_minus, math.pi / 4)))
    assert g == pytest.approx(0.5, abs=0.05)
