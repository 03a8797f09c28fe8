import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nfbeam.channel import (Disk, LinkBudget, build_channel, db, dbm_to_watt, downlink_rx, draw_scatterers,
                            los_channel, nlos_channel, pathloss, sample_channel, uplink_rx, watt_to_dbm)
from nfbeam.errors import DomainError
from nfbeam.frontend import focusing_vector, optimal_precoder, range_combiner
from nfbeam.geometry import DmaGeometry, PolarPosition, field_regions


def test_dbm_conversions():
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert dbm_to_watt(-94.0) == pytest.approx(10 ** -12.4)
    assert watt_to_dbm(dbm_to_watt(5.0)) == pytest.approx(5.0)


@pytest.mark.parametrize("r0,snr_db", [(45.0, 4.0), (5.0, 23.0)])
def test_uplink_snr_at_range_edges(geom, r0, snr_db):
    budget = LinkBudget.from_dbm(30.0, 5.0, -94.0)
    assert pathloss(0.01, 45.0) == pytest.approx(3.13e-10, rel=2e-3)
    assert db(budget.uplink_snr(geom, r0)) == pytest.approx(snr_db, abs=0.1)


def test_link_budget_validation():
    with pytest.raises(DomainError):
        LinkBudget(p_b=0.0)


def test_los_norm_constant_pathloss(geom):
    p = PolarPosition(12.0, 0.4)
    h = los_channel(geom, p)
    pl = pathloss(geom.wavelength, float(geom.r0_from_r(p.r)))
    assert np.vdot(h, h).real == pytest.approx(geom.n_total * pl, rel=1e-12)


def test_constant_pathloss_assumption_costs_under_one_percent(geom):
    reg = field_regions(geom)
    for r0 in np.linspace(reg.r_fresnel, reg.r_rayleigh, 12):
        p = PolarPosition(float(geom.r_from_r0(r0)), 1.0)
        a = los_channel(geom, p, True)
        b = los_channel(geom, p, False)
        corr = abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real)
        assert corr > 0.99


def test_no_scatterers_gives_los(geom):
    rng = np.random.default_rng(0)
    p = PolarPosition(10.0, 1.0)
    ch = sample_channel(geom, p, 0, Disk.around(p, 1.0), rng)
    np.testing.assert_array_equal(ch.h, ch.los_component)
    assert ch.scatterers == ()


def test_degenerate_disk_rejected(geom):
    p = PolarPosition(10.0, 1.0)
    with pytest.raises(DomainError):
        sample_channel(geom, p, 1, Disk.around(p, 0.0), np.random.default_rng(0))


def test_negative_scatterer_count_rejected(geom):
    p = PolarPosition(10.0, 1.0)
    with pytest.raises(DomainError):
        draw_scatterers(-1, Disk.around(p, 1.0), p, np.random.default_rng(0))


def test_reflection_amplitude_below_los(geom):
    rng = np.random.default_rng(3)
    p = PolarPosition(20.0, 1.2)
    for s in draw_scatterers(50, Disk.around(p, 5.0), p, rng):
        amp = geom.wavelength / (4 * math.pi * s.ue_distance)
        los_amp = geom.wavelength / (4 * math.pi * float(geom.r0_from_r(p.r)))
        assert amp * los_amp < los_amp
        assert -math.pi < s.reflection_phase <= math.pi


def test_nlos_weaker_than_los_on_average(geom):
    rng = np.random.default_rng(7)
    p = PolarPosition(25.0, 1.0)
    a = focusing_vector(geom, p)
    los = abs(np.vdot(a, los_channel(geom, p)))
    scat = draw_scatterers(1000, Disk.around(p, 3.0), p, rng)
    nlos = np.mean([abs(np.vdot(a, nlos_channel(geom, s))) for s in scat])
    assert nlos < los


def test_scatterer_distances_refreshed(geom):
    p, q = PolarPosition(10.0, 1.0), PolarPosition(12.0, 1.1)
    scat = draw_scatterers(2, Disk.around(p, 2.0), p, np.random.default_rng(1))
    ch = build_channel(geom, q, scat)
    for s in ch.scatterers:
        assert s.ue_distance == pytest.approx(s.position.distance_to(q))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), radius=st.floats(0.1, 50.0))
def test_disk_samples_inside_upper_half(seed, radius):
    rng = np.random.default_rng(seed)
    d = Disk(1.0, 0.5, radius)
    for _ in range(20):
        x, y = d.sample(rng)
        assert y >= 0
        assert math.hypot(x - 1.0, y - 0.5) <= radius * (1 + 1e-12)


def test_disk_samples_uniform_by_area():
    rng = np.random.default_rng(2)
    d = Disk(0.0, 100.0, 2.0)
    r2 = np.array([(x ** 2 + (y - 100.0) ** 2) for x, y in (d.sample(rng) for _ in range(20000))])
    assert np.mean(r2) == pytest.approx(2.0, rel=0.02)  # E[rho^2] = R^2 / 2


def test_channel_reproducible_from_seed(geom):
    p = PolarPosition(15.0, 2.0)
    a = sample_channel(geom, p, 2, Disk.around(p, 3.0), np.random.default_rng(42))
    b = sample_channel(geom, p, 2, Disk.around(p, 3.0), np.random.default_rng(42))
    np.testing.assert_array_equal(a.h, b.h)


def test_downlink_noiseless_gain(geom):
    p = PolarPosition(30.0, 0.9)
    h = los_channel(geom, p)
    hybrid = optimal_precoder(geom, p, 1.0)
    y = downlink_rx(h, hybrid, 0.0, np.random.default_rng(0))
    pl = pathloss(geom.wavelength, float(geom.r0_from_r(p.r)))
    assert abs(y) ** 2 == pytest.approx(pl * 0.5 * geom.n_total, rel=0.02)


def test_downlink_noise_only(geom):
    rng = np.random.default_rng(1)
    hybrid = optimal_precoder(geom, PolarPosition(30.0, 0.9), 1.0)
    h = np.zeros(geom.n_total, dtype=complex)
    ys = np.array([downlink_rx(h, hybrid, 2.5, rng) for _ in range(10000)])
    assert np.var(ys) == pytest.approx(2.5, rel=0.05)


def test_downlink_amplitude_scales_with_root_power(geom):
    p = PolarPosition(30.0, 0.9)
    h = los_channel(geom, p)
    y1 = downlink_rx(h, optimal_precoder(geom, p, 1.0), 0.0, np.random.default_rng(0))
    y4 = downlink_rx(h, optimal_precoder(geom, p, 4.0), 0.0, np.random.default_rng(0))
    assert abs(y4) == pytest.approx(2 * abs(y1), rel=1e-9)


def test_uplink_averaging_suppresses_noise(geom):
    p = PolarPosition(4.5, 1.0)  # about 23 dB per-element SNR
    budget = LinkBudget.from_dbm(30, 5, -94)
    h = los_channel(geom, p)
    comb = range_combiner(geom, p.r)
    clean = comb.combine(h) * math.sqrt(budget.p_u)
    y = uplink_rx(h, comb, budget.p_u, budget.noise_power, np.random.default_rng(0), repeats=10_000)
    assert np.sum(np.abs(y - clean) ** 2) < 0.01 * np.sum(np.abs(clean) ** 2)


@pytest.mark.parametrize("exact", [True, False])
def test_uplink_noise_covariance(geom, exact):
    rng = np.random.default_rng(9)
    comb = range_combiner(geom, 20.0)
    h = np.zeros(geom.n_total, dtype=complex)
    draws = np.array([uplink_rx(h, comb, 1.0, 1.0, rng, exact_repeats=exact) for _ in range(4000)])
    cov = draws.T @ draws.conj() / draws.shape[0]
    b = comb.matrix().conj().T @ comb.matrix()
    np.testing.assert_allclose(np.diag(cov).real, np.diag(b).real, rtol=0.1)
    assert np.max(np.abs(cov - np.diag(np.diag(cov)))) < 0.1 * 0.5 * geom.n_elements_per_strip
    np.testing.assert_allclose(np.diag(b).real, 0.5 * geom.n_elements_per_strip, rtol=0.1)


def test_uplink_fast_and_exact_repeats_agree_in_distribution(geom):
    comb = range_combiner(geom, 20.0)
    h = np.zeros(geom.n_total, dtype=complex)
    fast = np.array([uplink_rx(h, comb, 1.0, 1.0, np.random.default_rng(k), repeats=8) for k in range(1500)])
    slow = np.array([uplink_rx(h, comb, 1.0, 1.0, np.random.default_rng(k), repeats=8, exact_repeats=True)
                     for k in range(1500)])
    pf = np.mean(np.abs(fast) ** 2, axis=0)
    ps = np.mean(np.abs(slow) ** 2, axis=0)
    np.testing.assert_allclose(pf, ps, rtol=0.15)
    np.testing.assert_allclose(pf, 0.5 * geom.n_elements_per_strip / 8, rtol=0.15)


def test_uplink_zero_power_is_zero_mean(geom):
    rng = np.random.default_rng(4)
    comb = range_combiner(geom, 20.0)
    h = los_channel(geom, PolarPosition(20.0, 1.0))
    ys = np.array([uplink_rx(h, comb, 0.0, 1.0, rng) for _ in range(3000)])
    assert np.max(np.abs(ys.mean(axis=0))) < 4 * math.sqrt(0.5 * geom.n_elements_per_strip / 3000)


def test_uplink_rejects_zero_repeats(geom):
    with pytest.raises(DomainError):
        uplink_rx(np.zeros(geom.n_total), range_combiner(geom, 5.0), 1.0, 1.0, np.random.default_rng(0), 0)


def test_single_element_geometry_channel():
    g = DmaGeometry(n_microstrips=1, n_elements_per_strip=1)
    h = los_channel(g, PolarPosition(3.0, 1.0), use_constant_pathloss=False)
    assert h.shape == (1,)
