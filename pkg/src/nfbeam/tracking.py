"""Pilot-driven position tracking with a coherence-time schedule.

Each estimation slot searches a disk around the previous estimate: one analog
range combiner per grid ring collects averaged uplink pilots, and a digital
azimuth scan picks the best sample.  The next slot is scheduled after the time
the user needs, at the predicted speed, to leave the current beam's focus
region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Protocol

import numpy as np

from .analytics import BeamAnalytics
from .channel import ChannelInstance, LinkBudget, uplink_rx
from .errors import ConfigurationError, DomainError
from .frontend import HybridConfig, angle_beamformer, optimal_precoder, range_combiner
from .geometry import PolarPosition
from .grid import CoordinateGrid, build_grid, cold_start_grid, refine_region, uniform_grid

TTI = 500e-6
FALSE_ALARM = 0.01  # chance that pure noise clears the weak-slot floor in one slot


@dataclass(frozen=True)
class TrackerParams:
    kappa: float = 50.0
    delta: float = 99.0
    gamma: float = 2.0
    u_threshold: float = 2.5
    e_c: float = 1.5
    e_u: float = 0.5
    n_pilots: int = 200
    tti: float = TTI
    normalized_weights: bool = False
    prune: str = "ring"
    exact_repeats: bool = False
    escape_recovery: bool = False
    coarse_delta: float = 50.0

    def __post_init__(self):
        if not 0 < self.kappa < self.delta < 100:
            raise ConfigurationError(f"need 0 < kappa < delta < 100, got kappa={self.kappa}, delta={self.delta}")
        if not self.gamma > 1:
            raise ConfigurationError(f"gamma must exceed 1, got {self.gamma}")
        if not self.u_threshold > 0:
            raise ConfigurationError("u_threshold must be positive")
        if self.e_c < 0 or self.e_u < 0:
            raise ConfigurationError("safety margins must be non-negative")
        if self.n_pilots < 1:
            raise ConfigurationError("n_pilots must be positive")
        if not self.tti > 0:
            raise ConfigurationError("tti must be positive")


@dataclass(frozen=True)
class BenchmarkParams:
    """Fixed estimation interval and uniform grid half-spacings."""

    t_fix: float
    dr_fix: float
    dphi_fix: float

    def __post_init__(self):
        if not (self.t_fix > 0 and self.dr_fix > 0 and self.dphi_fix > 0):
            raise ConfigurationError("benchmark parameters must be positive")


@dataclass(frozen=True)
class Estimate:
    position: PolarPosition
    ring_metrics: np.ndarray
    ring_index: int
    angle_index: int
    repeats: int
    pilots_used: int
    scan_products: int
    noise_metric: float


@dataclass(frozen=True)
class TrackerState:
    position_estimate: PolarPosition
    velocity_history: tuple
    coherence_time: float
    hybrid: HybridConfig
    slot_index: int = 0
    time: float = 0.0
    c_kappa: float = 0.0
    c_hat: float = 0.0
    n_rings: int = 0
    grid_size: int = 0
    pilots_used: int = 0
    weak_slots: int = 0
    recovered: bool = False

    def __post_init__(self):
        if not self.coherence_time > 0:
            raise DomainError("coherence time must be positive")
        if self.velocity_history and self.velocity_history[-1] < 0:
            raise DomainError("speed estimates must be non-negative")

    @property
    def next_trigger(self) -> float:
        return self.time + self.coherence_time


class World(Protocol):
    """True user motion and propagation seen by the tracker."""

    def position(self, t: float) -> PolarPosition: ...

    def channel(self, p: PolarPosition, rng: np.random.Generator) -> ChannelInstance: ...


def estimate_position(analytics: BeamAnalytics, grid: CoordinateGrid, channel: ChannelInstance,
                      budget: LinkBudget, n_pilots: int, rng: np.random.Generator,
                      exact_repeats: bool = False) -> Estimate:
    """Scan every ring of ``grid`` and return the best sample.

    Pilots are split evenly across rings (``floor(n_pilots / S_r)`` repeats
    each).  Ties resolve to the lowest ring index, then the lowest angle index.
    """
    s_r = grid.n_rings
    if s_r > n_pilots:
        raise ConfigurationError(f"grid has {s_r} rings but only {n_pilots} pilots are available")
    geom = analytics.geom
    m = n_pilots // s_r
    metrics = np.empty(s_r)
    best_angle = np.empty(s_r, dtype=int)
    noise = np.empty(s_r)
    products = 0
    for k, (r, angles) in enumerate(zip(grid.radial_samples, grid.per_ring_angles)):
        combiner = range_combiner(geom, r)
        y = uplink_rx(channel.h, combiner, budget.p_u, budget.noise_power, rng, m, exact_repeats)
        v = angle_beamformer(geom, np.asarray(angles), r)
        score = np.abs(v.conj() @ y) ** 2
        products += v.size
        j = int(np.argmax(score))
        metrics[k], best_angle[k] = score[j], j
        noise[k] = budget.noise_power / m * float(np.sum(np.abs(combiner.apply(v[j])) ** 2))
    k = int(np.argmax(metrics))
    j = int(best_angle[k])
    p_hat = PolarPosition(grid.radial_samples[k], grid.per_ring_angles[k][j])
    return Estimate(p_hat, metrics, k, j, m, m * s_r, products, float(noise[k]))


def velocity_weights(length: int, gamma: float, normalized: bool = False) -> np.ndarray:
    """Geometric weights ``gamma^j / (gamma^L - 1)``, oldest first.

    They sum to one only for ``gamma = 2``; ``normalized`` rescales them to
    unit sum for other bases.
    """
    if length < 1:
        raise DomainError("velocity history is empty")
    # gamma^(j-L) / (1 - gamma^-L): same values, no overflow for long histories
    w = np.power(gamma, np.arange(length, dtype=float) - length) / -np.expm1(-length * math.log(gamma))
    return w / w.sum() if normalized else w


def predict_velocity(history, params: TrackerParams) -> float:
    hist = np.asarray(history, dtype=float)
    w = velocity_weights(hist.size, params.gamma, params.normalized_weights)
    return max(float(np.sum(w * hist)), params.u_threshold)


def update_velocity(history, t_prev: float, p_t: PolarPosition, p_prev: PolarPosition,
                    params: TrackerParams) -> tuple[float, float, tuple]:
    """Measured speed over the last interval and the predicted speed for the next.

    Returns ``(u_measured, u_predicted, new_history)``.
    """
    if not t_prev > 0:
        raise DomainError("elapsed time must be positive")
    u_t = p_t.distance_to(p_prev) / t_prev
    new_hist = tuple(history) + (u_t,)
    return u_t, predict_velocity(new_hist, params), new_hist


def search_radius(analytics: BeamAnalytics, p: PolarPosition, kappa: float) -> float:
    """``c_kappa``: shorter of the chord across the angular width and the inward depth."""
    return analytics.chord_displacement(p.r, p.phi, kappa)


def schedule(analytics: BeamAnalytics, p_hat: PolarPosition, u_next: float,
             params: TrackerParams) -> tuple[float, float]:
    """``(c_kappa, T_c)`` for an estimate and predicted speed; ``T_c`` is floored at one TTI."""
    c = search_radius(analytics, p_hat, params.kappa)
    t_c = c / (u_next * (1.0 + params.e_u))
    return c, max(t_c, params.tti)


def initial_state(analytics: BeamAnalytics, p0: PolarPosition, u0: float, params: TrackerParams,
                  budget: LinkBudget, time: float = 0.0) -> TrackerState:
    """State seeded with a perfect position prior and an initial speed estimate."""
    u_next = max(u0, params.u_threshold)
    c, t_c = schedule(analytics, p0, u_next, params)
    hybrid = optimal_precoder(analytics.geom, p0, budget.p_b)
    return TrackerState(p0, (float(u0),), t_c, hybrid, 0, time, c, 0.0)


def _cold_start(analytics, channel, budget, params, rng):
    coarse = cold_start_grid(analytics, delta_bar=params.coarse_delta)
    if coarse.n_rings > params.n_pilots:
        coarse = replace(coarse, radial_samples=coarse.radial_samples[:params.n_pilots],
                         per_ring_angles=coarse.per_ring_angles[:params.n_pilots],
                         extents=coarse.extents[:params.n_pilots])
    est = estimate_position(analytics, coarse, channel, budget, params.n_pilots, rng, params.exact_repeats)
    fine = refine_region(analytics, est.position, params.coarse_delta, params.delta)
    return estimate_position(analytics, fine, channel, budget, params.n_pilots, rng, params.exact_repeats), fine


def noise_floor(noise_metric: float, samples: int) -> float:
    """Scan metric that the largest of ``samples`` noise-only outputs exceeds with
    probability about ``FALSE_ALARM`` (each output is exponential with mean ``noise_metric``)."""
    return noise_metric * (math.log(max(samples, 1)) - math.log(FALSE_ALARM))


def tracking_step(state: TrackerState, params: TrackerParams, analytics: BeamAnalytics, world: World,
                  budget: LinkBudget, rng: np.random.Generator) -> TrackerState:
    """Run one estimation slot at ``state.next_trigger``."""
    t = state.next_trigger
    truth = world.position(t)
    channel = world.channel(truth, rng)
    c_hat = state.c_kappa * (1.0 + params.e_c)
    grid = build_grid(analytics, state.position_estimate, c_hat, params.delta, prune=params.prune)
    est = estimate_position(analytics, grid, channel, budget, params.n_pilots, rng, params.exact_repeats)
    weak = state.weak_slots + 1 if est.ring_metrics[est.ring_index] < noise_floor(est.noise_metric, grid.size) else 0
    recovered = False
    if params.escape_recovery and weak >= 2:
        est, grid = _cold_start(analytics, channel, budget, params, rng)
        weak, recovered = 0, True
    _, u_next, hist = update_velocity(state.velocity_history, state.coherence_time,
                                      est.position, state.position_estimate, params)
    c, t_c = schedule(analytics, est.position, u_next, params)
    hybrid = optimal_precoder(analytics.geom, est.position, budget.p_b)
    return TrackerState(est.position, hist, t_c, hybrid, state.slot_index + 1, t, c, c_hat,
                        grid.n_rings, grid.size, est.pilots_used, weak, recovered)


def benchmark_radius_cap(bench: BenchmarkParams, n_pilots: int) -> float:
    """Largest disk radius whose uniform grid (rings every ``2 dr_fix``) fits in ``n_pilots`` rings."""
    return 2.0 * bench.dr_fix * ((n_pilots - 1) // 2)


def benchmark_step(state: TrackerState, params: TrackerParams, bench: BenchmarkParams,
                   analytics: BeamAnalytics, world: World, budget: LinkBudget,
                   rng: np.random.Generator) -> TrackerState:
    """Fixed-interval slot on a uniform grid.

    The disk radius covers the predicted travel over one interval with both
    safety margins applied, ``(1 + e_c)(1 + e_u) u_pred T_fix``, capped so the
    grid fits the pilot budget.
    """
    t = state.next_trigger
    truth = world.position(t)
    channel = world.channel(truth, rng)
    u_pred = predict_velocity(state.velocity_history, params)
    c_hat = (1.0 + params.e_c) * (1.0 + params.e_u) * u_pred * bench.t_fix
    # a diverged speed estimate must not ask for more rings than there are pilots
    c_hat = min(c_hat, benchmark_radius_cap(bench, params.n_pilots))
    grid = uniform_grid(analytics, state.position_estimate, c_hat, bench.dr_fix, bench.dphi_fix)
    est = estimate_position(analytics, grid, channel, budget, params.n_pilots, rng, params.exact_repeats)
    _, _, hist = update_velocity(state.velocity_history, state.coherence_time,
                                 est.position, state.position_estimate, params)
    hybrid = optimal_precoder(analytics.geom, est.position, budget.p_b)
    return TrackerState(est.position, hist, bench.t_fix, hybrid, state.slot_index + 1, t, 0.0, c_hat,
                        grid.n_rings, grid.size, est.pilots_used)


def run_tracker(analytics: BeamAnalytics, world: World, params: TrackerParams, budget: LinkBudget,
                rng: np.random.Generator, p0: PolarPosition, u0: float, t_end: float,
                bench: BenchmarkParams | None = None) -> list[TrackerState]:
    """All slots with trigger time ``<= t_end``; the first entry is the seeded state."""
    state = initial_state(analytics, p0, u0, params, budget)
    if bench is not None:
        state = replace(state, coherence_time=bench.t_fix)
    states = [state]
    while state.next_trigger <= t_end:
        if bench is None:
            state = tracking_step(state, params, analytics, world, budget, rng)
        else:
            state = benchmark_step(state, params, bench, analytics, world, budget, rng)
        states.append(state)
    return states
