"""LoS and single-bounce scatterer channels, link budget and noisy receive models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .frontend import AnalogWeights, HybridConfig, focusing_vector, inner
from .geometry import DmaGeometry, PolarPosition, distances_xy, exact_distances


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


def db(x):
    return 10.0 * np.log10(x)


def pathloss(wavelength: float, distance) -> float:
    """Free-space power pathloss ``(lambda / (4 pi d))^2``."""
    return (wavelength / (4.0 * math.pi * distance)) ** 2


@dataclass(frozen=True)
class LinkBudget:
    """Transmit powers and noise power, all in watts."""

    p_b: float = 1.0
    p_u: float = float(dbm_to_watt(5.0))
    noise_power: float = float(dbm_to_watt(-94.0))

    def __post_init__(self):
        for name in ("p_b", "p_u", "noise_power"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")

    @classmethod
    def from_dbm(cls, p_b_dbm: float, p_u_dbm: float, noise_dbm: float) -> LinkBudget:
        return cls(float(dbm_to_watt(p_b_dbm)), float(dbm_to_watt(p_u_dbm)),
                   float(dbm_to_watt(noise_dbm)))

    def uplink_snr(self, geom: DmaGeometry, r0: float) -> float:
        """Per-element uplink SNR ``P_u PL / sigma^2`` (linear)."""
        return self.p_u * pathloss(geom.wavelength, r0) / self.noise_power


@dataclass(frozen=True)
class Disk:
    """Disk in the UE plane, Cartesian centre."""

    x: float
    y: float
    radius: float

    @classmethod
    def around(cls, p: PolarPosition, radius: float) -> Disk:
        x, y = p.xy
        return cls(x, y, radius)

    def sample(self, rng: np.random.Generator, upper_half: bool = True) -> tuple[float, float]:
        """Uniform point; with ``upper_half`` the draw is repeated until ``y >= 0``."""
        if not self.radius > 0:
            raise DomainError(f"disk radius must be positive, got {self.radius!r}")
        for _ in range(10_000):
            rad = self.radius * math.sqrt(rng.random())
            ang = 2.0 * math.pi * rng.random()
            x, y = self.x + rad * math.cos(ang), self.y + rad * math.sin(ang)
            if not upper_half or y >= 0:
                return x, y
        raise DomainError("disk has no area in the half-plane y >= 0")


@dataclass(frozen=True)
class Scatterer:
    """Point reflector in the UE plane with a fixed reflection phase."""

    position: PolarPosition
    reflection_phase: float
    ue_distance: float

    def __post_init__(self):
        if not self.ue_distance > 0:
            raise DomainError("scatterer-to-UE distance must be positive")

    def moved_ue(self, ue: PolarPosition, floor: float = 1e-3) -> Scatterer:
        """Same reflector seen from a new UE position."""
        return Scatterer(self.position, self.reflection_phase,
                         max(self.position.distance_to(ue), floor))


@dataclass(frozen=True)
class ChannelInstance:
    h: np.ndarray
    los_component: np.ndarray
    pathloss_los: float
    scatterers: tuple = field(default_factory=tuple)


def los_channel(geom: DmaGeometry, p: PolarPosition, use_constant_pathloss: bool = True) -> np.ndarray:
    if use_constant_pathloss:
        amp = geom.wavelength / (4.0 * math.pi * float(geom.r0_from_r(p.r)))
        return amp * focusing_vector(geom, p, "exact")
    d = exact_distances(geom, p)
    return geom.wavelength / (4.0 * math.pi * d) * np.exp(-1j * geom.wavenumber * d)


def nlos_channel(geom: DmaGeometry, s: Scatterer) -> np.ndarray:
    """Single-bounce component through ``s`` (exact distances, per-element pathloss)."""
    lam = geom.wavelength
    g = (np.exp(-1j * (s.reflection_phase + geom.wavenumber * s.ue_distance))
         * lam / (4.0 * math.pi * s.ue_distance))
    x, y = s.position.xy
    d = distances_xy(geom, x, y)
    return g * lam / (4.0 * math.pi * d) * np.exp(-1j * geom.wavenumber * d)


def build_channel(geom: DmaGeometry, p: PolarPosition, scatterers=(),
                  use_constant_pathloss: bool = True) -> ChannelInstance:
    """Channel towards ``p`` through a given set of scatterers (UE distances refreshed)."""
    los = los_channel(geom, p, use_constant_pathloss)
    moved = tuple(s.moved_ue(p) for s in scatterers)
    h = los.copy()
    for s in moved:
        h += nlos_channel(geom, s)
    pl = pathloss(geom.wavelength, float(geom.r0_from_r(p.r)))
    return ChannelInstance(h, los, pl, moved)


def draw_scatterers(count: int, area: Disk, ue: PolarPosition, rng: np.random.Generator) -> tuple:
    if count < 0:
        raise DomainError("scatterer count must be non-negative")
    out = []
    for _ in range(count):
        x, y = area.sample(rng)
        pos = PolarPosition(max(math.hypot(x, y), 1e-6), math.atan2(y, x))
        w = math.pi - 2.0 * math.pi * rng.random()  # uniform on (-pi, pi]
        out.append(Scatterer(pos, w, max(pos.distance_to(ue), 1e-3)))
    return tuple(out)


def sample_channel(geom: DmaGeometry, p: PolarPosition, scatterer_count: int, area: Disk,
                   rng: np.random.Generator, use_constant_pathloss: bool = True) -> ChannelInstance:
    """Channel with ``scatterer_count`` reflectors drawn uniformly in ``area``."""
    if scatterer_count > 0 and not area.radius > 0:
        raise DomainError("scatterers need a disk with positive radius")
    return build_channel(geom, p, draw_scatterers(scatterer_count, area, p, rng),
                         use_constant_pathloss)


def complex_noise(rng: np.random.Generator, variance: float, size) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples."""
    s = math.sqrt(variance / 2.0)
    return s * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def downlink_rx(h: np.ndarray, hybrid: HybridConfig, noise_power: float,
                rng: np.random.Generator) -> complex:
    """Received downlink sample ``h^H Q_bar v s + n`` with unit symbol."""
    return inner(h, hybrid.transmit_vector()) + complex(complex_noise(rng, noise_power, None))


def uplink_rx(h: np.ndarray, analog: AnalogWeights, p_u: float, noise_power: float,
              rng: np.random.Generator, repeats: int = 1, exact_repeats: bool = False) -> np.ndarray:
    """Average of ``repeats`` combined pilot observations ``Q_bar^H (h sqrt(P_u) + n)``.

    Each microstrip feeds its own RF chain, so ``Q_bar^H n`` has independent
    entries with variance ``sigma^2 ||q_m||^2``.  By default the averaged noise
    is drawn directly from that distribution (variance divided by ``M``);
    ``exact_repeats`` draws element noise for every realization and combines it.
    """
    if repeats < 1:
        raise DomainError(f"repeats must be >= 1, got {repeats}")
    signal = analog.combine(h) * math.sqrt(p_u)
    n = h.size
    if exact_repeats:
        acc = np.zeros_like(signal)
        for _ in range(repeats):
            acc += analog.combine(complex_noise(rng, noise_power, n))
        return signal + acc / repeats
    chain_power = np.sum(np.abs(analog.weights) ** 2, axis=1)
    return signal + np.sqrt(chain_power) * complex_noise(rng, noise_power / repeats, signal.size)
