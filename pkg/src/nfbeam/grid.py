"""Non-uniform polar sampling grids for position search.

A grid is a list of rings (constant in-plane radius) each carrying its own
ordered list of azimuth samples.  Spacing follows the focus windows: the next
sample sits two half-widths away, so neighbouring decision areas touch.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .analytics import BeamAnalytics
from .errors import DomainError
from .geometry import PolarPosition, field_regions

PruneMode = Literal["ring", "band", "none"]
AngularRule = Literal["null", "sine"]


@dataclass(frozen=True)
class CoordinateGrid:
    """Output of a grid construction.

    ``extents[k]`` holds ``(delta_r_minus, delta_r_plus, delta_phi_per_angle)``
    for ring ``k`` at resolution ``delta_percent``.
    """

    radial_samples: tuple
    per_ring_angles: tuple
    extents: tuple
    center: PolarPosition | None
    radius: float
    delta_percent: float
    flags: dict = field(default_factory=dict)

    @property
    def n_rings(self) -> int:
        return len(self.radial_samples)

    @property
    def size(self) -> int:
        return sum(len(a) for a in self.per_ring_angles)

    def samples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flattened ``(r, phi, ring_index)`` arrays in ring-major order."""
        r = np.concatenate([np.full(len(a), rs) for rs, a in zip(self.radial_samples, self.per_ring_angles)])
        phi = np.concatenate([np.asarray(a, dtype=float) for a in self.per_ring_angles])
        ring = np.concatenate([np.full(len(a), k) for k, a in enumerate(self.per_ring_angles)])
        return r, phi, ring

    def contains(self, p: PolarPosition) -> bool:
        for rs, angles in zip(self.radial_samples, self.per_ring_angles):
            if rs == p.r and p.phi in angles:
                return True
        return False

    def to_json(self) -> dict:
        def num(x):
            return None if math.isinf(x) else float(x)

        rings = []
        for rs, angles, (dm, dp, dphi) in zip(self.radial_samples, self.per_ring_angles, self.extents):
            rings.append({
                "r": float(rs),
                "delta_r_minus": num(dm),
                "delta_r_plus": num(dp),
                "phi": [float(a) for a in angles],
                "delta_phi": [float(w) for w in dphi],
            })
        return {
            "center": None if self.center is None else {"r": self.center.r, "phi": self.center.phi},
            "radius": num(self.radius),
            "delta_percent": self.delta_percent,
            "flags": {k: (num(v) if isinstance(v, float) else v) for k, v in self.flags.items()},
            "rings": rings,
        }


def _acos_clamped(x: float) -> float:
    return math.acos(min(1.0, max(-1.0, x)))


def _arc_halfwidth(r: float, r_hat: float, c_hat: float) -> float:
    """Half-angle of the disk ``C(p_hat, c_hat)`` seen along the circle of radius ``r``."""
    if r <= 0:
        return math.pi
    return _acos_clamped((r * r + r_hat * r_hat - c_hat * c_hat) / (2.0 * r * r_hat))


def _band_halfwidth(lo: float, hi: float, r_hat: float, c_hat: float) -> float:
    """Widest disk arc over radii in ``[lo, hi]``."""
    lo = max(lo, r_hat - c_hat)
    hi = min(hi, r_hat + c_hat)
    if hi < lo:
        return 0.0
    cands = [lo, hi]
    tangent = math.sqrt(max(r_hat * r_hat - c_hat * c_hat, 0.0))
    if lo < tangent < hi:
        cands.append(tangent)
    return max(_arc_halfwidth(r, r_hat, c_hat) for r in cands)


def radial_floor(analytics: BeamAnalytics, eps_r: float = 1e-3) -> float:
    """Smallest in-plane radius kept in a grid: distance to the centre at least r_FD."""
    reg = field_regions(analytics.geom)
    return max(eps_r, float(analytics.geom.r_from_r0(reg.r_fresnel)))


def angular_samples(analytics: BeamAnalytics, start: float, stop: float, delta: float) -> list[float]:
    """Double-step angular recursion from ``start`` until a cell reaches ``stop``."""
    width = analytics.delta_phi
    phis = [start]
    while phis[-1] + width(phis[-1], delta) <= stop and phis[-1] < math.pi:
        tmp = phis[-1] + width(phis[-1], delta)
        nxt = min(tmp + width(min(tmp, math.pi), delta), math.pi)
        if nxt <= phis[-1]:
            break
        phis.append(nxt)
    return phis


def radial_samples(analytics: BeamAnalytics, start: float, stop: float, delta: float,
                   max_rings: int = 100_000) -> tuple[list[float], bool]:
    """Double-step radial recursion; returns the samples and whether the last
    one sits where the outward depth of focus is unbounded."""
    plus = analytics.delta_r_plus
    rs = [start]
    unbounded = math.isinf(plus(start, delta))
    while not unbounded and rs[-1] + plus(rs[-1], delta) <= stop:
        tmp = rs[-1] + plus(rs[-1], delta)
        step = plus(tmp, delta)
        if math.isinf(step):
            rs.append(tmp)
            unbounded = True
            break
        rs.append(tmp + step)
        unbounded = math.isinf(plus(rs[-1], delta))
        if len(rs) > max_rings:
            raise DomainError("radial recursion did not terminate")
    return rs, unbounded


def _extents(analytics, r, angles, delta):
    return (analytics.delta_r_minus(r, delta), analytics.delta_r_plus(r, delta),
            tuple(analytics.delta_phi(a, delta) for a in angles))


def build_grid(analytics: BeamAnalytics, center: PolarPosition, c_hat: float, delta_percent: float,
               prune: PruneMode = "ring", eps_r: float = 1e-3) -> CoordinateGrid:
    """Dynamic non-uniform grid over the disk of radius ``c_hat`` around ``center``.

    ``prune`` selects how each ring's angle list is restricted: ``"ring"`` keeps
    angles whose cell meets the disk arc at the ring radius itself, ``"band"``
    uses the widest arc across the ring's radial decision band (needed for full
    coverage next to the disk's inner and outer edges), ``"none"`` keeps all.
    """
    if not c_hat > 0:
        raise DomainError(f"search radius must be positive, got {c_hat!r}")
    if not 0 < delta_percent < 100:
        raise DomainError(f"resolution must lie in (0, 100), got {delta_percent!r}")
    r_hat, phi_hat = center.r, center.phi
    flags: dict = {}
    if c_hat >= 2.0 * r_hat:
        warnings.warn("search disk reaches past the origin; angular span clamped to pi", stacklevel=2)
        flags["arc_clamped"] = True
    d_phi_max = _acos_clamped((2.0 * r_hat ** 2 - c_hat ** 2) / (2.0 * r_hat ** 2))
    if c_hat >= r_hat:
        d_phi_max = math.pi
    lo_phi = max(phi_hat - d_phi_max, 0.0)
    hi_phi = min(phi_hat + d_phi_max, math.pi)
    phis = angular_samples(analytics, lo_phi, hi_phi, delta_percent)

    floor = radial_floor(analytics, eps_r)
    start = r_hat - c_hat
    if start < floor:
        flags["floor_clamped"] = True
        flags["floor_r"] = floor
        start = floor
    rs, unbounded = radial_samples(analytics, start, max(r_hat + c_hat, start), delta_percent)
    if unbounded:
        flags["unbounded_depth"] = True

    widths = np.array([analytics.delta_phi(a, delta_percent) for a in phis])
    phi_arr = np.array(phis)
    rings, extents = [], []
    for rs_k in rs:
        if prune == "none":
            keep = np.ones(phi_arr.size, dtype=bool)
        else:
            if prune == "ring":
                half = _arc_halfwidth(rs_k, r_hat, c_hat)
            else:
                dm = analytics.delta_r_minus(rs_k, delta_percent)
                dp = analytics.delta_r_plus(rs_k, delta_percent)
                half = _band_halfwidth(rs_k - dm, rs_k + dp, r_hat, c_hat)
            if c_hat >= r_hat:
                half = math.pi
            keep = (phi_arr + widths >= phi_hat - half) & (phi_arr - widths <= phi_hat + half)
            if not keep.any():
                keep[int(np.argmin(np.abs(phi_arr - phi_hat)))] = True
        angles = tuple(float(a) for a in phi_arr[keep])
        rings.append(angles)
        extents.append(_extents(analytics, rs_k, angles, delta_percent))
    return CoordinateGrid(tuple(rs), tuple(rings), tuple(extents), center, c_hat, delta_percent, flags)


def cold_start_angles(analytics: BeamAnalytics, rule: AngularRule = "null") -> list[float]:
    """Whole-range azimuth samples with nearly orthogonal neighbours.

    ``"null"`` steps ``cos(phi)`` by ``lambda / (N_m d_m)`` (consecutive nulls of
    the array factor).  ``"sine"`` uses the small-angle step
    ``lambda / (N_m d_m sin(phi))`` away from the endpoints and falls back to the
    cosine step within the endpoint margin.
    """
    g = analytics.geom
    step = g.wavelength / (g.n_microstrips * g.d_m)
    phis = [0.0]
    while True:
        cur = phis[-1]
        if rule == "sine" and 0.1 < cur < math.pi - 0.1:
            nxt = cur + step / math.sin(cur)
        else:
            arg = math.cos(cur) - step
            nxt = math.acos(arg) if arg >= -1.0 else math.pi + 1.0
        if nxt >= math.pi - 1e-9:
            break
        phis.append(nxt)
    if math.pi - phis[-1] > 1e-9:
        phis.append(math.pi)
    return phis


def cold_start_grid(analytics: BeamAnalytics, r0_max: float = math.inf, delta_bar: float = 50.0,
                    rule: AngularRule = "null") -> CoordinateGrid:
    """Grid for a search without any prior: all azimuths, ranges from r_FD outwards."""
    g = analytics.geom
    if r0_max < field_regions(g).r_fresnel:
        raise DomainError("r0_max must be at least the Fresnel distance")
    angles = tuple(cold_start_angles(analytics, rule))
    start = radial_floor(analytics)
    stop = math.inf if math.isinf(r0_max) else float(g.r_from_r0(r0_max))
    rs, unbounded = radial_samples(analytics, start, stop, delta_bar)
    extents = tuple(_extents(analytics, r, angles, delta_bar) for r in rs)
    flags = {"unbounded_depth": unbounded, "rule": rule}
    return CoordinateGrid(tuple(rs), tuple(angles for _ in rs), extents, None, math.inf, delta_bar, flags)


def refine_region(analytics: BeamAnalytics, coarse: PolarPosition, delta_bar: float,
                  delta_prime: float) -> CoordinateGrid:
    """Higher-resolution grid over the coarse estimate's decision cell (no arc pruning)."""
    if not delta_prime >= delta_bar:
        raise DomainError("refinement resolution must not be below the coarse one")
    win = analytics.focus_window(coarse.r, coarse.phi, delta_bar)
    flags: dict = {}
    r_lo = max(coarse.r - win.delta_r_minus, radial_floor(analytics))
    if win.unbounded:
        r_hi = max(analytics.r_lim(delta_prime), coarse.r)
        flags["truncated"] = True
    else:
        r_hi = coarse.r + win.delta_r_plus
    lo_phi = max(coarse.phi - win.delta_phi, 0.0)
    hi_phi = min(coarse.phi + win.delta_phi, math.pi)
    angles = tuple(angular_samples(analytics, lo_phi, hi_phi, delta_prime))
    rs, unbounded = radial_samples(analytics, r_lo, r_hi, delta_prime)
    if unbounded:
        flags["unbounded_depth"] = True
    extents = tuple(_extents(analytics, r, angles, delta_prime) for r in rs)
    radius = 0.5 * (r_hi - r_lo)
    return CoordinateGrid(tuple(rs), tuple(angles for _ in rs), extents, coarse, radius, delta_prime, flags)


def uniform_grid(analytics: BeamAnalytics, center: PolarPosition, c_hat: float,
                 dr: float, dphi: float, eps_r: float = 1e-3) -> CoordinateGrid:
    """Fixed-resolution grid: rings every ``2 dr`` and azimuths every ``2 dphi``,
    aligned on ``center`` and pruned to the disk band of each ring."""
    if not (dr > 0 and dphi > 0 and c_hat > 0):
        raise DomainError("uniform grid needs positive spacings and radius")
    r_hat, phi_hat = center.r, center.phi
    floor = radial_floor(analytics, eps_r)
    k_lo = -math.floor(c_hat / (2.0 * dr) + 1e-12)
    k_hi = math.floor(c_hat / (2.0 * dr) + 1e-12)
    rs = [r_hat + 2.0 * dr * k for k in range(k_lo, k_hi + 1) if r_hat + 2.0 * dr * k >= floor]
    flags: dict = {}
    if not rs:
        rs = [max(r_hat, floor)]
        flags["floor_clamped"] = True
    j_max = math.ceil(math.pi / (2.0 * dphi)) + 1
    all_phi = np.array([phi_hat + 2.0 * dphi * j for j in range(-j_max, j_max + 1)])
    all_phi = all_phi[(all_phi >= 0.0) & (all_phi <= math.pi)]
    rings, extents = [], []
    for rs_k in rs:
        half = math.pi if c_hat >= r_hat else _band_halfwidth(rs_k - dr, rs_k + dr, r_hat, c_hat)
        keep = (all_phi + dphi >= phi_hat - half) & (all_phi - dphi <= phi_hat + half)
        if not keep.any():
            keep[int(np.argmin(np.abs(all_phi - phi_hat)))] = True
        angles = tuple(float(a) for a in all_phi[keep])
        rings.append(angles)
        extents.append((dr, dr, tuple(dphi for _ in angles)))
    return CoordinateGrid(tuple(rs), tuple(rings), tuple(extents), center, c_hat, math.nan,
                          {**flags, "uniform": True})
