"""Closed-form beam correlation, focus windows and coherence-time analytics.

Relative gains returned by the ``corr_*`` functions are always power ratios
``|a^H(p) a(p_hat)|^2 / N^2``.  The *gain convention* only decides how a
percentage threshold ``kappa`` maps onto the amplitude functions: with the
default ``"power"`` convention the window edge is where the power ratio equals
``0.01 kappa``; with ``"amplitude"`` it is where the amplitude ratio does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import fresnel

from .errors import DomainError
from .geometry import DmaGeometry, PolarPosition, field_regions, from_cartesian

Convention = Literal["power", "amplitude"]

# Angles closer than this to 0 or pi use the exact cosine inversion for the angular width.
ENDPOINT_MARGIN = 0.1
_SCAN_START = 1e-2  # the range profile rounds to 1 + ulp near zero, so the lobe scan starts just above it
_SCAN_STOP = 40.0
_SCAN_STEP = 1e-3


def fresnel_cs(x):
    """Normalized Fresnel integrals ``(C(x), S(x))``; odd in ``x``."""
    s, c = fresnel(x)
    if np.ndim(s) == 0:
        return float(c), float(s)
    return c, s


def fresnel_ratio(x):
    """``(C(x) + j S(x)) / x``, continuously extended by 1 at the origin."""
    x = np.asarray(x, dtype=float)
    s, c = fresnel(x)
    safe = np.where(x == 0.0, 1.0, x)
    out = np.where(x == 0.0, 1.0 + 0j, (c + 1j * s) / safe)
    return complex(out) if out.ndim == 0 else out


def fresnel_ratio_taylor(x):
    """Leading-order small-argument form of ``|fresnel_ratio(x)|``."""
    x = np.asarray(x, dtype=float)
    return 1.0 - math.pi ** 2 / 90.0 * x ** 4


def range_profile(x, b: float):
    """Normalized range correlation amplitude for offset ratio ``b``.

    ``|F(x (1 + b)) - F(x b)| / x`` with ``F = C + j S``; equals 1 at ``x = 0``
    and is clipped to ``[0, 1]`` against rounding.
    """
    x = np.abs(np.asarray(x, dtype=float))
    s1, c1 = fresnel(x * (1.0 + b))
    s0, c0 = fresnel(x * b)
    small = x < 1e-8
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0, np.abs((c1 - c0) + 1j * (s1 - s0)) / safe)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def array_factor(x, n_m: int):
    """``|sin x| / |N_m sin(x / N_m)|`` with value 1 at ``x = 0``."""
    x = np.asarray(x, dtype=float)
    den = n_m * np.sin(x / n_m)
    small = np.abs(x) < 1e-12
    out = np.where(small, 1.0, np.abs(np.sin(x)) / np.abs(np.where(small, 1.0, den)))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def sinc_abs(x):
    x = np.asarray(x, dtype=float)
    out = np.abs(np.sinc(x / math.pi))
    return float(out) if out.ndim == 0 else out


def threshold_amplitude(kappa: float, convention: Convention = "power") -> float:
    """Amplitude level corresponding to a ``kappa`` percent gain threshold."""
    if not 0 < kappa < 100:
        raise DomainError(f"kappa must lie in (0, 100), got {kappa!r}")
    if convention == "power":
        return math.sqrt(0.01 * kappa)
    if convention == "amplitude":
        return 0.01 * kappa
    raise DomainError(f"unknown gain convention {convention!r}")


@lru_cache(maxsize=64)
def first_minimum(b: float) -> tuple[float, float]:
    """Location and value of the first local minimum of the range profile for offset ratio ``b``."""
    xs = np.arange(_SCAN_START, _SCAN_STOP, _SCAN_STEP)
    v = range_profile(xs, b)
    rising = np.nonzero(np.diff(v) > 0)[0]
    if rising.size == 0:
        return float(xs[-1]), float(v[-1])
    k = int(rising[0])
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, xs.size - 1)]
    res = minimize_scalar(lambda t: range_profile(t, b), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x), float(res.fun)


@lru_cache(maxsize=256)
def solve_a_kappa(kappa: float, b: float, convention: Convention = "power") -> float:
    """Smallest ``x > 0`` where the range profile falls to the ``kappa`` threshold.

    The root is searched on the main lobe ``(0, x_min1]``; a threshold below the
    first minimum has no main-lobe root and raises :class:`DomainError`.
    """
    t = threshold_amplitude(kappa, convention)
    x_min, i_min = first_minimum(b)
    if i_min >= t:
        raise DomainError(f"kappa={kappa} is below the main-lobe floor of the range profile "
                          f"({'power' if convention == 'power' else 'amplitude'} level {i_min:.4g})")
    return float(brentq(lambda x: range_profile(x, b) - t, 1e-12, x_min, xtol=1e-13, rtol=1e-15))


@lru_cache(maxsize=256)
def solve_zeta_kappa(kappa: float, convention: Convention = "power") -> float:
    """First positive root of ``|sin z / z| = threshold`` on ``(0, pi]``."""
    t = threshold_amplitude(kappa, convention)
    return float(brentq(lambda z: sinc_abs(z) - t, 1e-12, math.pi, xtol=1e-13, rtol=1e-15))


@lru_cache(maxsize=16)
def quadratic_phase_threshold(level: float = 0.99) -> float:
    """Argument ``w`` where ``|fresnel_ratio(w)|^2`` first drops to ``level``."""
    return float(brentq(lambda w: abs(fresnel_ratio(w)) ** 2 - level, 1e-9, 1.5, xtol=1e-13))


@dataclass(frozen=True)
class FocusWindow:
    """Radial and angular extents within which relative gain stays above a threshold."""

    delta_r_minus: float
    delta_r_plus: float  # math.inf beyond the limiting range
    delta_phi: float
    r_lim: float

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.delta_r_plus)


@dataclass(frozen=True)
class WorstDirection:
    d_min: float
    p_min: PolarPosition
    gain: float


@dataclass(frozen=True)
class BeamAnalytics:
    """Closed-form analytics bound to one geometry.

    ``use_k_correction`` keeps the small lateral-aperture factor in the range
    correlation; without it the squared range profile is used alone.
    """

    geom: DmaGeometry
    convention: Convention = "power"
    use_k_correction: bool = True
    b: float = field(default=None)  # defaults to the geometry's offset ratio

    def __post_init__(self):
        if self.b is None:
            object.__setattr__(self, "b", self.geom.offset_ratio)
        threshold_amplitude(50, self.convention)  # validates the convention

    # -- correlation functions -------------------------------------------------
    def range_argument(self, delta_r, r):
        """Normalized range-mismatch argument for a signed offset ``delta_r``."""
        g = self.geom
        delta_r = np.asarray(delta_r, dtype=float)
        r = np.asarray(r, dtype=float)
        out = np.sqrt(2.0 * np.abs(delta_r) / (r * r + r * delta_r)) * g.length_z / math.sqrt(g.wavelength)
        return float(out) if out.ndim == 0 else out

    def angle_argument(self, delta_phi, phi):
        g = self.geom
        out = (g.n_microstrips * math.pi * g.d_m / g.wavelength
               * (np.cos(phi) - np.cos(np.asarray(phi) + np.asarray(delta_phi))))
        return float(out) if np.ndim(out) == 0 else out

    def range_amplitude(self, x):
        return range_profile(x, self.b)

    def corrected_range_amplitude(self, x, phi):
        g = self.geom
        x = np.asarray(x, dtype=float)
        lateral = x * g.length_x * np.abs(np.sin(phi)) / (2.0 * g.length_z)
        out = np.clip(self.range_amplitude(x) * (1.0 - math.pi ** 2 / 90.0 * lateral ** 4), 0.0, 1.0)
        return float(out) if np.ndim(out) == 0 else out

    def angle_amplitude(self, x):
        return array_factor(x, self.geom.n_microstrips)

    def corr_range(self, delta_r, r, phi):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0) or np.any(r + np.asarray(delta_r) <= 0):
            raise DomainError("range correlation needs r > 0 and r + delta_r > 0")
        x = self.range_argument(delta_r, r)
        amp = self.corrected_range_amplitude(x, phi) if self.use_k_correction else self.range_amplitude(x)
        return amp ** 2

    def corr_angle(self, delta_phi, r, phi):
        return self.angle_amplitude(self.angle_argument(delta_phi, phi)) ** 2

    def corr_joint(self, delta_r, delta_phi, r, phi):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0) or np.any(r + np.asarray(delta_r) <= 0):
            raise DomainError("joint correlation needs r > 0 and r + delta_r > 0")
        return (self.range_amplitude(self.range_argument(delta_r, r)) * self.angle_amplitude(self.angle_argument(delta_phi, phi))) ** 2

    # -- thresholds ------------------------------------------------------------
    def a_kappa(self, kappa: float) -> float:
        return solve_a_kappa(float(kappa), float(self.b), self.convention)

    def zeta_kappa(self, kappa: float) -> float:
        return solve_zeta_kappa(float(kappa), self.convention)

    def r_lim(self, kappa: float) -> float:
        """In-plane range beyond which the outward depth of focus is unbounded."""
        g = self.geom
        return 2.0 * g.length_z ** 2 / (g.wavelength * self.a_kappa(kappa) ** 2)

    def r0_lim(self, kappa: float) -> float:
        return float(self.geom.r0_from_r(self.r_lim(kappa)))

    def threshold(self, kappa: float) -> float:
        return threshold_amplitude(kappa, self.convention)

    # -- windows ---------------------------------------------------------------
    def delta_r_minus(self, r: float, kappa: float) -> float:
        big = self.r_lim(kappa)
        return r * r / (big + r)

    def delta_r_plus(self, r: float, kappa: float) -> float:
        big = self.r_lim(kappa)
        return r * r / (big - r) if big > r else math.inf

    def delta_phi(self, phi: float, kappa: float) -> float:
        """Angular half-width; exact cosine inversion near the endpoints or for wide beams."""
        g = self.geom
        c = self.zeta_kappa(kappa) * g.wavelength / (math.pi * g.n_microstrips * g.d_m)
        s = abs(math.sin(phi))
        near_end = phi < ENDPOINT_MARGIN or phi > math.pi - ENDPOINT_MARGIN
        if not near_end:
            width = c / s
            if width <= math.pi / 4:
                return width
        cos_phi = math.cos(phi)
        sides = []
        if cos_phi - c >= -1.0:
            sides.append(math.acos(cos_phi - c) - phi)
        if cos_phi + c <= 1.0:
            sides.append(phi - math.acos(cos_phi + c))
        return min(sides) if sides else math.pi

    def focus_window(self, r: float, phi: float, kappa: float) -> FocusWindow:
        if not r > 0:
            raise DomainError(f"r must be positive, got {r!r}")
        return FocusWindow(self.delta_r_minus(r, kappa), self.delta_r_plus(r, kappa),
                           self.delta_phi(phi, kappa), self.r_lim(kappa))

    # -- displacement analysis -------------------------------------------------
    def _arc_angle(self, d, r, c):
        arg = 1.0 - (c * c - d * d) / (2.0 * r * r + 2.0 * r * d)
        return np.arccos(np.clip(arg, -1.0, 1.0))

    def _movement_amplitude(self, d, r, phi, c):
        """Worst of the two angular signs of the range-times-angle amplitude along a move of length ``c``."""
        d = np.asarray(d, dtype=float)
        y = self._arc_angle(d, r, c)
        amp_r = self.range_amplitude(self.range_argument(d, r))
        amp_phi = np.minimum(self.angle_amplitude(self.angle_argument(y, phi)), self.angle_amplitude(self.angle_argument(-y, phi)))
        return amp_r * amp_phi

    def worst_direction(self, r: float, phi: float, c: float, scan_points: int = 801) -> WorstDirection:
        """Displacement of length ``c`` that degrades the closed-form gain the most."""
        if not 0 < c < r:
            raise DomainError(f"worst-direction analysis needs 0 < c < r, got c={c!r}, r={r!r}")
        ds = np.linspace(-c, c, 2 * scan_points - 1)
        m = self._movement_amplitude(ds, r, phi, c)
        k = int(np.argmin(m))
        candidates = [(float(m[k]), float(ds[k]))]
        lo, hi = ds[max(k - 1, 0)], ds[min(k + 1, ds.size - 1)]
        if hi > lo:
            res = minimize_scalar(lambda t: float(self._movement_amplitude(t, r, phi, c)),
                                  bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * r})
            candidates.append((float(res.fun), float(res.x)))
        for d in (-c, 0.0, c):
            candidates.append((float(self._movement_amplitude(d, r, phi, c)), d))
        amp, d_min = min(candidates)
        y = float(self._arc_angle(d_min, r, c))
        sign = 1.0 if self.angle_amplitude(self.angle_argument(y, phi)) <= self.angle_amplitude(self.angle_argument(-y, phi)) else -1.0
        rn, pn = r + d_min, phi + sign * y
        p_min = from_cartesian(rn * math.cos(pn), rn * math.sin(pn))
        return WorstDirection(d_min, p_min, amp * amp)

    def chord_displacement(self, r: float, phi: float, kappa: float) -> float:
        """Shorter of the inward depth of focus and the chord spanned by the angular width."""
        return min(self.delta_r_minus(r, kappa), abs(2.0 * r * math.sin(0.5 * self.delta_phi(phi, kappa))))

    def segment_amplitude(self, p: PolarPosition, q: PolarPosition) -> float:
        """Closed-form correlation amplitude between focus ``p`` and UE position ``q``."""
        dr = q.r - p.r
        return float(self.range_amplitude(self.range_argument(dr, p.r)) * self.angle_amplitude(self.angle_argument(q.phi - p.phi, p.phi)))

    def min_displacement(self, r: float, phi: float, kappa: float, exact: bool = False) -> float:
        """Smallest movement that can bring the gain down to the ``kappa`` threshold.

        The default is the chord/depth minimum.  ``exact`` additionally locates
        the worst direction for that length and bisects along it when the
        closed-form gain there is already below the threshold.
        """
        if not r > 0:
            raise DomainError(f"r must be positive, got {r!r}")
        c = self.chord_displacement(r, phi, kappa)
        if not exact or c >= r:
            return c
        t = self.threshold(kappa)
        p = PolarPosition(r, phi)
        wd = self.worst_direction(r, phi, c)
        x0, y0 = p.xy
        x1, y1 = wd.p_min.xy

        def amp_at(s):
            return self.segment_amplitude(p, from_cartesian(x0 + s * (x1 - x0), y0 + s * (y1 - y0)))

        if amp_at(1.0) >= t:
            return c
        s = brentq(lambda s: amp_at(s) - t, 1e-12, 1.0, xtol=1e-12)
        return min(c, s * c)

    # -- grid sizing -----------------------------------------------------------
    def eta(self, kappa: float, delta: float) -> float:
        return (self.a_kappa(kappa) / self.a_kappa(delta)) ** 2

    def radial_sample_bound(self, r: float, kappa: float, delta: float) -> float:
        """Upper bound on the number of radial samples of a grid of radius ``c_kappa``."""
        if not delta > kappa:
            raise DomainError("resolution delta must exceed kappa")
        eta = self.eta(kappa, delta)
        r_rd = field_regions(self.geom).r_rayleigh
        return eta + r * self.a_kappa(kappa) ** 2 / (2.0 * r_rd) * (eta - 1.0) + 1.0


def coherence_time(c_min: float, u: float) -> float:
    """Time for a user moving at ``u`` to cover ``c_min``."""
    if not u > 0:
        raise DomainError(f"speed must be positive, got {u!r}")
    return c_min / u


def angular_validity_margin(geom: DmaGeometry, phi: float, w_max: float = 0.46) -> tuple[float, float]:
    """Left and right sides of the lateral-aperture validity inequality.

    The quadratic lateral phase can be dropped from the angular correlation while
    the left side stays below the right side.
    """
    d = geom.aperture
    lhs = geom.length_x ** 2 / (geom.n_microstrips * geom.d_m * d * math.sqrt(d))
    # worst case inside the main lobe (zeta = pi) at the Fresnel distance
    rhs_const = w_max ** 2 * 0.62
    cos_phi = abs(math.cos(phi))
    rhs = math.inf if cos_phi == 0 else rhs_const / (math.sqrt(geom.wavelength) * cos_phi)
    return lhs, rhs
