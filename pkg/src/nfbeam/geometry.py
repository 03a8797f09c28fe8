"""DMA layout, BS-UE distances and field-region boundaries.

Coordinate frame: the UE moves in the plane z = 0 at ``(r cos(phi), r sin(phi), 0)``
with ``phi`` in ``[0, pi]``.  Element ``n`` of microstrip ``i`` sits at
``(i_x d_m, 0, n d_e + z0)`` with ``i_x = i - (N_m - 1)/2``, so ``z0`` is the height
of the lowest element row above the UE plane.  Flat element vectors are ordered
microstrip-major: index ``i * N_e + n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np

from .errors import DomainError

Z0Term = Literal["squared", "printed"]


@dataclass(frozen=True)
class DmaGeometry:
    """Planar DMA: ``n_microstrips`` rows along x, ``n_elements_per_strip`` elements along z.

    Lengths in meters.  ``feed_offset`` shifts the element-to-port distance
    ``rho_{i,n} = feed_offset + n d_e`` used by the waveguide phase.
    """

    n_microstrips: int = 10
    n_elements_per_strip: int = 200
    d_e: float = 0.005
    d_m: float = 0.005
    wavelength: float = 0.01
    z0: float = 1.0
    dielectric_eps: float = 1.0
    feed_offset: float = 0.0

    def __post_init__(self):
        if self.n_microstrips < 1 or self.n_elements_per_strip < 1:
            raise DomainError("DMA needs at least one microstrip and one element")
        for name in ("d_e", "d_m", "wavelength", "dielectric_eps"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.feed_offset < 0:
            raise DomainError("feed_offset must be non-negative")

    @classmethod
    def reference(cls) -> DmaGeometry:
        """N_e=200, N_m=10, half-wavelength spacing at 30 GHz, 1 m mount height."""
        return cls()

    @property
    def n_total(self) -> int:
        return self.n_microstrips * self.n_elements_per_strip

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def waveguide_wavenumber(self) -> float:
        return self.wavenumber * math.sqrt(self.dielectric_eps)

    @property
    def length_z(self) -> float:
        """Extent along z, ``(N_e - 1) d_e``."""
        return (self.n_elements_per_strip - 1) * self.d_e

    @property
    def length_x(self) -> float:
        return (self.n_microstrips - 1) * self.d_m

    @property
    def aperture(self) -> float:
        """Diagonal aperture D."""
        return math.hypot(self.length_z, self.length_x)

    @property
    def center_height(self) -> float:
        """Height of the DMA centre above the UE plane."""
        return self.z0 + 0.5 * self.length_z

    @property
    def offset_ratio(self) -> float:
        """``b = z0 / ((N_e - 1) d_e)``, the offset ratio entering the range correlation."""
        return self.z0 / self.length_z if self.n_elements_per_strip > 1 else 0.0

    @cached_property
    def strip_offsets(self) -> np.ndarray:
        """``i_x`` for every microstrip, shape (N_m,)."""
        return np.arange(self.n_microstrips) - 0.5 * (self.n_microstrips - 1)

    @cached_property
    def element_xyz(self) -> np.ndarray:
        """Element positions, shape (N, 3), microstrip-major."""
        x = np.repeat(self.strip_offsets * self.d_m, self.n_elements_per_strip)
        z = np.tile(np.arange(self.n_elements_per_strip) * self.d_e + self.z0, self.n_microstrips)
        return np.column_stack([x, np.zeros_like(x), z])

    @cached_property
    def feed_distances(self) -> np.ndarray:
        """``rho_{i,n}``, flat shape (N,)."""
        rho = self.feed_offset + np.arange(self.n_elements_per_strip) * self.d_e
        return np.tile(rho, self.n_microstrips)

    @cached_property
    def waveguide_phasors(self) -> np.ndarray:
        """Diagonal of the microstrip propagation matrix, ``exp(-j beta rho)``."""
        return np.exp(-1j * self.waveguide_wavenumber * self.feed_distances)

    def r0_from_r(self, r):
        """Distance to the DMA centre for in-plane radius ``r``."""
        return np.hypot(r, self.center_height)

    def r_from_r0(self, r0):
        """Inverse of :meth:`r0_from_r`; returns 0 inside the mount-height cylinder."""
        r0 = np.asarray(r0, dtype=float)
        out = np.sqrt(np.maximum(r0 * r0 - self.center_height ** 2, 0.0))
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PolarPosition:
    """UE coordinate ``[r, phi]`` in the BS-anchored frame (r in meters, phi in radians)."""

    r: float
    phi: float

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"r must be positive, got {self.r!r}")
        if not -1e-12 <= self.phi <= math.pi + 1e-12:
            raise DomainError(f"phi must lie in [0, pi], got {self.phi!r}")

    @property
    def xy(self) -> tuple[float, float]:
        return self.r * math.cos(self.phi), self.r * math.sin(self.phi)

    def distance_to(self, other: PolarPosition) -> float:
        """Euclidean distance in the UE plane."""
        x0, y0 = self.xy
        x1, y1 = other.xy
        return math.hypot(x1 - x0, y1 - y0)


@dataclass(frozen=True)
class FieldRegions:
    """Characteristic distances of a geometry.

    ``r_fresnel``, ``r_rayleigh`` and ``r0_approx`` are distances from the DMA
    centre (r0); ``r_approx`` is the in-plane radius above which the
    second-order distance expansion keeps the phase error under pi/8.
    """

    r_fresnel: float
    r_rayleigh: float
    r_approx: float
    r0_approx: float
    l_z0: float
    aperture: float


def to_cartesian(p: PolarPosition) -> tuple[float, float]:
    return p.xy


def from_cartesian(x: float, y: float, r_floor: float = 1e-6) -> PolarPosition:
    """Polar position for an in-plane point; ``y < 0`` is mirrored (the array
    response is symmetric in y)."""
    r = max(math.hypot(x, y), r_floor)
    phi = math.atan2(abs(y), x)
    return PolarPosition(r, min(max(phi, 0.0), math.pi))


def _check_index(geom: DmaGeometry, i: int, n: int) -> None:
    if not 0 <= i < geom.n_microstrips:
        raise DomainError(f"microstrip index {i} outside 0..{geom.n_microstrips - 1}")
    if not 0 <= n < geom.n_elements_per_strip:
        raise DomainError(f"element index {n} outside 0..{geom.n_elements_per_strip - 1}")


def element_position(geom: DmaGeometry, i: int, n: int) -> np.ndarray:
    _check_index(geom, i, n)
    i_x = i - 0.5 * (geom.n_microstrips - 1)
    return np.array([i_x * geom.d_m, 0.0, n * geom.d_e + geom.z0])


def exact_distance(geom: DmaGeometry, i: int, n: int, p: PolarPosition) -> float:
    e = element_position(geom, i, n)
    x, y = p.xy
    return math.sqrt((x - e[0]) ** 2 + y * y + e[2] ** 2)


def distances_xy(geom: DmaGeometry, x, y) -> np.ndarray:
    """Exact element distances for in-plane point(s); shape ``(..., N)``."""
    x = np.asarray(x, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    e = geom.element_xyz
    return np.sqrt((x - e[:, 0]) ** 2 + y * y + e[:, 2] ** 2)


def exact_distances(geom: DmaGeometry, p: PolarPosition) -> np.ndarray:
    """Exact distances from every element to ``p``, shape (N,)."""
    x, y = p.xy
    return distances_xy(geom, x, y)


def _fresnel_terms(geom, i_x, n, r, phi, z0_term: Z0Term):
    c = math.cos(phi)
    const = geom.z0 ** 2 if z0_term == "squared" else geom.z0
    return (r
            + (i_x * geom.d_m) ** 2 * (1.0 - c * c) / (2.0 * r)
            - c * i_x * geom.d_m
            + (n * geom.d_e) ** 2 / (2.0 * r)
            + geom.z0 * n * geom.d_e / r
            + const / (2.0 * r))


def fresnel_distance(geom: DmaGeometry, i: int, n: int, p: PolarPosition,
                     z0_term: Z0Term = "squared") -> float:
    """Second-order (Fresnel) expansion of :func:`exact_distance`.

    The constant term is ``z0**2/(2r)`` (the expansion of the exact norm); pass
    ``z0_term="printed"`` for the ``z0/(2r)`` variant.  Both coincide at z0 = 1.
    """
    _check_index(geom, i, n)
    i_x = i - 0.5 * (geom.n_microstrips - 1)
    return float(_fresnel_terms(geom, i_x, n, p.r, p.phi, z0_term))


def fresnel_distances(geom: DmaGeometry, p: PolarPosition,
                      z0_term: Z0Term = "squared") -> np.ndarray:
    i_x = np.repeat(geom.strip_offsets, geom.n_elements_per_strip)
    n = np.tile(np.arange(geom.n_elements_per_strip, dtype=float), geom.n_microstrips)
    return _fresnel_terms(geom, i_x, n, p.r, p.phi, z0_term)


def field_regions(geom: DmaGeometry) -> FieldRegions:
    lam = geom.wavelength
    d = geom.aperture
    l_z0 = math.sqrt((geom.length_z + geom.z0) ** 2 + 0.25 * geom.length_x ** 2)
    r_appr = (2.0 * l_z0 ** 4 / lam) ** (1.0 / 3.0)
    return FieldRegions(
        r_fresnel=0.62 * math.sqrt(d ** 3 / lam),
        r_rayleigh=2.0 * d * d / lam,
        r_approx=r_appr,
        r0_approx=math.hypot(r_appr, geom.center_height),
        l_z0=l_z0,
        aperture=d,
    )
