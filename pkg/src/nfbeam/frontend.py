"""Analog DMA layer and hybrid beamformers.

Each metamaterial element applies a Lorentzian-constrained weight
``q = 0.5 (j + exp(j theta))`` after the microstrip propagation phase
``exp(-j beta rho)``.  The effective analog matrix ``Q_bar = P Q`` is block
sparse (one nonzero per row, in the column of the row's microstrip), so it is
stored as its nonzeros, an ``(N_m, N_e)`` array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError
from .geometry import DmaGeometry, PolarPosition, exact_distances, fresnel_distances

DistanceModel = Literal["exact", "fresnel"]


def focusing_vector(geom: DmaGeometry, p: PolarPosition,
                    model: DistanceModel = "exact") -> np.ndarray:
    """Unit-modulus phase profile ``exp(-j k r_{i,n})``, flat length N."""
    if model == "exact":
        d = exact_distances(geom, p)
    elif model == "fresnel":
        d = fresnel_distances(geom, p)
    else:
        raise DomainError(f"unknown distance model {model!r}")
    return np.exp(-1j * geom.wavenumber * d)


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """``a^H b``; numpy's sum is pairwise, which bounds rounding over long vectors."""
    return complex(np.sum(np.conj(a) * b))


def relative_gain(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized squared correlation ``|a^H b|^2 / N^2`` of two focusing vectors."""
    return abs(inner(a, b)) ** 2 / a.size ** 2


def lorentzian_weight(theta):
    """Point on the Lorentzian circle, ``0.5 (j + exp(j theta))``."""
    return 0.5 * (1j + np.exp(1j * np.asarray(theta, dtype=float)))


@dataclass(frozen=True)
class AnalogWeights:
    """Nonzeros of ``Q_bar`` (propagation phase included), shape ``(N_m, N_e)``."""

    weights: np.ndarray

    def combine(self, h: np.ndarray) -> np.ndarray:
        """``Q_bar^H h`` for a flat length-N vector; returns length N_m."""
        hm = np.asarray(h).reshape(self.weights.shape)
        return np.sum(np.conj(self.weights) * hm, axis=1)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """``Q_bar v`` for a length-N_m digital vector; returns flat length N."""
        return (self.weights * np.asarray(v)[:, None]).ravel()

    def matrix(self) -> np.ndarray:
        """Dense N x N_m matrix, for inspection and small tests."""
        n_m, n_e = self.weights.shape
        out = np.zeros((n_m * n_e, n_m), dtype=complex)
        for i in range(n_m):
            out[i * n_e:(i + 1) * n_e, i] = self.weights[i]
        return out

    def element_weights(self, geom: DmaGeometry) -> np.ndarray:
        """Undo the propagation phase to recover the metamaterial weights q."""
        return self.weights / geom.waveguide_phasors.reshape(self.weights.shape)


@dataclass(frozen=True)
class HybridConfig:
    analog: AnalogWeights
    digital: np.ndarray
    tx_power: float

    def transmit_vector(self) -> np.ndarray:
        return self.analog.apply(self.digital)

    def radiated_power(self) -> float:
        x = self.transmit_vector()
        return float(np.real(np.vdot(x, x)))

    def gain(self, a: np.ndarray) -> float:
        """Beamforming gain ``|a^H Q_bar v|^2`` towards focusing vector ``a``."""
        return abs(inner(a, self.transmit_vector())) ** 2


def optimal_precoder(geom: DmaGeometry, p: PolarPosition, tx_power: float,
                     model: DistanceModel = "fresnel") -> HybridConfig:
    """Phase-aligned precoder focusing on ``p``.

    Weights ``q = 0.5 (j + exp(j(angle(a) + beta rho)))`` with an all-equal
    digital vector ``sqrt(2 P_b / N)``.  The residual cross term can push the
    radiated power marginally above ``P_b``; the digital vector is then scaled
    down so the power constraint holds exactly.
    """
    if not tx_power > 0:
        raise DomainError(f"transmit power must be positive, got {tx_power!r}")
    a = focusing_vector(geom, p, model)
    prop = geom.waveguide_phasors
    beta_rho = geom.waveguide_wavenumber * geom.feed_distances
    q = lorentzian_weight(np.angle(a) + beta_rho)
    shape = (geom.n_microstrips, geom.n_elements_per_strip)
    analog = AnalogWeights((prop * q).reshape(shape))
    v = np.full(geom.n_microstrips, math.sqrt(2.0 * tx_power / geom.n_total), dtype=complex)
    power = float(np.real(np.vdot(analog.apply(v), analog.apply(v))))
    if power > tx_power:
        v = v * math.sqrt(tx_power / power)
    return HybridConfig(analog, v, tx_power)


def _range_phase(geom: DmaGeometry, r: float) -> np.ndarray:
    i_x = np.repeat(geom.strip_offsets, geom.n_elements_per_strip)
    n = np.tile(np.arange(geom.n_elements_per_strip, dtype=float), geom.n_microstrips)
    return geom.wavenumber * (((i_x * geom.d_m) ** 2 + (n * geom.d_e) ** 2) / (2.0 * r)
                              + geom.z0 * n * geom.d_e / r)


def range_combiner(geom: DmaGeometry, r: float) -> AnalogWeights:
    """Analog combiner focusing the range-dependent phase of every element on ``r``.

    Paired with :func:`angle_beamformer` it yields
    ``Q_bar_r v_phi = 0.5 (a(r, phi) exp(j k (r + z0^2/(2r))) + j exp(-j beta rho) * v)``
    for the Fresnel-model focusing vector, so the scan metric is proportional
    to the matched filter ``a^H h``.
    """
    if not r > 0:
        raise DomainError(f"r must be positive, got {r!r}")
    beta_rho = geom.waveguide_wavenumber * geom.feed_distances
    q = lorentzian_weight(-(_range_phase(geom, r) - beta_rho))
    shape = (geom.n_microstrips, geom.n_elements_per_strip)
    return AnalogWeights((geom.waveguide_phasors * q).reshape(shape))


def angle_beamformer(geom: DmaGeometry, phi, r: float) -> np.ndarray:
    """Digital vector(s) steering a range-focused combiner towards ``phi``.

    ``phi`` may be an array; the result then has shape ``(len(phi), N_m)``.
    """
    if not r > 0:
        raise DomainError(f"r must be positive, got {r!r}")
    c = np.cos(np.asarray(phi, dtype=float))[..., None]
    x = geom.strip_offsets * geom.d_m
    return np.exp(1j * geom.wavenumber * (x * c + x * x * c * c / (2.0 * r)))
