"""Closed-form versus exact-distance sweeps of beam windows over the BS-UE distance."""

from __future__ import annotations

import math

import numpy as np

from .analytics import BeamAnalytics
from .frontend import focusing_vector, relative_gain
from .geometry import PolarPosition, field_regions


def oracle_gain(analytics: BeamAnalytics, focus: PolarPosition, ue: PolarPosition) -> float:
    """Brute-force relative gain ``|a(focus)^H a(ue)|^2 / N^2`` with exact distances."""
    g = analytics.geom
    return relative_gain(focusing_vector(g, focus, "exact"), focusing_vector(g, ue, "exact"))


def r0_sweep(analytics: BeamAnalytics, points: int = 40, r0_min: float | None = None,
             r0_max: float = 80.0) -> np.ndarray:
    """``points`` distances from ``r0_min`` (default: the Fresnel distance) to ``r0_max``."""
    reg = field_regions(analytics.geom)
    lo = reg.r_fresnel if r0_min is None else r0_min
    return np.linspace(lo, r0_max, points)


def _rel_err(closed: float, oracle: float) -> float:
    return abs(closed - oracle) / oracle if oracle > 0 else math.inf


def depth_sweep(analytics: BeamAnalytics, kappa: float, phis, r0s) -> list[dict]:
    """Range correlation at both depth-of-focus edges, closed form against oracle."""
    g = analytics.geom
    rows = []
    for r0 in r0s:
        r = float(g.r_from_r0(r0))
        for phi in phis:
            w = analytics.focus_window(r, phi, kappa)
            focus = PolarPosition(r, phi)
            row = {"r0": float(r0), "r": r, "phi": float(phi),
                   "delta_minus": w.delta_r_minus, "delta_plus": w.delta_r_plus}
            for side, dr in (("minus", -w.delta_r_minus), ("plus", w.delta_r_plus)):
                if math.isfinite(dr) and r + dr > 0:
                    o = oracle_gain(analytics, focus, PolarPosition(r + dr, phi))
                    c = float(analytics.corr_range(dr, r, phi))
                else:
                    o = c = math.nan
                row[f"oracle_gain_{side}"] = o
                row[f"closed_gain_{side}"] = c
                row[f"rel_error_{side}"] = _rel_err(c, o) if math.isfinite(o) else math.nan
            edges = [row["oracle_gain_minus"], row["oracle_gain_plus"]]
            row["oracle_gain_at_edges"] = float(np.nanmin(edges))
            rows.append(row)
    return rows


def angle_sweep(analytics: BeamAnalytics, kappa: float, phi: float, r0s) -> list[dict]:
    """Angular correlation at both angular-width edges, closed form against oracle."""
    g = analytics.geom
    rows = []
    for r0 in r0s:
        r = float(g.r_from_r0(r0))
        dphi = analytics.delta_phi(phi, kappa)
        focus = PolarPosition(r, phi)
        for sign in (-1.0, 1.0):
            ue_phi = phi + sign * dphi
            if not 0.0 <= ue_phi <= math.pi:
                continue
            o = oracle_gain(analytics, focus, PolarPosition(r, ue_phi))
            c = float(analytics.corr_angle(sign * dphi, r, phi))
            rows.append({"r0": float(r0), "r": r, "phi": phi, "delta_phi": dphi, "side": int(sign),
                         "oracle_gain": o, "closed_gain": c, "rel_error": _rel_err(c, o)})
    return rows


def joint_sweep(analytics: BeamAnalytics, kappa: float, phi: float, r0s) -> list[dict]:
    """Joint correlation at the four window corners, closed form against oracle."""
    g = analytics.geom
    rows = []
    for r0 in r0s:
        r = float(g.r_from_r0(r0))
        w = analytics.focus_window(r, phi, kappa)
        focus = PolarPosition(r, phi)
        for dr in (-w.delta_r_minus, w.delta_r_plus):
            if not math.isfinite(dr):
                continue
            for sign in (-1.0, 1.0):
                ue_phi = phi + sign * w.delta_phi
                if not 0.0 <= ue_phi <= math.pi:
                    continue
                o = oracle_gain(analytics, focus, PolarPosition(r + dr, ue_phi))
                c = float(analytics.corr_joint(dr, sign * w.delta_phi, r, phi))
                rows.append({"r0": float(r0), "r": r, "phi": phi, "delta_r": dr,
                             "delta_phi": sign * w.delta_phi, "oracle_gain": o, "closed_gain": c,
                             "rel_error": _rel_err(c, o)})
    return rows
