"""Fast oracle suites runnable from an installed package (``nfbeam selftest``)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .analytics import BeamAnalytics, fresnel_cs, fresnel_ratio, fresnel_ratio_taylor, quadratic_phase_threshold
from .frontend import focusing_vector, optimal_precoder
from .geometry import DmaGeometry, PolarPosition, exact_distances, field_regions
from .grid import build_grid
from .sweeps import angle_sweep, depth_sweep, joint_sweep, oracle_gain, r0_sweep


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _fresnel() -> CheckResult:
    xs = np.linspace(0.05, 6.0, 25)
    err = 0.0
    for x in xs:
        c = quad(lambda t: math.cos(0.5 * math.pi * t * t), 0.0, x, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        s = quad(lambda t: math.sin(0.5 * math.pi * t * t), 0.0, x, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        cc, ss = fresnel_cs(x)
        err = max(err, abs(cc - c), abs(ss - s))
    xt = np.linspace(1e-3, 0.5, 200)
    taylor = float(np.max(np.abs(np.abs(fresnel_ratio(xt)) - np.abs(fresnel_ratio_taylor(xt)))))
    w = quadratic_phase_threshold(0.99)
    ok = err <= 1e-9 and taylor <= 1e-3 and abs(w - 0.46) <= 0.005
    return CheckResult("fresnel", ok, f"quadrature err {err:.2e}, taylor err {taylor:.2e}, w99 {w:.4f}")


def _distances(geom: DmaGeometry) -> CheckResult:
    p = PolarPosition(10.0, math.pi / 2)
    d = exact_distances(geom, p)
    xyz = geom.element_xyz
    brute = np.sqrt((xyz[:, 0] - p.xy[0]) ** 2 + (xyz[:, 1] - p.xy[1]) ** 2 + xyz[:, 2] ** 2)
    err = float(np.max(np.abs(d - brute)))
    return CheckResult("distances", err < 1e-12, f"max err {err:.1e} m")


def _optimal_gain(geom: DmaGeometry, rng: np.random.Generator) -> CheckResult:
    reg = field_regions(geom)
    worst = 0.0
    for _ in range(10):
        r0 = rng.uniform(reg.r_fresnel, reg.r_rayleigh)
        p = PolarPosition(float(geom.r_from_r0(r0)), rng.uniform(0.0, math.pi))
        gain = optimal_precoder(geom, p, 1.0).gain(focusing_vector(geom, p, "fresnel"))
        worst = max(worst, abs(gain / (0.5 * geom.n_total) - 1.0))
    return CheckResult("optimal gain", worst <= 0.02, f"worst relative deviation {worst:.2e}")


def _windows(ana: BeamAnalytics) -> CheckResult:
    reg = field_regions(ana.geom)
    r0s = r0_sweep(ana, 12)
    depth = depth_sweep(ana, 50, [math.pi / 6, math.pi / 2], r0s)
    far = [x for x in depth if x["r0"] >= reg.r0_approx]
    mean_far = float(np.nanmean([[x["rel_error_minus"], x["rel_error_plus"]] for x in far]))
    ang = [x["rel_error"] for x in angle_sweep(ana, 50, math.pi / 4, r0s) if x["r0"] >= reg.r0_approx]
    jnt = [x["rel_error"] for x in joint_sweep(ana, 50, math.pi / 4, r0s) if x["r0"] >= reg.r0_approx]
    ok = mean_far <= 0.02 and max(ang) <= 0.03 and max(jnt) <= 0.05
    return CheckResult("focus windows", ok,
                       f"depth mean err {mean_far:.3%}, angle max {max(ang):.3%}, joint max {max(jnt):.3%}")


def _grid(ana: BeamAnalytics, rng: np.random.Generator) -> CheckResult:
    center = PolarPosition(30.0, math.pi / 3)
    c_hat = 2.5 * ana.chord_displacement(center.r, center.phi, 50)
    grid = build_grid(ana, center, c_hat, 99)
    r, phi, _ = grid.samples()
    cx, cy = center.xy
    sample_vecs = [focusing_vector(ana.geom, PolarPosition(a, b), "exact") for a, b in zip(r, phi)]
    hits, total = 0, 200
    for _ in range(total):
        rad = c_hat * math.sqrt(rng.uniform())
        ang = rng.uniform(0, 2 * math.pi)
        x, y = cx + rad * math.cos(ang), abs(cy + rad * math.sin(ang))
        ue = focusing_vector(ana.geom, PolarPosition(math.hypot(x, y), math.atan2(y, x)), "exact")
        best = max(abs(np.vdot(v, ue)) ** 2 for v in sample_vecs) / ana.geom.n_total ** 2
        hits += best >= 0.97
    return CheckResult("grid coverage", hits / total >= 0.98, f"{hits}/{total} points covered at 97%")


def _oracle_symmetry(ana: BeamAnalytics) -> CheckResult:
    p, q = PolarPosition(20.0, 1.0), PolarPosition(20.3, 1.01)
    g1, g2 = oracle_gain(ana, p, q), oracle_gain(ana, q, p)
    return CheckResult("oracle symmetry", abs(g1 - g2) < 1e-12 and abs(oracle_gain(ana, p, p) - 1) < 1e-12,
                       f"|G(p,q)-G(q,p)| = {abs(g1 - g2):.1e}")


def run_selftest(seed: int = 0, convention: str = "power") -> list[CheckResult]:
    geom = DmaGeometry()
    ana = BeamAnalytics(geom, convention=convention)
    rng = np.random.default_rng(seed)
    checks: list[Callable[[], CheckResult]] = [
        _fresnel,
        lambda: _distances(geom),
        lambda: _oracle_symmetry(ana),
        lambda: _optimal_gain(geom, rng),
        lambda: _windows(ana),
        lambda: _grid(ana, rng),
    ]
    return [check() for check in checks]
