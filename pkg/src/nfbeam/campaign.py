"""Monte-Carlo tracking campaigns: trials, per-TTI gain, aggregates and persistence."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numba
import numpy as np

from .analytics import BeamAnalytics
from .channel import Disk, build_channel, draw_scatterers
from .config import SimulationConfig
from .frontend import focusing_vector
from .geometry import DmaGeometry, PolarPosition
from .tracking import BenchmarkParams, TrackerState, run_tracker
from .trajectory import Trajectory, generate_trajectory

FORMAT_VERSION = "nfbeam-aggregate v1"
STREAM_TRAJECTORY, STREAM_SCATTERER, STREAM_PROPOSED, STREAM_BENCHMARK = range(4)
MODES = ("proposed", "benchmark")


def trial_rng(seed: int, trial: int, stream: int) -> np.random.Generator:
    """Independent generator for (master seed, trial, stream)."""
    return np.random.default_rng(np.random.SeedSequence([seed, trial, stream]))


@numba.njit(cache=True, fastmath=True)
def _gain_kernel(x, y, slot, ex, ez2, hat_re, hat_im, k, out):
    nm, ne = ex.size, ez2.size
    phase = np.empty(ne)
    for t in range(x.size):
        s = slot[t]
        acc_re = 0.0
        acc_im = 0.0
        for i in range(nm):
            rho2 = (x[t] - ex[i]) ** 2 + y[t] ** 2
            for n in range(ne):
                phase[n] = k * math.sqrt(rho2 + ez2[n])
            base = i * ne
            for n in range(ne):
                c = math.cos(phase[n])
                sn = math.sin(phase[n])
                hr = hat_re[s, base + n]
                hi = hat_im[s, base + n]
                # conj(exp(-j k d)) * hat
                acc_re += c * hr - sn * hi
                acc_im += c * hi + sn * hr
        out[t] = acc_re * acc_re + acc_im * acc_im


def exact_correlation_track(geom: DmaGeometry, x: np.ndarray, y: np.ndarray, slot: np.ndarray,
                            hats: np.ndarray) -> np.ndarray:
    """``|a_exact(x_t, y_t)^H hats[slot_t]|^2 / N^2`` for every sample ``t``."""
    out = np.empty(x.size)
    ex = np.ascontiguousarray(geom.strip_offsets * geom.d_m)
    ez2 = (np.arange(geom.n_elements_per_strip) * geom.d_e + geom.z0) ** 2
    _gain_kernel(np.ascontiguousarray(x, dtype=float), np.ascontiguousarray(y, dtype=float),
                 np.ascontiguousarray(slot, dtype=np.int64), ex, ez2,
                 np.ascontiguousarray(hats.real), np.ascontiguousarray(hats.imag), geom.wavenumber, out)
    return out / geom.n_total ** 2


@dataclass
class TrajectoryWorld:
    """Ground truth for one trial: motion along a trajectory plus fixed reflectors."""

    geom: DmaGeometry
    trajectory: Trajectory
    scatterers: tuple
    constant_pathloss: bool = True
    redraw_count: int = 0
    redraw_radius: float = 0.0

    def position(self, t: float) -> PolarPosition:
        return self.trajectory.position(t)

    def channel(self, p: PolarPosition, rng: np.random.Generator):
        scat = self.scatterers
        if self.redraw_count:
            scat = draw_scatterers(self.redraw_count, Disk.around(p, self.redraw_radius), p, rng)
        return build_channel(self.geom, p, scat, self.constant_pathloss)


@dataclass(frozen=True)
class ModeResult:
    slots: list  # list of dicts (slot records)
    tti_r0: np.ndarray
    tti_gain: np.ndarray
    duration: float


@dataclass(frozen=True)
class TrialResult:
    trial: int
    modes: dict
    error: str | None = None


def _analytics(cfg: SimulationConfig) -> BeamAnalytics:
    return BeamAnalytics(cfg.geometry, convention=cfg.campaign.convention)


def setup_world(cfg: SimulationConfig, trial: int) -> tuple[TrajectoryWorld, BeamAnalytics]:
    geom = cfg.geometry
    ana = _analytics(cfg)
    traj = generate_trajectory(trial_rng(cfg.campaign.seed, trial, STREAM_TRAJECTORY), geom, cfg.trajectory)
    p0 = traj.position(0.0)
    area_radius = ana.chord_displacement(p0.r, p0.phi, cfg.tracker.kappa) * (1.0 + cfg.tracker.e_c)
    scat = draw_scatterers(cfg.campaign.scatterers, Disk.around(p0, area_radius), p0,
                           trial_rng(cfg.campaign.seed, trial, STREAM_SCATTERER))
    redraw = cfg.campaign.scatterers if cfg.campaign.redraw_scatterers else 0
    world = TrajectoryWorld(geom, traj, scat, cfg.campaign.constant_pathloss, redraw, area_radius)
    return world, ana


def _slot_record(trial: int, mode: str, s: TrackerState, world: TrajectoryWorld, ana: BeamAnalytics,
                 model: str) -> dict:
    truth = world.position(s.time)
    est = s.position_estimate
    tx, ty = truth.xy
    ex, ey = est.xy
    gain = None
    if s.slot_index > 0:
        a_true = focusing_vector(world.geom, truth, "exact")
        a_hat = focusing_vector(world.geom, est, model)
        gain = abs(np.sum(np.conj(a_true) * a_hat)) ** 2 / world.geom.n_total ** 2
    return {
        "trial": trial,
        "mode": mode,
        "slot": s.slot_index,
        "time_s": s.time,
        "true_r": truth.r,
        "true_phi": truth.phi,
        "true_r0": float(world.geom.r0_from_r(truth.r)),
        "est_r": est.r,
        "est_phi": est.phi,
        "position_error_m": math.hypot(tx - ex, ty - ey),
        "gain_at_estimate": gain,
        "coherence_time_s": s.coherence_time,
        "search_radius_m": s.c_hat,
        "rings": s.n_rings,
        "grid_size": s.grid_size,
        "speed_estimate_mps": s.velocity_history[-1],
        "pilots_used": s.pilots_used,
        "recovered": s.recovered,
    }


def run_mode(cfg: SimulationConfig, trial: int, mode: str, bench: BenchmarkParams | None = None,
             world: TrajectoryWorld | None = None, ana: BeamAnalytics | None = None) -> ModeResult:
    if world is None or ana is None:
        world, ana = setup_world(cfg, trial)
    traj = world.trajectory
    stream = STREAM_PROPOSED if mode == "proposed" else STREAM_BENCHMARK
    rng = trial_rng(cfg.campaign.seed, trial, stream)
    p0 = traj.position(0.0)
    states = run_tracker(ana, world, cfg.tracker, cfg.budget, rng, p0, traj.speed_at(0.0),
                         traj.duration, bench if mode == "benchmark" else None)
    model = cfg.campaign.gain_model
    slots = [_slot_record(trial, mode, s, world, ana, model) for s in states]
    tti = cfg.tracker.tti
    times = np.arange(0.0, traj.duration, tti)
    x, y = traj.xy_at(times)
    tti_r0 = np.asarray(world.geom.r0_from_r(np.hypot(x, y)))
    if cfg.campaign.evaluate_gain:
        trig = np.array([s.time for s in states])
        slot = np.searchsorted(trig, times, side="right") - 1
        hats = np.stack([focusing_vector(world.geom, s.position_estimate, model) for s in states])
        gain = exact_correlation_track(world.geom, x, np.abs(y), slot, hats)
    else:
        gain = np.full(times.size, np.nan)
    return ModeResult(slots, tti_r0, gain, traj.duration)


def run_trial(cfg: SimulationConfig, trial: int, bench: BenchmarkParams | None = None,
              modes: tuple = ("proposed",)) -> TrialResult:
    """One trajectory under the requested tracker modes; failures are captured per mode,
    so a failed mode leaves the other modes' results intact."""
    try:
        world, ana = setup_world(cfg, trial)
    except Exception as exc:  # isolate the trial, keep the campaign running
        return TrialResult(trial, {}, f"{type(exc).__name__}: {exc}")
    out, errors = {}, []
    for m in modes:
        try:
            out[m] = run_mode(cfg, trial, m, bench, world, ana)
        except Exception as exc:
            errors.append(f"{m}: {type(exc).__name__}: {exc}")
    return TrialResult(trial, out, "; ".join(errors) or None)


def _trial_job(args):
    cfg, trial, bench, modes = args
    return run_trial(cfg, trial, bench, modes)


def run_trials(cfg: SimulationConfig, modes: tuple = ("proposed",), bench: BenchmarkParams | None = None,
               trials: range | None = None) -> list[TrialResult]:
    """Trials in index order, on a process pool when more than one worker is available."""
    trials = range(cfg.campaign.trials) if trials is None else trials
    workers = cfg.campaign.workers or (os.cpu_count() or 1)
    jobs = [(cfg, k, bench, modes) for k in trials]
    if workers <= 1 or len(jobs) <= 1:
        return [_trial_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial_job, jobs))


# -- aggregation ---------------------------------------------------------------

def benchmark_from_proposed(ana: BeamAnalytics, results: list[TrialResult], delta: float = 99.0,
                            settings=None) -> BenchmarkParams:
    """Fixed-interval benchmark parameters: mean coherence time and mean 99% windows
    over the proposed tracker's estimation slots, unless overridden in ``settings``."""
    t_c, dr, dphi = [], [], []
    for res in results:
        if "proposed" not in res.modes:
            continue
        for rec in res.modes["proposed"].slots:
            if rec["slot"] == 0:
                continue
            t_c.append(rec["coherence_time_s"])
            w = ana.focus_window(rec["est_r"], rec["est_phi"], delta)
            dr.append(0.5 * (w.delta_r_minus + w.delta_r_plus))
            dphi.append(w.delta_phi)
    t_fix = getattr(settings, "t_fix", None) or float(np.mean(t_c))
    dr_fix = getattr(settings, "dr_fix", None) or float(np.mean(dr))
    dphi_fix = getattr(settings, "dphi_fix", None) or float(np.mean(dphi))
    return BenchmarkParams(t_fix, dr_fix, dphi_fix)


def _moving_average(v: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average ignoring NaNs (edges use the available neighbours)."""
    out = np.full(v.size, np.nan)
    h = window // 2
    for i in range(v.size):
        seg = v[max(0, i - h):i + h + 1]
        seg = seg[~np.isnan(seg)]
        if seg.size:
            out[i] = float(np.mean(seg))
    return out


def aggregate_mode(results: list[TrialResult], mode: str, bin_width: float, window: int) -> dict:
    """Pooled summary statistics and r0-binned tables for one tracker mode."""
    ok = [r for r in results if mode in r.modes]
    gains = np.concatenate([r.modes[mode].tti_gain for r in ok]) if ok else np.array([])
    r0 = np.concatenate([r.modes[mode].tti_r0 for r in ok]) if ok else np.array([])
    slots = [s for r in ok for s in r.modes[mode].slots if s["slot"] > 0]
    per_trial = [float(np.mean(r.modes[mode].tti_gain)) for r in ok]
    has_gain = gains.size > 0 and not np.all(np.isnan(gains))
    summary = {
        "trials": len(ok),
        "failed_trials": len(results) - len(ok),
        "tti_samples": int(gains.size),
        "slots": len(slots),
        "mean_gain": float(np.mean(gains)) if has_gain else math.nan,
        "p5_gain": float(np.percentile(gains, 5)) if has_gain else math.nan,
        "p95_gain": float(np.percentile(gains, 95)) if has_gain else math.nan,
        "min_trial_mean_gain": min(per_trial) if has_gain else math.nan,
        "mean_coherence_time_s": float(np.mean([s["coherence_time_s"] for s in slots])) if slots else math.nan,
        "mean_position_error_m": float(np.mean([s["position_error_m"] for s in slots])) if slots else math.nan,
        "mean_rings": float(np.mean([s["rings"] for s in slots])) if slots else math.nan,
        "mean_grid_size": float(np.mean([s["grid_size"] for s in slots])) if slots else math.nan,
        "total_time_s": float(sum(r.modes[mode].duration for r in ok)),
    }
    top = max(float(np.max(r0)) if r0.size else 0.0, max((s["true_r0"] for s in slots), default=0.0))
    edges = np.arange(0.0, top + bin_width, bin_width)
    if edges.size < 2:
        edges = np.array([0.0, bin_width])
    tti_bin = np.clip(np.digitize(r0, edges) - 1, 0, edges.size - 2)
    slot_r0 = np.array([s["true_r0"] for s in slots])
    slot_bin = np.clip(np.digitize(slot_r0, edges) - 1, 0, edges.size - 2) if slots else np.array([], int)
    t_c = np.array([s["coherence_time_s"] for s in slots])
    err = np.array([s["position_error_m"] for s in slots])
    tti = (results and ok and ok[0].modes[mode].duration / max(ok[0].modes[mode].tti_gain.size, 1)) or 0.0
    rows = []
    for b in range(edges.size - 1):
        g = gains[tti_bin == b]
        sel = slot_bin == b
        n_tti = int(g.size)
        rows.append({
            "r0_lo": float(edges[b]),
            "r0_hi": float(edges[b + 1]),
            "tti_samples": n_tti,
            "gain_mean": float(np.mean(g)) if n_tti and has_gain else math.nan,
            "gain_p10": float(np.percentile(g, 10)) if n_tti and has_gain else math.nan,
            "gain_p90": float(np.percentile(g, 90)) if n_tti and has_gain else math.nan,
            "slots": int(np.sum(sel)),
            "slot_rate_hz": float(np.sum(sel) / (n_tti * tti)) if n_tti and tti else math.nan,
            "coherence_time_mean_s": float(np.mean(t_c[sel])) if np.any(sel) else math.nan,
            "position_error_mean_m": float(np.mean(err[sel])) if np.any(sel) else math.nan,
        })
    gm = np.array([row["gain_mean"] for row in rows])
    em = np.array([row["position_error_mean_m"] for row in rows])
    for row, gs, es in zip(rows, _moving_average(gm, window), _moving_average(em, window)):
        row["gain_mean_smoothed"] = float(gs)
        row["position_error_smoothed_m"] = float(es)
    return {"summary": summary, "bins": rows}


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.10g}"
    return str(v)


def summary_csv(aggregates: dict, extra: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# {FORMAT_VERSION}: mode,metric,value\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "metric", "value"])
    for key, value in (extra or {}).items():
        w.writerow(["campaign", key, fmt(value)])
    for mode, agg in aggregates.items():
        for key, value in agg["summary"].items():
            w.writerow([mode, key, fmt(value)])
    return buf.getvalue()


def bins_csv(aggregates: dict) -> str:
    buf = io.StringIO()
    cols = None
    w = csv.writer(buf, lineterminator="\n")
    for mode, agg in aggregates.items():
        for row in agg["bins"]:
            if cols is None:
                cols = list(row)
                buf.write(f"# {FORMAT_VERSION}: per-r0-bin metrics\n")
                w.writerow(["mode"] + cols)
            w.writerow([mode] + [fmt(row[c]) for c in cols])
    return buf.getvalue()


def records_jsonl(results: list[TrialResult]) -> str:
    lines = []
    for res in results:
        if res.error:
            lines.append(json.dumps({"trial": res.trial, "error": res.error}, sort_keys=True))
        for mode in MODES:
            if mode in res.modes:
                for rec in res.modes[mode].slots:
                    lines.append(json.dumps(rec, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class CampaignOutput:
    aggregates: dict
    benchmark: BenchmarkParams | None
    results: list
    failures: int


def run_campaign(cfg: SimulationConfig, out_dir: str | Path | None = None,
                 keep_results: bool = True) -> CampaignOutput:
    """Proposed tracker over all trials, then (if enabled) the fixed benchmark on the
    same trajectories; aggregates are written to ``out_dir`` when given."""
    results = run_trials(cfg, ("proposed",))
    ana = _analytics(cfg)
    bench = None
    if cfg.benchmark.enabled:
        bench = benchmark_from_proposed(ana, results, cfg.tracker.delta, cfg.benchmark)
        bench_results = run_trials(cfg, ("benchmark",), bench)
        merged = []
        for a, b in zip(results, bench_results):
            err = "; ".join(e for e in (a.error, b.error) if e) or None
            merged.append(TrialResult(a.trial, {**a.modes, **b.modes}, err))
        results = merged
    modes = ("proposed", "benchmark") if bench else ("proposed",)
    aggregates = {m: aggregate_mode(results, m, cfg.campaign.bin_width, cfg.campaign.smoothing_window)
                  for m in modes}
    failures = sum(1 for r in results if r.error)
    if out_dir is not None:
        write_outputs(Path(out_dir), aggregates, results, bench, cfg)
    return CampaignOutput(aggregates, bench, results if keep_results else [], failures)


def write_outputs(out: Path, aggregates: dict, results: list, bench: BenchmarkParams | None,
                  cfg: SimulationConfig) -> None:
    extra = {"seed": cfg.campaign.seed, "trials": cfg.campaign.trials,
             "kappa": cfg.tracker.kappa, "delta": cfg.tracker.delta}
    if bench is not None:
        extra.update({"t_fix_s": bench.t_fix, "dr_fix_m": bench.dr_fix, "dphi_fix_rad": bench.dphi_fix})
    files = {
        "summary.csv": summary_csv(aggregates, extra),
        "bins.csv": bins_csv(aggregates),
        "records.jsonl": records_jsonl(results),
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)
    except OSError as exc:
        raise OSError(f"writing campaign outputs to {out}: {exc}") from exc


def with_overrides(cfg: SimulationConfig, **campaign) -> SimulationConfig:
    return replace(cfg, campaign=replace(cfg.campaign, **campaign))
