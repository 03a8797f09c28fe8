"""Command-line interface: analytic sweeps, grids, coherence tables, tracking runs."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analytics import BeamAnalytics
from .campaign import (FORMAT_VERSION, TrialResult, benchmark_from_proposed, fmt, run_campaign, run_mode,
                       setup_world, summary_csv)
from .config import SimulationConfig, default_yaml, load_config
from .errors import ConfigurationError, DomainError
from .geometry import PolarPosition
from .grid import build_grid
from .selftest import run_selftest
from .sweeps import angle_sweep, depth_sweep, joint_sweep, r0_sweep
from .tracking import schedule


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    """Shared flags; on subcommands they default to "absent" so values given
    before the subcommand are not overwritten."""
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="PATH", default=default, help="scenario YAML file")
    p.add_argument("--seed", type=_u64, metavar="U64", default=default, help="master seed (overrides the config)")
    p.add_argument("--out", metavar="DIR", default=default, help="output directory (default: stdout)")
    p.add_argument("--trials", type=_positive_int, metavar="N", default=default, help="number of trajectories")
    p.add_argument("--convention", choices=("power", "amplitude"), default=default,
                   help="threshold convention for kappa")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _percent(text: str) -> float:
    v = float(text)
    if not 0 < v < 100:
        raise argparse.ArgumentTypeError("must lie strictly between 0 and 100")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nfbeam", description="Near-field DMA beam focusing and tracking.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    an = sub.add_parser("analyze", help="closed-form vs exact-distance window sweeps (CSV)")
    _global_flags(an, suppress=True)
    an.add_argument("target", choices=("depth", "angle", "joint"))
    an.add_argument("--kappa", type=_percent, default=50.0, help="gain threshold in percent")
    an.add_argument("--phi-deg", type=float, nargs="+", default=None,
                    help="focus azimuths in degrees (depth default: 30 45 90; others: 45)")
    an.add_argument("--points", type=_positive_int, default=40, help="number of r0 values")
    an.add_argument("--r0-max", type=float, default=80.0, help="largest BS-UE distance in metres")

    gr = sub.add_parser("grid", help="dynamic sampling grid around a focus (JSON)")
    _global_flags(gr, suppress=True)
    gr.add_argument("--r0", type=float, default=30.0, help="BS-UE distance of the centre in metres")
    gr.add_argument("--phi-deg", type=float, default=60.0, help="azimuth of the centre in degrees")
    gr.add_argument("--c-hat", type=float, default=None,
                    help="disk radius in metres (default: margin-scaled minimum displacement)")
    gr.add_argument("--delta", type=_percent, default=None, help="resolution percent (default: config)")

    co = sub.add_parser("coherence", help="effective beam coherence time table (CSV)")
    _global_flags(co, suppress=True)
    co.add_argument("--kappa", type=_percent, nargs="+", default=[20.0, 40.0, 50.0, 60.0, 80.0])
    co.add_argument("--r0", type=float, nargs="+", default=[10.0, 20.0, 40.0, 80.0, 160.0])
    co.add_argument("--phi-deg", type=float, default=90.0)
    co.add_argument("--speed", type=float, default=10.0, help="predicted speed in m/s")

    tr = sub.add_parser("track", help="single tracking run, per-slot records (CSV)")
    _global_flags(tr, suppress=True)
    tr.add_argument("--trial", type=int, default=0, help="trial index (selects the trajectory)")
    tr.add_argument("--benchmark", action="store_true",
                    help="run the fixed-interval benchmark with parameters from a proposed run")

    ca = sub.add_parser("campaign", help="Monte-Carlo campaign with aggregate CSVs")
    _global_flags(ca, suppress=True)
    ca.add_argument("--benchmark", action="store_true", help="also run the fixed-interval benchmark")
    ca.add_argument("--workers", type=int, default=None, help="worker processes (0 = all cores)")

    st = sub.add_parser("selftest", help="run the oracle suites")
    _global_flags(st, suppress=True)

    sc = sub.add_parser("schema", help="print the default configuration as YAML")
    _global_flags(sc, suppress=True)
    return parser


def _config(args) -> SimulationConfig:
    cfg = load_config(args.config)
    camp = cfg.campaign
    if args.seed is not None:
        camp = replace(camp, seed=args.seed)
    if args.trials is not None:
        camp = replace(camp, trials=args.trials)
    if args.convention is not None:
        camp = replace(camp, convention=args.convention)
    return replace(cfg, campaign=camp)


def _csv_text(rows: list[dict], header: str) -> str:
    buf = io.StringIO()
    buf.write(f"# {FORMAT_VERSION}: {header}\n")
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        cols = list(rows[0])
        w.writerow(cols)
        for row in rows:
            w.writerow([fmt(row[c]) for c in cols])
    return buf.getvalue()


def _emit(args, name: str, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    except OSError as exc:
        raise OSError(f"writing {out / name}: {exc}") from exc
    print(f"wrote {out / name}", file=sys.stderr)


def _analytics(cfg: SimulationConfig) -> BeamAnalytics:
    return BeamAnalytics(cfg.geometry, convention=cfg.campaign.convention)


def _in_plane(cfg: SimulationConfig, r0: float) -> float:
    """In-plane range for a BS-UE distance; the UE must lie beyond the mount height."""
    h = cfg.geometry.center_height
    if not r0 > h:
        raise DomainError(f"r0 = {r0} m must exceed the mount height of the array centre ({h:g} m)")
    return float(cfg.geometry.r_from_r0(r0))


def cmd_analyze(args, cfg) -> int:
    ana = _analytics(cfg)
    r0s = r0_sweep(ana, args.points, r0_max=args.r0_max)
    if args.target == "depth":
        phis = [math.radians(p) for p in (args.phi_deg or [30.0, 45.0, 90.0])]
        rows = depth_sweep(ana, args.kappa, phis, r0s)
        keep = ("r0", "phi", "delta_minus", "delta_plus", "oracle_gain_at_edges", "oracle_gain_minus",
                "oracle_gain_plus", "closed_gain_minus", "closed_gain_plus")
        rows = [{k: row[k] for k in keep} for row in rows]
    else:
        phi = math.radians((args.phi_deg or [45.0])[0])
        sweep = angle_sweep if args.target == "angle" else joint_sweep
        rows = sweep(ana, args.kappa, phi, r0s)
    _emit(args, f"analyze_{args.target}.csv", _csv_text(rows, f"{args.target} window sweep, kappa={args.kappa:g}"))
    return 0


def cmd_grid(args, cfg) -> int:
    ana = _analytics(cfg)
    delta = args.delta if args.delta is not None else cfg.tracker.delta
    center = PolarPosition(_in_plane(cfg, args.r0), math.radians(args.phi_deg))
    c_hat = args.c_hat
    if c_hat is None:
        c_hat = ana.chord_displacement(center.r, center.phi, cfg.tracker.kappa) * (1.0 + cfg.tracker.e_c)
    grid = build_grid(ana, center, c_hat, delta, prune=cfg.tracker.prune)
    doc = {"format": FORMAT_VERSION, "grid": grid.to_json()}
    _emit(args, "grid.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_coherence(args, cfg) -> int:
    ana = _analytics(cfg)
    params = cfg.tracker
    phi = math.radians(args.phi_deg)
    rows = []
    for kappa in args.kappa:
        p = replace(params, kappa=kappa, delta=max(params.delta, kappa + 1e-6))
        for r0 in args.r0:
            r = _in_plane(cfg, r0)
            c, t_c = schedule(ana, PolarPosition(r, phi), max(args.speed, p.u_threshold), p)
            rows.append({"kappa": kappa, "r0_m": r0, "phi_rad": phi, "speed_mps": args.speed,
                         "min_displacement_m": c, "coherence_time_s": t_c})
    _emit(args, "coherence.csv", _csv_text(rows, "effective beam coherence time"))
    return 0


def cmd_track(args, cfg) -> int:
    world, ana = setup_world(cfg, args.trial)
    mode = "proposed"
    bench = None
    if args.benchmark:
        proposed = run_mode(cfg, args.trial, "proposed", None, world, ana)
        bench = benchmark_from_proposed(ana, [TrialResult(args.trial, {"proposed": proposed})],
                                        cfg.tracker.delta, cfg.benchmark)
        mode = "benchmark"
    res = run_mode(cfg, args.trial, mode, bench, world, ana)
    rows = []
    for i, rec in enumerate(res.slots):
        nxt = res.slots[i + 1]["time_s"] if i + 1 < len(res.slots) else rec["time_s"] + rec["coherence_time_s"]
        rows.append({"slot": rec["slot"], "time_s": rec["time_s"], "next_trigger_s": nxt,
                     "true_r": rec["true_r"], "true_phi": rec["true_phi"], "est_r": rec["est_r"],
                     "est_phi": rec["est_phi"], "relative_gain": rec["gain_at_estimate"] or math.nan,
                     "coherence_time_s": rec["coherence_time_s"], "rings": rec["rings"],
                     "grid_size": rec["grid_size"], "speed_estimate_mps": rec["speed_estimate_mps"]})
    _emit(args, f"track_{mode}_{args.trial}.csv", _csv_text(rows, f"{mode} tracking slots, trial {args.trial}"))
    g = res.tti_gain
    if g.size and not np.all(np.isnan(g)):
        print(f"mean relative gain over {g.size} TTIs: {np.mean(g):.4f}", file=sys.stderr)
    return 0


def cmd_campaign(args, cfg) -> int:
    if args.workers is not None:
        cfg = replace(cfg, campaign=replace(cfg.campaign, workers=args.workers))
    if args.benchmark:
        cfg = replace(cfg, benchmark=replace(cfg.benchmark, enabled=True))
    out = Path(args.out) if args.out else Path("nfbeam-out")
    result = run_campaign(cfg, out, keep_results=False)
    sys.stdout.write(summary_csv(result.aggregates))
    print(f"wrote {out}/summary.csv, bins.csv, records.jsonl; failed trials: {result.failures}", file=sys.stderr)
    return 0 if result.failures == 0 else 3


def cmd_selftest(args, cfg) -> int:
    seed = args.seed if args.seed is not None else 0
    results = run_selftest(seed % 2 ** 32, cfg.campaign.convention)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def cmd_schema(args, cfg) -> int:
    sys.stdout.write(default_yaml())
    return 0


COMMANDS = {"analyze": cmd_analyze, "grid": cmd_grid, "coherence": cmd_coherence, "track": cmd_track,
            "campaign": cmd_campaign, "selftest": cmd_selftest, "schema": cmd_schema}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigurationError as exc:
        print(f"nfbeam: configuration error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"nfbeam: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"nfbeam: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
