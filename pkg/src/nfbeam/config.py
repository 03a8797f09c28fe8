"""Scenario configuration: YAML in, validated frozen dataclasses out.

Every physical quantity carries its unit in the key name (``_m``, ``_s``,
``_dbm``, ``_deg``, ``_mps``).  Unknown keys and bad values raise
:class:`ConfigurationError` with the dotted path of the offending entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .channel import LinkBudget, dbm_to_watt
from .errors import ConfigurationError
from .geometry import DmaGeometry
from .tracking import TrackerParams
from .trajectory import TrajectoryParams

SCHEMA = {
    "geometry": {
        "n_microstrips": (int, 10),
        "n_elements_per_strip": (int, 200),
        "element_spacing_m": (float, 0.005),
        "strip_spacing_m": (float, 0.005),
        "wavelength_m": (float, 0.01),
        "mount_height_m": (float, 1.0),
        "dielectric_eps": (float, 1.0),
        "feed_offset_m": (float, 0.0),
    },
    "link": {
        "bs_power_dbm": (float, 30.0),
        "ue_power_dbm": (float, 5.0),
        "noise_power_dbm": (float, -94.0),
    },
    "tracker": {
        "kappa_percent": (float, 50.0),
        "delta_percent": (float, 99.0),
        "gamma": (float, 2.0),
        "speed_threshold_mps": (float, 2.5),
        "radius_margin": (float, 1.5),
        "speed_margin": (float, 0.5),
        "pilots": (int, 200),
        "tti_s": (float, 500e-6),
        "normalized_weights": (bool, False),
        "escape_recovery": (bool, False),
        "arc_pruning": (str, "ring"),
        "exact_repeats": (bool, False),
    },
    "trajectory": {
        "control_points": (int, 6),
        "steps": (int, 100),
        "mean_speed_mps": (float, 10.0),
        "r0_min_m": (float, None),
        "r0_max_m": (float, None),
    },
    "benchmark": {
        "enabled": (bool, False),
        "t_fix_s": (float, None),
        "dr_fix_m": (float, None),
        "dphi_fix_deg": (float, None),
    },
    "campaign": {
        "trials": (int, 100),
        "seed": (int, 0),
        "scatterers": (int, 1),
        "redraw_scatterers": (bool, False),
        "evaluate_gain": (bool, True),
        "gain_model": (str, "fresnel"),
        "constant_pathloss": (bool, True),
        "bin_width_m": (float, 5.0),
        "smoothing_window": (int, 3),
        "convention": (str, "power"),
        "workers": (int, 0),
    },
}

_CHOICES = {
    ("tracker", "arc_pruning"): ("ring", "band", "none"),
    ("campaign", "gain_model"): ("exact", "fresnel"),
    ("campaign", "convention"): ("power", "amplitude"),
}


@dataclass(frozen=True)
class BenchmarkSettings:
    enabled: bool = False
    t_fix: float | None = None
    dr_fix: float | None = None
    dphi_fix: float | None = None


@dataclass(frozen=True)
class CampaignSettings:
    trials: int = 100
    seed: int = 0
    scatterers: int = 1
    redraw_scatterers: bool = False
    evaluate_gain: bool = True
    gain_model: str = "fresnel"
    constant_pathloss: bool = True
    bin_width: float = 5.0
    smoothing_window: int = 3
    convention: str = "power"
    workers: int = 0


@dataclass(frozen=True)
class SimulationConfig:
    geometry: DmaGeometry = field(default_factory=DmaGeometry)
    budget: LinkBudget = field(default_factory=lambda: LinkBudget.from_dbm(30.0, 5.0, -94.0))
    tracker: TrackerParams = field(default_factory=TrackerParams)
    trajectory: TrajectoryParams = field(default_factory=TrajectoryParams)
    benchmark: BenchmarkSettings = field(default_factory=BenchmarkSettings)
    campaign: CampaignSettings = field(default_factory=CampaignSettings)


def _coerce(path: str, kind, value):
    if value is None:
        return None
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{path}: expected true/false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{path}: expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{path}: expected a number, got {value!r}")
        if not math.isfinite(float(value)):
            raise ConfigurationError(f"{path}: must be finite")
        return float(value)
    if not isinstance(value, str):
        raise ConfigurationError(f"{path}: expected a string, got {value!r}")
    return value


def normalize(raw: dict | None) -> dict:
    """Fill defaults and type-check a raw mapping against :data:`SCHEMA`."""
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigurationError("<root>: expected a mapping")
    for section in raw:
        if section not in SCHEMA:
            raise ConfigurationError(f"{section}: unknown section")
    out = {}
    for section, fields in SCHEMA.items():
        given = raw.get(section) or {}
        if not isinstance(given, dict):
            raise ConfigurationError(f"{section}: expected a mapping")
        for key in given:
            if key not in fields:
                raise ConfigurationError(f"{section}.{key}: unknown key")
        sec = {}
        for key, (kind, default) in fields.items():
            path = f"{section}.{key}"
            value = _coerce(path, kind, given.get(key, default))
            choices = _CHOICES.get((section, key))
            if choices and value not in choices:
                raise ConfigurationError(f"{path}: must be one of {', '.join(choices)}, got {value!r}")
            sec[key] = value
        out[section] = sec
    return out


def _build(path: str, factory, **kw):
    try:
        return factory(**kw)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def from_dict(raw: dict | None) -> SimulationConfig:
    c = normalize(raw)
    g, ln, t, tr, b, cp = (c[k] for k in ("geometry", "link", "tracker", "trajectory", "benchmark", "campaign"))
    geom = _build("geometry", DmaGeometry, n_microstrips=g["n_microstrips"],
                  n_elements_per_strip=g["n_elements_per_strip"], d_e=g["element_spacing_m"],
                  d_m=g["strip_spacing_m"], wavelength=g["wavelength_m"], z0=g["mount_height_m"],
                  dielectric_eps=g["dielectric_eps"], feed_offset=g["feed_offset_m"])
    budget = _build("link", LinkBudget, p_b=float(dbm_to_watt(ln["bs_power_dbm"])),
                    p_u=float(dbm_to_watt(ln["ue_power_dbm"])),
                    noise_power=float(dbm_to_watt(ln["noise_power_dbm"])))
    tracker = _build("tracker", TrackerParams, kappa=t["kappa_percent"], delta=t["delta_percent"],
                     gamma=t["gamma"], u_threshold=t["speed_threshold_mps"], e_c=t["radius_margin"],
                     e_u=t["speed_margin"], n_pilots=t["pilots"], tti=t["tti_s"],
                     normalized_weights=t["normalized_weights"], prune=t["arc_pruning"],
                     exact_repeats=t["exact_repeats"], escape_recovery=t["escape_recovery"])
    traj = TrajectoryParams.default_for(geom, n_control=tr["control_points"], steps=tr["steps"],
                                        mean_speed=tr["mean_speed_mps"],
                                        **{k: v for k, v in (("r0_min", tr["r0_min_m"]),
                                                             ("r0_max", tr["r0_max_m"])) if v is not None})
    if traj.n_control < 2 or traj.steps < 2:
        raise ConfigurationError("trajectory: need at least 2 control points and 2 steps")
    if not traj.mean_speed > 0:
        raise ConfigurationError("trajectory.mean_speed_mps: must be positive")
    dphi = None if b["dphi_fix_deg"] is None else math.radians(b["dphi_fix_deg"])
    for key, value in (("t_fix_s", b["t_fix_s"]), ("dr_fix_m", b["dr_fix_m"]), ("dphi_fix_deg", dphi)):
        if value is not None and not value > 0:
            raise ConfigurationError(f"benchmark.{key}: must be positive")
    bench = BenchmarkSettings(b["enabled"], b["t_fix_s"], b["dr_fix_m"], dphi)
    if cp["trials"] < 1:
        raise ConfigurationError("campaign.trials: must be positive")
    if cp["seed"] < 0:
        raise ConfigurationError("campaign.seed: must be non-negative")
    if cp["scatterers"] < 0:
        raise ConfigurationError("campaign.scatterers: must be non-negative")
    if not cp["bin_width_m"] > 0:
        raise ConfigurationError("campaign.bin_width_m: must be positive")
    if cp["smoothing_window"] < 1:
        raise ConfigurationError("campaign.smoothing_window: must be at least 1")
    camp = CampaignSettings(cp["trials"], cp["seed"], cp["scatterers"], cp["redraw_scatterers"],
                            cp["evaluate_gain"], cp["gain_model"], cp["constant_pathloss"],
                            cp["bin_width_m"], cp["smoothing_window"], cp["convention"], cp["workers"])
    return SimulationConfig(geom, budget, tracker, traj, bench, camp)


def load_config(path: str | Path | None) -> SimulationConfig:
    if path is None:
        return from_dict({})
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"{p}: cannot read config ({exc.strerror})") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{p}: invalid YAML ({exc})") from exc
    return from_dict(raw)


def default_yaml() -> str:
    """The full schema with its default values as a YAML document."""
    doc = {sec: {k: d for k, (_, d) in fields.items()} for sec, fields in SCHEMA.items()}
    return yaml.safe_dump(doc, sort_keys=False)
