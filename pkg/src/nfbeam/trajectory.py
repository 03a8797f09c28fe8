"""Random smooth user trajectories in the UE plane (Bezier curves)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geometry import DmaGeometry, PolarPosition, field_regions, from_cartesian


def de_casteljau(control: np.ndarray, u) -> np.ndarray:
    """Points on the Bezier curve of ``control`` (shape (K, 2)) at parameters ``u``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))[:, None, None]
    pts = np.broadcast_to(np.asarray(control, dtype=float), (u.shape[0],) + np.shape(control)).copy()
    for k in range(pts.shape[1] - 1, 0, -1):
        pts = (1.0 - u[:, :, :]) * pts[:, :k] + u[:, :, :] * pts[:, 1:k + 1]
    return pts[:, 0, :]


@dataclass(frozen=True)
class TrajectoryParams:
    """Control points are drawn uniformly (by area) in the half-annulus ``y >= 0``
    whose distances to the DMA centre lie in ``[r0_min, r0_max]``."""

    n_control: int = 6
    steps: int = 100
    mean_speed: float = 10.0
    r0_min: float | None = None
    r0_max: float | None = None

    @classmethod
    def default_for(cls, geom: DmaGeometry, **kw) -> TrajectoryParams:
        reg = field_regions(geom)
        kw.setdefault("r0_min", reg.r_fresnel)
        kw.setdefault("r0_max", 1.2 * reg.r_rayleigh)
        return cls(**kw)


@dataclass(frozen=True)
class Trajectory:
    control_points: np.ndarray
    times: np.ndarray
    xy: np.ndarray
    mean_speed: float
    static: bool = False

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def path_length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.xy, axis=0).T)))

    def xy_at(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Linear interpolation between samples; clamped at both ends."""
        t = np.asarray(t, dtype=float)
        return np.interp(t, self.times, self.xy[:, 0]), np.interp(t, self.times, self.xy[:, 1])

    def position(self, t: float) -> PolarPosition:
        x, y = self.xy_at(t)
        return from_cartesian(float(x), float(y))

    def speed_at(self, t: float) -> float:
        """Speed on the sample segment containing ``t``."""
        if self.static:
            return 0.0
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2))
        seg = self.xy[k + 1] - self.xy[k]
        return float(math.hypot(*seg) / (self.times[k + 1] - self.times[k]))


def bezier_trajectory(control: np.ndarray, steps: int, mean_speed: float) -> Trajectory:
    """Sample the curve at ``steps`` uniform parameters and scale time to ``mean_speed``."""
    control = np.asarray(control, dtype=float)
    if control.shape[0] < 2 or steps < 2:
        raise DomainError("need at least 2 control points and 2 steps")
    if not mean_speed > 0:
        raise DomainError("mean speed must be positive")
    if np.all(control == control[0]):
        # all control points coincide: keep unit time steps, no speed normalization
        xy = np.repeat(control[:1], steps, axis=0)
        return Trajectory(control, np.arange(steps, dtype=float), xy, 0.0, static=True)
    xy = de_casteljau(control, np.linspace(0.0, 1.0, steps))
    length = float(np.sum(np.hypot(*np.diff(xy, axis=0).T)))
    # a single global time unit: time per step proportional to parameter step
    duration = length / mean_speed
    times = np.linspace(0.0, duration, steps)
    return Trajectory(control, times, xy, length / duration)


def sample_control_points(rng: np.random.Generator, geom: DmaGeometry, params: TrajectoryParams) -> np.ndarray:
    r_lo = float(geom.r_from_r0(params.r0_min))
    r_hi = float(geom.r_from_r0(params.r0_max))
    if not r_hi > r_lo:
        raise DomainError(f"degenerate annulus: in-plane radii [{r_lo}, {r_hi}]")
    rad = np.sqrt(rng.uniform(r_lo ** 2, r_hi ** 2, params.n_control))
    ang = rng.uniform(0.0, math.pi, params.n_control)
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])


def generate_trajectory(rng: np.random.Generator, geom: DmaGeometry, params: TrajectoryParams) -> Trajectory:
    if params.n_control < 2 or params.steps < 2:
        raise DomainError("need at least 2 control points and 2 steps")
    if params.r0_min is None or params.r0_max is None:
        params = TrajectoryParams.default_for(geom, n_control=params.n_control, steps=params.steps,
                                              mean_speed=params.mean_speed)
    control = sample_control_points(rng, geom, params)
    return bezier_trajectory(control, params.steps, params.mean_speed)
