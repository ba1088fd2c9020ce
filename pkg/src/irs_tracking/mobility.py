"""Three-stage user movement inside a circle: radial in, counter-clockwise arc, radial out."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from irs_tracking.geometry import Direction, PlaneFrame, direction_from_vector


@dataclass(frozen=True)
class MobilityConfig:
    center: tuple[float, float] = (-20.0, 20.0)
    r: float = 15.0
    r_C: float = 7.5
    v: float = 5.0 / 3.6
    user_height: float = 1.5

    def __post_init__(self):
        if not 0 < self.r_C < self.r:
            raise ValueError("need 0 < r_C < r")
        if self.v <= 0:
            raise ValueError("speed must be positive")


@dataclass(frozen=True)
class Trajectory:
    cfg: MobilityConfig
    entry_angle: float
    exit_angle: float  # unwrapped: exit_angle >= entry_angle

    @property
    def arc_angle(self) -> float:
        return self.exit_angle - self.entry_angle

    @property
    def stage_boundaries(self) -> tuple[float, float]:
        t1 = (self.cfg.r - self.cfg.r_C) / self.cfg.v
        return t1, t1 + self.cfg.r_C * self.arc_angle / self.cfg.v

    @property
    def total_duration(self) -> float:
        return self.stage_boundaries[1] + (self.cfg.r - self.cfg.r_C) / self.cfg.v

    def positions(self, t) -> np.ndarray:
        """Vectorized position lookup; returns ``(..., 3)``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.total_duration + 1e-12):
            raise ValueError("time outside the trajectory")
        c = self.cfg
        t1, t2 = self.stage_boundaries
        radius = np.where(t < t1, c.r - c.v * t, np.where(t <= t2, c.r_C, c.r_C + c.v * (t - t2)))
        angle = np.where(
            t < t1,
            self.entry_angle,
            np.where(t <= t2, self.entry_angle + c.v * (t - t1) / c.r_C, self.exit_angle),
        )
        x = c.center[0] + radius * np.cos(angle)
        y = c.center[1] + radius * np.sin(angle)
        return np.stack([x, y, np.full_like(x, c.user_height)], axis=-1)

    def summary(self) -> dict:
        t1, t2 = self.stage_boundaries
        return {
            "entry_angle_deg": float(np.rad2deg(self.entry_angle)),
            "exit_angle_deg": float(np.rad2deg(self.exit_angle % (2 * np.pi))),
            "arc_angle_deg": float(np.rad2deg(self.arc_angle)),
            "t_stage1_end": t1,
            "t_stage2_end": t2,
            "total_duration": self.total_duration,
        }


@dataclass(frozen=True)
class StaticTrajectory:
    """A user that does not move, for controlled experiments."""

    position: tuple[float, float, float]
    total_duration: float

    def positions(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.total_duration + 1e-12):
            raise ValueError("time outside the trajectory")
        return np.broadcast_to(np.asarray(self.position, dtype=float), t.shape + (3,)).copy()

    def summary(self) -> dict:
        return {"static_position": list(self.position), "total_duration": self.total_duration}


def build_trajectory(cfg: MobilityConfig, rng: np.random.Generator) -> Trajectory:
    entry = rng.uniform(0, 2 * np.pi)
    arc = rng.uniform(0, 2 * np.pi)
    return Trajectory(cfg, float(entry), float(entry + arc))


def position_at(traj, t: float) -> np.ndarray:
    return traj.positions(t)


def true_direction_at(traj, t: float, irs_position, irs_frame: PlaneFrame) -> Direction:
    return direction_from_vector(traj.positions(t) - np.asarray(irs_position), irs_frame)
