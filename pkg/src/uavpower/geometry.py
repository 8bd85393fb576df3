"""Positions, critical-zone geometry and UAV movement models."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class DegenerateGeometryError(ValueError):
    pass


class Position(NamedTuple):
    x: float
    y: float
    z: float = 0.0


@dataclass(frozen=True)
class CriticalZone:
    """Closed axis-aligned rectangle (meters)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"empty critical zone: {self}")

    def contains(self, p) -> bool:
        return in_critical_zone(p, self)

    def within(self, other: "CriticalZone") -> bool:
        return (other.x_min <= self.x_min and self.x_max <= other.x_max
                and other.y_min <= self.y_min and self.y_max <= other.y_max)


@dataclass(frozen=True)
class DeterministicPath:
    start: Position
    end: Position
    n_slots: int

    def __post_init__(self):
        if self.n_slots < 1:
            raise ValueError("n_slots must be >= 1")


@dataclass
class MobilityState:
    position: np.ndarray  # (3,)
    velocity: np.ndarray  # (2,) meters per slot


@dataclass(frozen=True)
class GaussMarkovParams:
    mean_velocity: tuple[float, float]
    memory: float
    noise: float
    v_max: float

    def __post_init__(self):
        if not 0.0 <= self.memory <= 1.0:
            raise ValueError("memory must lie in [0, 1]")
        if self.noise < 0.0:
            raise ValueError("noise must be >= 0")
        if self.v_max <= 0.0:
            raise ValueError("v_max must be > 0")


def path_position(path: DeterministicPath, t: float) -> Position:
    if not 0 <= t <= path.n_slots:
        raise IndexError(f"slot {t} outside [0, {path.n_slots}]")
    frac = t / path.n_slots
    x = path.start.x + frac * (path.end.x - path.start.x)
    y = path.start.y + frac * (path.end.y - path.start.y)
    return Position(x, y, path.start.z)


def in_critical_zone(p: Sequence[float], zone: CriticalZone) -> bool:
    return bool(zone.x_min <= p[0] <= zone.x_max and zone.y_min <= p[1] <= zone.y_max)


def link_geometry(uav: Sequence[float], bs: Sequence[float]) -> tuple[float, float]:
    """Return ``(distance_3d, elevation_deg)`` of the BS-to-UAV link."""
    dx, dy, dz = (uav[0] - bs[0], uav[1] - bs[1], uav[2] - bs[2])
    horizontal = math.hypot(dx, dy)
    distance = math.hypot(horizontal, dz)
    if distance == 0.0:
        raise DegenerateGeometryError("UAV and BS positions coincide")
    return distance, math.degrees(math.atan2(dz, horizontal))


def _reflect(coord: float, velocity: float, upper: float) -> tuple[float, float]:
    # Repeated folding handles steps longer than the area side.
    while coord < 0.0 or coord > upper:
        if coord < 0.0:
            coord = -coord
        else:
            coord = 2.0 * upper - coord
        velocity = -velocity
    return coord, velocity


def gauss_markov_step(state: MobilityState, params: GaussMarkovParams,
                      rng: np.random.Generator,
                      area: tuple[float, float]) -> MobilityState:
    """Advance one UAV by one slot.

    The velocity follows ``v' = rho*v + (1-rho)*v_mean + sigma*sqrt(1-rho^2)*w``,
    is clamped to ``v_max`` and then moves the UAV; leaving the area reflects
    the position and flips the offending velocity component.
    """
    rho = params.memory
    w = rng.standard_normal(2)
    v = (rho * state.velocity + (1.0 - rho) * np.asarray(params.mean_velocity, dtype=float)
         + params.noise * math.sqrt(max(0.0, 1.0 - rho * rho)) * w)
    speed = float(np.hypot(v[0], v[1]))
    if speed > params.v_max:
        v = v * (params.v_max / speed)
    x, vx = _reflect(float(state.position[0] + v[0]), float(v[0]), area[0])
    y, vy = _reflect(float(state.position[1] + v[1]), float(v[1]), area[1])
    return MobilityState(np.array([x, y, state.position[2]]), np.array([vx, vy]))
