"""Scenario configuration and the built-in scenario registry."""

from __future__ import annotations

import hashlib
import json
import math
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .channel import ChannelParams, path_gain_linear
from .geometry import CriticalZone, link_geometry

__all__ = [
    "ConfigError", "MobilityConfig", "ReliabilityConfig", "ScenarioConfig",
    "calibrate_sensitivity", "get_scenario", "SCENARIOS", "config_hash",
]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


class _Model(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class MobilityConfig(_Model):
    kind: Literal["path", "gauss_markov"] = "path"
    # Straight path, (x, y) in meters. None means the area's lower-left and
    # upper-right corners.
    start: Optional[tuple[float, float]] = None
    end: Optional[tuple[float, float]] = None
    # Gauss-Markov, meters per slot.
    mean_speed: float = Field(10.0, ge=0.0)
    memory: float = Field(0.8, ge=0.0, le=1.0)
    noise: float = Field(3.0, ge=0.0)
    v_max: float = Field(30.0, gt=0.0)


class ReliabilityConfig(_Model):
    zone: tuple[float, float, float, float]  # x_min, x_max, y_min, y_max
    eps_outside: float = Field(gt=0.0, lt=1.0)
    eps_inside: float = Field(gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _stricter_inside(self):
        if not self.eps_inside < self.eps_outside:
            raise ValueError("eps_inside must be < eps_outside")
        x0, x1, y0, y1 = self.zone
        if not (x0 < x1 and y0 < y1):
            raise ValueError("zone must have x_min < x_max and y_min < y_max")
        return self

    @property
    def critical_zone(self) -> CriticalZone:
        return CriticalZone(*self.zone)


class ScenarioConfig(_Model):
    name: str = "custom"
    area: tuple[float, float]
    bs_positions: Optional[list[tuple[float, float]]] = None
    bs_count: Optional[int] = Field(None, ge=1)
    bs_seed: int = 0
    bs_height: float = Field(25.0, ge=0.0)
    uav_height: float = Field(100.0, gt=0.0)
    n_uavs: int = Field(1, ge=1)
    mobility: MobilityConfig = MobilityConfig()
    channel: ChannelParams = ChannelParams()
    reliability: ReliabilityConfig
    p_max: float = Field(1.0, gt=0.0)
    sensitivity: Optional[float] = Field(None, gt=0.0)
    outage_at_center: float = Field(1e-3, gt=0.0, lt=1.0)
    episode_length: int = Field(ge=1)
    reward_power_norm: Literal["total", "per_user"] = "total"
    include_zone_flag: bool = True

    @model_validator(mode="after")
    def _check_layout(self):
        if (self.bs_positions is None) == (self.bs_count is None):
            raise ValueError("give exactly one of bs_positions or bs_count")
        w, h = self.area
        if not (w > 0 and h > 0):
            raise ValueError("area sides must be > 0")
        for x, y in self.bs_positions or []:
            if not (0 <= x <= w and 0 <= y <= h):
                raise ValueError(f"BS at ({x}, {y}) lies outside the area")
        x0, x1, y0, y1 = self.reliability.zone
        if not (0 <= x0 and x1 <= w and 0 <= y0 and y1 <= h):
            raise ValueError("critical zone must lie inside the area")
        return self

    @property
    def k_bs(self) -> int:
        return len(self.bs_positions) if self.bs_positions is not None else self.bs_count

    def bs_array(self) -> np.ndarray:
        """(K, 3) BS coordinates in meters."""
        if self.bs_positions is not None:
            xy = np.asarray(self.bs_positions, dtype=float)
        else:
            rng = np.random.default_rng(self.bs_seed)
            xy = rng.uniform((0.0, 0.0), self.area, size=(self.bs_count, 2))
        return np.column_stack([xy, np.full(len(xy), self.bs_height)])

    def resolved_sensitivity(self) -> float:
        if self.sensitivity is not None:
            return self.sensitivity
        return calibrate_sensitivity(self)


def calibrate_sensitivity(cfg: ScenarioConfig) -> float:
    """Sensitivity for which the closest BS at full power, NLoS, gives
    ``cfg.outage_at_center`` to a UAV hovering at the area center."""
    center = (cfg.area[0] / 2, cfg.area[1] / 2, cfg.uav_height)
    bs = cfg.bs_array()
    dist = min(link_geometry(center, b)[0] for b in bs)
    g = path_gain_linear(dist, False, cfg.channel)
    return -cfg.p_max * g * math.log1p(-cfg.outage_at_center)


def load_scenario(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(format_validation_error(exc)) from None


def format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "; ".join(lines)


def config_hash(model: BaseModel) -> str:
    blob = json.dumps(model.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# Base-station layout of the single-UAV scenario, km.
_SINGLE_BS_KM = [(0.05, 0.15), (0.06, 0.305), (0.150, 0.275),
                 (0.210, 0.05), (0.310, 0.135), (0.360, 0.200)]

_SINGLE = dict(
    area=(1500.0, 1500.0),
    bs_positions=[(1000 * x, 1000 * y) for x, y in _SINGLE_BS_KM],
    reliability=dict(zone=(750.0, 1000.0, 750.0, 1000.0), eps_outside=1e-2, eps_inside=1e-7),
    # calibrate_sensitivity of this layout, frozen.
    sensitivity=1.2303236619895867e-17,
)

SCENARIOS: dict[str, dict] = {
    "single_uav": dict(_SINGLE, name="single_uav", episode_length=1500),
    "single_uav_short": dict(_SINGLE, name="single_uav_short", episode_length=300),
    "multi_uav": dict(
        name="multi_uav",
        area=(3000.0, 3000.0),
        bs_count=19,
        bs_seed=2024,
        n_uavs=3,
        mobility=dict(kind="gauss_markov"),
        reliability=dict(zone=(750.0, 2000.0, 750.0, 2000.0), eps_outside=1e-2, eps_inside=1e-5),
        sensitivity=5.320892777829785e-17,
        episode_length=1500,
    ),
}


def get_scenario(name: str, **overrides) -> ScenarioConfig:
    if name not in SCENARIOS:
        raise ConfigError(f"scenario: unknown scenario {name!r} (known: {', '.join(SCENARIOS)})")
    return load_scenario({**SCENARIOS[name], **overrides})
