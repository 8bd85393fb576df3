"""Sequential power-allocation environment.

Each step the agent chooses an N x K matrix of transmit powers. The environment
evaluates every user's outage probability analytically from the current
geometry and LoS states, scores the allocation, then moves the UAVs and
evolves the LoS states.
"""

from __future__ import annotations

import collections
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import los_probability, path_gain_linear, sample_los
from .config import ScenarioConfig
from .geometry import (DeterministicPath, GaussMarkovParams, MobilityState, Position,
                       gauss_markov_step, in_critical_zone, link_geometry, path_position)
from .outage import user_outage


@dataclass
class EnvState:
    t: int
    positions: np.ndarray         # (N, 3)
    velocities: np.ndarray        # (N, 2)
    mean_velocities: np.ndarray   # (N, 2)
    los: np.ndarray               # (N, K) bool

    def copy(self) -> "EnvState":
        return EnvState(self.t, self.positions.copy(), self.velocities.copy(),
                        self.mean_velocities.copy(), self.los.copy())


@dataclass
class StepOutcome:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


def compute_reward(alloc, eps, thresholds, p_max: float, norm: str = "total") -> float:
    """Unused-power fraction minus the fraction of users above their threshold.

    ``norm="total"`` divides the power by ``N*K*p_max``; ``norm="per_user"`` uses
    ``K*p_max``, identical for a single user.
    """
    alloc = np.atleast_2d(np.asarray(alloc, dtype=float))
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
    n, k = alloc.shape
    if eps.shape != (n,) or thresholds.shape != (n,):
        raise ValueError("eps and thresholds need one entry per user")
    if norm not in ("total", "per_user"):
        raise ValueError(f"unknown reward normalization {norm!r}")
    denom = (n * k if norm == "total" else k) * p_max
    power_term = 1.0 - alloc.sum() / denom
    return float(power_term - np.count_nonzero(eps > thresholds) / n)


def action_decode(raw, p_max: float, shape: tuple[int, int]) -> np.ndarray:
    """Map raw agent outputs in [-1, 1] to watts: ``(raw + 1) / 2 * p_max``."""
    raw = np.asarray(raw, dtype=float).reshape(-1)
    if raw.size != shape[0] * shape[1]:
        raise ValueError(f"expected {shape[0] * shape[1]} raw actions, got {raw.size}")
    if np.isnan(raw).any():
        raise ValueError("NaN in raw action")
    raw = np.clip(raw, -1.0, 1.0)
    return ((raw + 1.0) / 2.0 * p_max).reshape(shape)


def link_gains(positions, bs, params, los) -> np.ndarray:
    """(N, K) linear gains for the given LoS states."""
    n, k = len(positions), len(bs)
    dist = np.empty((n, k))
    for i in range(n):
        for j in range(k):
            dist[i, j] = link_geometry(positions[i], bs[j])[0]
    return path_gain_linear(dist, los, params)


def elevations(positions, bs) -> np.ndarray:
    n, k = len(positions), len(bs)
    out = np.empty((n, k))
    for i in range(n):
        for j in range(k):
            out[i, j] = link_geometry(positions[i], bs[j])[1]
    return out


def evaluate_outage(alloc, positions, los, bs, scenario: ScenarioConfig) -> np.ndarray:
    """Per-user outage probabilities for a logged state and allocation."""
    gains = link_gains(positions, bs, scenario.channel, los)
    s = scenario.resolved_sensitivity()
    dr = scenario.channel.dynamic_range
    return np.array([user_outage(alloc[i], gains[i], s, dr).epsilon
                     for i in range(len(positions))])


class PowerControlEnv:
    """Gym-style environment over a :class:`ScenarioConfig`."""

    def __init__(self, scenario: ScenarioConfig):
        self.scenario = scenario
        self.bs = scenario.bs_array()
        self.n_users = scenario.n_uavs
        self.k_bs = len(self.bs)
        self.p_max = scenario.p_max
        self.sensitivity = scenario.resolved_sensitivity()
        self.zone = scenario.reliability.critical_zone
        self.episode_length = scenario.episode_length
        self.diagnostics: collections.Counter = collections.Counter()
        w, h = scenario.area
        mob = scenario.mobility
        if mob.kind == "path":
            start = mob.start or (0.0, 0.0)
            end = mob.end or (w, h)
            self.path = DeterministicPath(Position(*start, scenario.uav_height),
                                          Position(*end, scenario.uav_height),
                                          scenario.episode_length)
        else:
            self.path = None
        self.state: EnvState | None = None

    @property
    def action_shape(self) -> tuple[int, int]:
        return (self.n_users, self.k_bs)

    @property
    def action_size(self) -> int:
        return self.n_users * self.k_bs

    @property
    def observation_size(self) -> int:
        n, k = self.n_users, self.k_bs
        return 2 * n + n * k + (n if self.scenario.include_zone_flag else 0)

    def decode_action(self, raw) -> np.ndarray:
        return action_decode(raw, self.p_max, self.action_shape)

    def reset(self, seed: int | None = None):
        ss = np.random.SeedSequence(seed)
        self._mob_rng, self._los_rng, place_rng = (np.random.default_rng(s) for s in ss.spawn(3))
        n = self.n_users
        w, h = self.scenario.area
        z = self.scenario.uav_height
        if self.path is not None:
            p0 = path_position(self.path, 0)
            positions = np.tile(np.array(p0, dtype=float), (n, 1))
            velocities = np.zeros((n, 2))
            mean_v = np.zeros((n, 2))
        else:
            xy = place_rng.uniform((0.0, 0.0), (w, h), size=(n, 2))
            positions = np.column_stack([xy, np.full(n, z)])
            heading = place_rng.uniform(-math.pi, math.pi, size=n)
            mean_v = self.scenario.mobility.mean_speed * np.column_stack(
                [np.cos(heading), np.sin(heading)])
            velocities = mean_v.copy()
        los = sample_los(None, self._los_probs(positions), 0.0, self._los_rng)
        self.state = EnvState(0, positions, velocities, mean_v, los)
        return self.observe(), {"t": 0}

    def _los_probs(self, positions) -> np.ndarray:
        return los_probability(elevations(positions, self.bs), self.scenario.channel)

    def gains(self) -> np.ndarray:
        st = self.state
        return link_gains(st.positions, self.bs, self.scenario.channel, st.los)

    def in_zone(self) -> np.ndarray:
        return np.array([in_critical_zone(p, self.zone) for p in self.state.positions])

    def thresholds(self) -> np.ndarray:
        rel = self.scenario.reliability
        return np.where(self.in_zone(), rel.eps_inside, rel.eps_outside)

    def observe(self) -> np.ndarray:
        st = self.state
        w, h = self.scenario.area
        parts = [(st.positions[:, :2] / np.array([w, h])).ravel(),
                 st.los.astype(float).ravel()]
        if self.scenario.include_zone_flag:
            parts.append(self.in_zone().astype(float))
        return np.concatenate(parts)

    def step(self, alloc) -> StepOutcome:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        if self.state.t >= self.episode_length:
            raise RuntimeError("episode is over; call reset()")
        alloc = np.asarray(alloc, dtype=float).reshape(self.action_shape)
        if np.isnan(alloc).any():
            raise ValueError("NaN in power allocation")
        clipped = np.clip(alloc, 0.0, self.p_max)
        if not np.array_equal(clipped, alloc):
            self.diagnostics["clipped_actions"] += 1
        alloc = clipped

        st = self.state
        gains = self.gains()
        eps = np.array([user_outage(alloc[i], gains[i], self.sensitivity,
                                    self.scenario.channel.dynamic_range).epsilon
                        for i in range(self.n_users)])
        in_zone = self.in_zone()
        rel = self.scenario.reliability
        thr = np.where(in_zone, rel.eps_inside, rel.eps_outside)
        reward = compute_reward(alloc, eps, thr, self.p_max, self.scenario.reward_power_norm)
        info = {
            "t": st.t,
            "epsilon": eps,
            "threshold": thr,
            "in_zone": in_zone,
            "power_fraction": float(alloc.sum() / (self.n_users * self.k_bs * self.p_max)),
            "violations": int(np.count_nonzero(eps > thr)),
            "positions": st.positions.copy(),
            "los": st.los.copy(),
            "alloc": alloc.copy(),
        }

        self._advance()
        done = self.state.t >= self.episode_length
        return StepOutcome(self.observe(), reward, done, info)

    def _advance(self) -> None:
        st = self.state
        t_next = st.t + 1
        if self.path is not None:
            p = path_position(self.path, t_next)
            positions = np.tile(np.array(p, dtype=float), (self.n_users, 1))
            velocities = st.velocities
        else:
            mob = self.scenario.mobility
            positions = np.empty_like(st.positions)
            velocities = np.empty_like(st.velocities)
            for i in range(self.n_users):
                params = GaussMarkovParams(tuple(st.mean_velocities[i]), mob.memory,
                                           mob.noise, mob.v_max)
                nxt = gauss_markov_step(MobilityState(st.positions[i], st.velocities[i]),
                                        params, self._mob_rng, self.scenario.area)
                positions[i], velocities[i] = nxt.position, nxt.velocity
        los = sample_los(st.los, self._los_probs(positions),
                         self.scenario.channel.los_persistence, self._los_rng)
        self.state = EnvState(t_next, positions, velocities, st.mean_velocities, los)
