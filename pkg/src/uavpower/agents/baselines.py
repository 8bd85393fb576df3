"""Fixed reference policies."""

from __future__ import annotations

import numpy as np


def act_full_power(n_users: int, k_bs: int, p_max: float) -> np.ndarray:
    """Every BS transmits to every user at ``p_max``."""
    return np.full((n_users, k_bs), float(p_max))


def act_closest(positions, bs, p_max: float) -> np.ndarray:
    """Only the nearest BS (3-D distance, lowest index on ties) serves each user."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    bs = np.asarray(bs, dtype=float)
    alloc = np.zeros((len(positions), len(bs)))
    for i, p in enumerate(positions):
        d = np.linalg.norm(bs - p, axis=1)
        alloc[i, int(np.argmin(d))] = p_max
    return alloc


class FullPowerPolicy:
    name = "COMP"

    def __call__(self, env, obs) -> np.ndarray:
        return act_full_power(env.n_users, env.k_bs, env.p_max)


class ClosestPolicy:
    name = "Closest"

    def __call__(self, env, obs) -> np.ndarray:
        return act_closest(env.state.positions, env.bs, env.p_max)


class SacPolicy:
    """Deterministic (mean) action of a trained agent."""

    name = "SAC"

    def __init__(self, agent):
        self.agent = agent

    def __call__(self, env, obs) -> np.ndarray:
        return env.decode_action(self.agent.act(obs, deterministic=True))
