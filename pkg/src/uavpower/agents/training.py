from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .sac import SacAgent

logger = logging.getLogger(__name__)


def train(env_factory: Callable, agent: SacAgent, budget: int,
          eval_hook: Optional[Callable] = None, eval_interval: int = 0,
          checkpoint_dir=None, checkpoint_interval: int = 0,
          seed: int = 0) -> tuple[SacAgent, list[dict]]:
    """Collect ``budget`` environment steps, updating the agent after warmup.

    Environments come from ``env_factory()`` and must provide ``reset(seed)``,
    ``decode_action(raw)`` and ``step(action)``. Episode ``j`` is reset with
    seed ``seed + j``. The returned log has one record per finished episode
    plus one per evaluation.
    """
    p = agent.params
    if budget < 0:
        raise ValueError("budget must be >= 0")
    env = env_factory()
    log: list[dict] = []
    episode = 0
    obs, _ = env.reset(seed=seed)
    ep_return, ep_len = 0.0, 0
    stats: list[dict] = []
    for step in range(1, budget + 1):
        if agent.steps < p.warmup:
            raw = agent.random_action()
        else:
            raw = agent.act(obs)
        out = env.step(env.decode_action(raw))
        agent.remember(obs, raw, out.reward, out.observation, out.done)
        agent.steps += 1
        ep_return += out.reward
        ep_len += 1
        obs = out.observation

        if (agent.steps > p.warmup and len(agent.buffer) >= p.batch_size
                and agent.steps % p.update_interval == 0):
            stats.append(agent.update(agent.sample_batch()))

        if out.done:
            record = {"kind": "episode", "step": step, "episode": episode,
                      "return": ep_return, "length": ep_len}
            if stats:
                for key in stats[0]:
                    record[key] = float(np.mean([s[key] for s in stats]))
            log.append(record)
            logger.info("episode %d step %d return %.4f", episode, step, ep_return)
            stats = []
            episode += 1
            obs, _ = env.reset(seed=seed + episode)
            ep_return, ep_len = 0.0, 0

        if eval_hook is not None and eval_interval and step % eval_interval == 0:
            log.append({"kind": "eval", "step": step, **eval_hook(agent)})
        if checkpoint_dir is not None and checkpoint_interval and step % checkpoint_interval == 0:
            path = Path(checkpoint_dir)
            path.mkdir(parents=True, exist_ok=True)
            agent.save(path / f"checkpoint_{step:08d}.pt")
    return agent, log
