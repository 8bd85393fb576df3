"""Soft actor-critic with a tanh-squashed Gaussian policy, twin critics and
automatic entropy-temperature tuning."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field

from .replay import Batch, ReplayBuffer

CHECKPOINT_VERSION = 1
LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
_LOG2 = math.log(2.0)

_ACTIVATIONS = {"relu": nn.ReLU, "tanh": nn.Tanh, "elu": nn.ELU}


class NonFiniteLossError(FloatingPointError):
    pass


class SacParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float = Field(0.99, gt=0.0, lt=1.0)
    tau: float = Field(0.005, gt=0.0, le=1.0)
    lr_policy: float = Field(3e-4, gt=0.0)
    lr_critic: float = Field(3e-4, gt=0.0)
    lr_temperature: float = Field(3e-4, gt=0.0)
    batch_size: int = Field(256, ge=1)
    buffer_capacity: int = Field(100_000, ge=1)
    warmup: int = Field(5_000, ge=0)
    update_interval: int = Field(1, ge=1)
    hidden: tuple[int, ...] = (256, 256)
    activation: str = "relu"
    # None means -(action dimension).
    target_entropy: Optional[float] = None
    init_temperature: float = Field(1.0, gt=0.0)
    seed: int = 0
    dtype: str = "float32"


def mlp(in_dim: int, hidden, out_dim: int, activation: str = "relu") -> nn.Sequential:
    layers: list[nn.Module] = []
    last = in_dim
    for width in hidden:
        layers += [nn.Linear(last, width), _ACTIVATIONS[activation]()]
        last = width
    layers.append(nn.Linear(last, out_dim))
    return nn.Sequential(*layers)


class GaussianPolicy(nn.Module):
    def __init__(self, obs_dim, act_dim, hidden, activation):
        super().__init__()
        self.act_dim = act_dim
        self.net = mlp(obs_dim, hidden, 2 * act_dim, activation)

    def forward(self, obs):
        out = self.net(obs)
        mean, log_std = out[..., :self.act_dim], out[..., self.act_dim:]
        return mean, log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)

    def sample(self, obs, noise):
        """Re-parameterised squashed sample ``tanh(mean + std * noise)`` and its log-density."""
        mean, log_std = self(obs)
        u = mean + log_std.exp() * noise
        # log N(u; mean, std), written in terms of the standard noise.
        logp = (-0.5 * noise.pow(2) - log_std - 0.5 * math.log(2 * math.pi)).sum(-1)
        # log(1 - tanh(u)^2) in a form that stays finite for large |u|.
        logp = logp - (2.0 * (_LOG2 - u - F.softplus(-2.0 * u))).sum(-1)
        return torch.tanh(u), logp


class QNetwork(nn.Module):
    def __init__(self, obs_dim, act_dim, hidden, activation):
        super().__init__()
        self.net = mlp(obs_dim + act_dim, hidden, 1, activation)

    def forward(self, obs, action):
        return self.net(torch.cat([obs, action], dim=-1)).squeeze(-1)


class SacAgent:
    def __init__(self, obs_dim: int, act_dim: int, params: SacParams | None = None):
        self.params = params = params or SacParams()
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.dtype = getattr(torch, params.dtype)
        self.target_entropy = (-float(act_dim) if params.target_entropy is None
                               else params.target_entropy)
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(params.seed)
            net_args = (obs_dim, act_dim, params.hidden, params.activation)
            self.policy = GaussianPolicy(*net_args).to(self.dtype)
            self.q1 = QNetwork(*net_args).to(self.dtype)
            self.q2 = QNetwork(*net_args).to(self.dtype)
        self.q1_target = QNetwork(*net_args).to(self.dtype)
        self.q2_target = QNetwork(*net_args).to(self.dtype)
        self.q1_target.load_state_dict(self.q1.state_dict())
        self.q2_target.load_state_dict(self.q2.state_dict())
        for p in (*self.q1_target.parameters(), *self.q2_target.parameters()):
            p.requires_grad_(False)
        self.log_alpha = torch.tensor(math.log(params.init_temperature), dtype=self.dtype,
                                      requires_grad=True)
        self.policy_opt = torch.optim.Adam(self.policy.parameters(), lr=params.lr_policy)
        self.critic_opt = torch.optim.Adam([*self.q1.parameters(), *self.q2.parameters()],
                                           lr=params.lr_critic)
        self.alpha_opt = torch.optim.Adam([self.log_alpha], lr=params.lr_temperature)
        self.buffer = ReplayBuffer(params.buffer_capacity, obs_dim, act_dim)
        self.generator = torch.Generator().manual_seed(params.seed + 1)
        self.rng = np.random.default_rng(params.seed + 2)
        self.n_updates = 0
        self.steps = 0

    @property
    def temperature(self) -> float:
        return self.log_alpha.detach().exp().item()

    def _tensor(self, x) -> torch.Tensor:
        return torch.as_tensor(np.asarray(x), dtype=self.dtype)

    def noise(self, *shape) -> torch.Tensor:
        return torch.randn(*shape, generator=self.generator, dtype=self.dtype)

    @torch.no_grad()
    def act(self, obs, deterministic: bool = False) -> np.ndarray:
        o = self._tensor(obs).unsqueeze(0)
        mean, log_std = self.policy(o)
        if deterministic:
            a = torch.tanh(mean)
        else:
            a = torch.tanh(mean + log_std.exp() * self.noise(*mean.shape))
        return a.squeeze(0).double().numpy()

    def predict(self, obs) -> np.ndarray:
        return self.act(obs, deterministic=True)

    def _batch_tensors(self, batch: Batch):
        t = self._tensor
        return t(batch.obs), t(batch.action), t(batch.reward), t(batch.next_obs), t(batch.done)

    # The three losses are written as functions of explicit noise so that their
    # gradients can be checked against finite differences.

    def critic_losses(self, batch: Batch, noise_next: torch.Tensor):
        obs, act, rew, next_obs, done = self._batch_tensors(batch)
        with torch.no_grad():
            next_a, next_logp = self.policy.sample(next_obs, noise_next)
            q_next = torch.min(self.q1_target(next_obs, next_a), self.q2_target(next_obs, next_a))
            alpha = self.log_alpha.exp()
            y = rew + self.params.gamma * (1.0 - done) * (q_next - alpha * next_logp)
        loss1 = (self.q1(obs, act) - y).pow(2).mean()
        loss2 = (self.q2(obs, act) - y).pow(2).mean()
        return loss1, loss2, y

    def policy_loss(self, batch: Batch, noise: torch.Tensor):
        obs = self._tensor(batch.obs)
        a, logp = self.policy.sample(obs, noise)
        q = torch.min(self.q1(obs, a), self.q2(obs, a))
        alpha = self.log_alpha.exp().detach()
        return (alpha * logp - q).mean(), logp

    def temperature_loss(self, logp: torch.Tensor):
        return -(self.log_alpha * (logp.detach() + self.target_entropy)).mean()

    def update(self, batch: Batch) -> dict:
        n = len(batch.reward)
        loss1, loss2, _ = self.critic_losses(batch, self.noise(n, self.act_dim))
        _check_finite(critic_loss_1=loss1, critic_loss_2=loss2)
        self.critic_opt.zero_grad()
        (loss1 + loss2).backward()
        self.critic_opt.step()

        for p in (*self.q1.parameters(), *self.q2.parameters()):
            p.requires_grad_(False)
        try:
            pol_loss, logp = self.policy_loss(batch, self.noise(n, self.act_dim))
        finally:
            for p in (*self.q1.parameters(), *self.q2.parameters()):
                p.requires_grad_(True)
        _check_finite(policy_loss=pol_loss)
        self.policy_opt.zero_grad()
        pol_loss.backward()
        self.policy_opt.step()

        t_loss = self.temperature_loss(logp)
        _check_finite(temperature_loss=t_loss)
        self.alpha_opt.zero_grad()
        t_loss.backward()
        self.alpha_opt.step()

        self.soft_update()
        self.n_updates += 1
        return {
            "critic_loss_1": loss1.item(),
            "critic_loss_2": loss2.item(),
            "policy_loss": pol_loss.item(),
            "temperature_loss": t_loss.item(),
            "entropy_estimate": float(-logp.detach().mean()),
            "temperature": self.temperature,
        }

    @torch.no_grad()
    def soft_update(self) -> None:
        tau = self.params.tau
        for net, target in ((self.q1, self.q1_target), (self.q2, self.q2_target)):
            for p, tp in zip(net.parameters(), target.parameters()):
                tp.mul_(1.0 - tau).add_(p, alpha=tau)

    def remember(self, obs, action, reward, next_obs, done) -> None:
        self.buffer.push(obs, action, reward, next_obs, done)

    def sample_batch(self) -> Batch:
        return self.buffer.sample(self.params.batch_size, self.rng)

    def random_action(self) -> np.ndarray:
        return self.rng.uniform(-1.0, 1.0, size=self.act_dim)

    # Checkpoints ---------------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "format_version": CHECKPOINT_VERSION,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "params": self.params.model_dump(mode="json"),
            "policy": self.policy.state_dict(),
            "q1": self.q1.state_dict(),
            "q2": self.q2.state_dict(),
            "q1_target": self.q1_target.state_dict(),
            "q2_target": self.q2_target.state_dict(),
            "log_alpha": self.log_alpha.detach().clone(),
            "n_updates": self.n_updates,
            "steps": self.steps,
        }

    def save(self, path) -> None:
        torch.save(self.state_dict(), path)

    @classmethod
    def load(cls, path) -> "SacAgent":
        state = torch.load(path, weights_only=False)
        if state.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {state.get('format_version')}")
        agent = cls(state["obs_dim"], state["act_dim"], SacParams(**state["params"]))
        for name in ("policy", "q1", "q2", "q1_target", "q2_target"):
            getattr(agent, name).load_state_dict(state[name])
        with torch.no_grad():
            agent.log_alpha.copy_(state["log_alpha"])
        agent.n_updates = state["n_updates"]
        agent.steps = state["steps"]
        return agent


def _check_finite(**losses) -> None:
    for name, value in losses.items():
        if not torch.isfinite(value).all():
            raise NonFiniteLossError(f"{name} is not finite ({value.item()}); update aborted")
