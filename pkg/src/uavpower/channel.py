"""Air-to-ground link statistics: LoS state, path gain and exponential rates.

Small-scale fading is Rayleigh, so every received-power term ``|h|^2 * P`` is
exponential with mean ``P * g``. Only the deterministic gain ``g`` is modelled
here; the fading itself is integrated out analytically in :mod:`outage`.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)

# Two active rates closer than this (relative) are treated as colliding.
DISTINCT_RTOL = 1e-9
JITTER_STEP = 1e-6


class ChannelParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    los_a: float = 9.61
    los_b: float = Field(0.16, ge=0.0)
    pl0_los_db: float = 30.0
    pl0_nlos_db: float = 40.0
    n_los: float = Field(2.2, gt=0.0)
    n_nlos: float = Field(3.5, gt=0.0)
    d0: float = Field(1.0, gt=0.0)
    antenna_gain_db: float = 0.0
    los_persistence: float = Field(0.9, ge=0.0, le=1.0)
    # Links whose mean received power is this many times below the strongest
    # link of the same user are dropped from the outage sum.
    dynamic_range: float = Field(1e15, gt=1.0)

    @model_validator(mode="after")
    def _nlos_not_better(self):
        if self.n_nlos < self.n_los:
            raise ValueError("n_nlos must be >= n_los")
        if self.pl0_nlos_db < self.pl0_los_db:
            raise ValueError("pl0_nlos_db must be >= pl0_los_db")
        return self


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(lin):
    return 10.0 * np.log10(lin)


def los_probability(elevation_deg, params: ChannelParams):
    """Sigmoid LoS probability ``1 / (1 + a exp(-b (theta - a)))``."""
    theta = np.asarray(elevation_deg, dtype=float)
    p = 1.0 / (1.0 + params.los_a * np.exp(-params.los_b * (theta - params.los_a)))
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def sample_los(prev, stationary_probs, persistence: float,
               rng: np.random.Generator) -> np.ndarray:
    """One step of the per-link two-state LoS chain.

    With probability ``persistence`` a link keeps its previous state, otherwise
    it is redrawn from Bernoulli(stationary prob). The stationary law of the
    chain is therefore the given probability.
    """
    probs = np.asarray(stationary_probs, dtype=float)
    fresh = rng.random(probs.shape) < probs
    if prev is None or persistence == 0.0:
        return fresh
    prev = np.asarray(prev, dtype=bool)
    if prev.shape != probs.shape:
        raise ValueError(f"LoS shape {prev.shape} does not match {probs.shape}")
    if persistence == 1.0:
        return prev.copy()
    keep = rng.random(probs.shape) < persistence
    return np.where(keep, prev, fresh)


def path_gain_linear(distance, los, params: ChannelParams):
    """Deterministic linear power gain of the dual log-distance model."""
    d = np.asarray(distance, dtype=float)
    if np.any(d < params.d0):
        logger.debug("distance below d0=%g clamped", params.d0)
        d = np.maximum(d, params.d0)
    los = np.asarray(los, dtype=bool)
    pl0 = np.where(los, params.pl0_los_db, params.pl0_nlos_db)
    n = np.where(los, params.n_los, params.n_nlos)
    pl_db = pl0 + 10.0 * n * np.log10(d / params.d0)
    g = 10.0 ** (-(pl_db - params.antenna_gain_db) / 10.0)
    return float(g) if g.ndim == 0 else g


def _make_distinct(rates: np.ndarray) -> np.ndarray:
    """Deterministically nudge colliding rates apart (1-D, all > 0)."""
    out = rates.copy()
    order = np.argsort(out, kind="stable")
    accepted: list[float] = []
    rank = 0
    for idx in order:
        r = out[idx]
        while any(abs(r - a) <= DISTINCT_RTOL * max(r, a) for a in accepted):
            rank += 1
            r = out[idx] * (1.0 + JITTER_STEP * rank)
        out[idx] = r
        accepted.append(r)
    return out


def link_rates(alloc, gains, dynamic_range: float = math.inf) -> np.ndarray:
    """Exponential rates ``1 / (P g)`` per (user, BS); 0 marks an inactive link.

    Accepts one user (1-D rows) or the full N x K matrices.
    """
    p = np.asarray(alloc, dtype=float)
    g = np.asarray(gains, dtype=float)
    if p.shape != g.shape:
        raise ValueError(f"allocation shape {p.shape} != gains shape {g.shape}")
    if np.any(~np.isfinite(p)) or np.any(p < 0):
        raise ValueError("transmit powers must be finite and >= 0")
    if np.any(~np.isfinite(g)) or np.any(g <= 0):
        raise ValueError("gains must be finite and > 0")
    squeeze = p.ndim == 1
    p2, g2 = np.atleast_2d(p), np.atleast_2d(g)
    rates = np.zeros_like(p2)
    for i in range(p2.shape[0]):
        means = p2[i] * g2[i]
        # Subnormal means would give infinite rates.
        active = means > np.finfo(float).tiny
        if not active.any():
            continue
        active &= means >= means.max() / dynamic_range
        rates[i, active] = _make_distinct(1.0 / means[active])
    return rates[0] if squeeze else rates
