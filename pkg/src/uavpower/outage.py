"""Outage probability of a sum of independent exponentials (hypoexponential law).

For distinct rates ``l_1..l_m`` the tail is::

    P(T > s) = sum_k A_k exp(-l_k s),    A_k = prod_{j != k} l_j / (l_j - l_k)

and the outage ``P(T < s)`` is evaluated as ``sum_k A_k (1 - exp(-l_k s))``
with ``expm1`` so that tiny outage values keep their relative accuracy. When
the alternating coefficients make that sum ill-conditioned, the CDF is read off
the absorbing Markov chain instead (see :func:`stable_cdf`), which only ever
adds non-negative numbers.
"""

from __future__ import annotations

import collections
import math
from dataclasses import dataclass

import numpy as np

from .channel import link_rates

UNIT_ROUNDOFF = np.finfo(float).eps / 2
# Fall back when the closed form's estimated relative error exceeds this.
FALLBACK_RTOL = 1e-9

CLOSED_FORM = "closed_form"
STABLE_FALLBACK = "stable_fallback"
MONTE_CARLO = "monte_carlo"

diagnostics: collections.Counter = collections.Counter()


@dataclass(frozen=True)
class HypoExp:
    rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if not rates:
            raise ValueError("at least one rate is required")
        if any(not (r > 0 and math.isfinite(r)) for r in rates):
            raise ValueError(f"rates must be finite and > 0, got {rates}")
        if len(set(rates)) != len(rates):
            raise ValueError("rates must be pairwise distinct")
        object.__setattr__(self, "rates", rates)

    @property
    def m(self) -> int:
        return len(self.rates)


@dataclass(frozen=True)
class OutageResult:
    epsilon: float
    method: str


def coefficients(d: HypoExp) -> np.ndarray:
    lam = np.asarray(d.rates)
    a = np.empty_like(lam)
    for k, lk in enumerate(lam):
        others = np.delete(lam, k)
        a[k] = np.prod(others / (others - lk))
    return a


def _check_s(s: float) -> float:
    s = float(s)
    if not s >= 0.0:
        raise ValueError(f"threshold must be >= 0, got {s}")
    return s


def _clamp(x: float) -> float:
    if x < 0.0 or x > 1.0:
        diagnostics["clamped"] += 1
        return min(max(x, 0.0), 1.0)
    return x


def _closed_form_cdf(d: HypoExp, s: float) -> tuple[float, float]:
    """Closed-form CDF and a bound on its absolute rounding error."""
    lam = np.asarray(d.rates)
    terms = coefficients(d) * -np.expm1(-lam * s)
    value = math.fsum(terms)
    err = (d.m + 4) * UNIT_ROUNDOFF * math.fsum(np.abs(terms))
    return value, err


def stable_cdf(d: HypoExp, s: float) -> float:
    """CDF via ``exp(Q s)`` of the absorbing phase-type generator ``Q``.

    ``Q`` is upper bidiagonal (phase k -> k+1 at rate l_k, the last phase leads
    to absorption). Writing ``exp(Q t) = exp(-L t) exp((Q + L I) t)`` with
    ``L = max l_k`` makes every matrix involved entrywise non-negative, so the
    Taylor series and the repeated squaring keep each entry, in particular
    the absorbed mass, accurate to a small relative error.
    """
    s = _check_s(s)
    if s == 0.0:
        return 0.0
    lam = np.asarray(d.rates)
    m = d.m
    big = float(lam.max())
    shifted = np.zeros((m + 1, m + 1))
    idx = np.arange(m)
    shifted[idx, idx] = big - lam
    shifted[idx, idx + 1] = lam
    shifted[m, m] = big
    # Row sums of the shifted generator all equal `big`.
    n_sq = max(0, math.ceil(math.log2(big * s / 0.5))) if big * s > 0.5 else 0
    tau = s / 2.0**n_sq
    b = shifted * tau
    term = np.eye(m + 1)
    total = np.eye(m + 1)
    for n in range(1, m + 31):
        term = term @ b / n
        total += term
    e = total * math.exp(-big * tau)
    for _ in range(n_sq):
        e = e @ e
    return _clamp(float(e[0, m]))


def _evaluate(d: HypoExp, s: float) -> OutageResult:
    if s == 0.0:
        return OutageResult(0.0, CLOSED_FORM)
    value, err = _closed_form_cdf(d, s)
    if err <= FALLBACK_RTOL * abs(value) and value > 0.0:
        return OutageResult(_clamp(value), CLOSED_FORM)
    diagnostics["fallback"] += 1
    return OutageResult(stable_cdf(d, s), STABLE_FALLBACK)


def outage(d: HypoExp, s: float) -> OutageResult:
    """``P(T < s)`` with the evaluation route used."""
    return _evaluate(d, _check_s(s))


def survival(d: HypoExp, s: float) -> float:
    s = _check_s(s)
    if s == 0.0:
        return 1.0
    lam = np.asarray(d.rates)
    terms = coefficients(d) * np.exp(-lam * s)
    value = math.fsum(terms)
    err = (d.m + 4) * UNIT_ROUNDOFF * math.fsum(np.abs(terms))
    if err <= FALLBACK_RTOL * max(abs(value), UNIT_ROUNDOFF) or err <= 1e-15:
        return _clamp(value)
    diagnostics["fallback"] += 1
    return _clamp(1.0 - stable_cdf(d, s))


def outage_mc(d: HypoExp, s: float, n_samples: int, rng: np.random.Generator,
              chunk: int = 1_000_000) -> tuple[float, float]:
    """Brute-force estimate of ``P(T < s)`` and its binomial standard error."""
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    s = _check_s(s)
    scales = 1.0 / np.asarray(d.rates)
    hits = 0
    left = n_samples
    buf, total = np.empty(min(chunk, left)), np.empty(min(chunk, left))
    while left > 0:
        n = min(chunk, left)
        b, tot = buf[:n], total[:n]
        tot.fill(0.0)
        for scale in scales:
            rng.standard_exponential(out=b)
            b *= scale
            tot += b
        hits += int(np.count_nonzero(tot < s))
        left -= n
    p = hits / n_samples
    return p, math.sqrt(p * (1.0 - p) / n_samples)


def user_outage(alloc_row, gains_row, sensitivity: float,
                dynamic_range: float = math.inf) -> OutageResult:
    """Outage of one user given its K transmit powers and linear gains."""
    if not sensitivity > 0.0:
        raise ValueError(f"sensitivity must be > 0, got {sensitivity}")
    rates = link_rates(alloc_row, gains_row, dynamic_range)
    active = rates[rates > 0]
    if active.size == 0:
        return OutageResult(1.0, CLOSED_FORM)
    return _evaluate(HypoExp(tuple(active)), float(sensitivity))
