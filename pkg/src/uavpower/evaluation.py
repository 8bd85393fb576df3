"""Episode traces, empirical CDFs, CSV output and run summaries."""

from __future__ import annotations

import csv
import io
import json
import os
import platform
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import config_hash

# Column order of the figure-style time-series files; COMP is Full Power.
POLICY_ORDER = ("Closest", "COMP", "SAC")
QUANTILES = (0.05, 0.5, 0.95)


class NoRunsError(FileNotFoundError):
    pass


@dataclass
class EpisodeTrace:
    policy: str
    seed: int
    t: np.ndarray               # (L,)
    epsilon: np.ndarray         # (L, N)
    threshold: np.ndarray       # (L, N)
    in_zone: np.ndarray         # (L, N) bool
    power_fraction: np.ndarray  # (L,) of the whole network
    reward: np.ndarray          # (L,)
    positions: np.ndarray       # (L, N, 3)
    los: np.ndarray             # (L, N, K) bool
    alloc: np.ndarray           # (L, N, K) watts
    p_max: float = 1.0

    def __len__(self) -> int:
        return len(self.t)

    @property
    def user_power_fraction(self) -> np.ndarray:
        """(L, N) power spent on each user over that user's ``K * p_max``."""
        return self.alloc.sum(axis=2) / (self.alloc.shape[2] * self.p_max)


def run_episode(policy, env, seed: int) -> EpisodeTrace:
    obs, _ = env.reset(seed=seed)
    rows = []
    while True:
        alloc = np.asarray(policy(env, obs), dtype=float)
        if alloc.shape != env.action_shape:
            raise ValueError(f"policy returned shape {alloc.shape}, env expects {env.action_shape}")
        out = env.step(alloc)
        rows.append((out.info, out.reward))
        obs = out.observation
        if out.done:
            break
    infos = [r[0] for r in rows]
    return EpisodeTrace(
        policy=getattr(policy, "name", type(policy).__name__),
        seed=seed,
        t=np.array([i["t"] for i in infos]),
        epsilon=np.array([i["epsilon"] for i in infos]),
        threshold=np.array([i["threshold"] for i in infos]),
        in_zone=np.array([i["in_zone"] for i in infos]),
        power_fraction=np.array([i["power_fraction"] for i in infos]),
        reward=np.array([r[1] for r in rows]),
        positions=np.array([i["positions"] for i in infos]),
        los=np.array([i["los"] for i in infos]),
        alloc=np.array([i["alloc"] for i in infos]),
        p_max=env.p_max,
    )


@dataclass
class CdfTable:
    values: np.ndarray
    cdf: np.ndarray

    def rows(self):
        return zip(self.values.tolist(), self.cdf.tolist())


def _ecdf(samples) -> CdfTable:
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("empirical_cdf needs at least one sample")
    cdf = np.arange(1, x.size + 1) / x.size
    # Keep the last point of every run of ties.
    last = np.append(x[1:] != x[:-1], True)
    return CdfTable(x[last], cdf[last])


def empirical_cdf(samples, zone_labels=None) -> dict[str, CdfTable]:
    """Empirical CDF per zone; without labels a single ``"all"`` table."""
    samples = np.asarray(samples, dtype=float).ravel()
    if zone_labels is None:
        return {"all": _ecdf(samples)}
    labels = np.asarray(zone_labels, dtype=bool).ravel()
    tables = {}
    for zone, mask in (("inside", labels), ("outside", ~labels)):
        if mask.any():
            tables[zone] = _ecdf(samples[mask])
    if not tables:
        raise ValueError("empirical_cdf needs at least one sample")
    return tables


def fmt(x) -> str:
    """Shortest decimal that round-trips to the same float."""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_trace_csv(traces: dict[str, EpisodeTrace], path, quantity: str = "outage") -> None:
    """Figure-style time series ``t,Closest,COMP,SAC`` (missing policies omitted).

    ``quantity="outage"`` writes each step's worst-user outage probability,
    ``"power"`` the network's total power fraction.
    """
    names = [p for p in POLICY_ORDER if p in traces] + sorted(set(traces) - set(POLICY_ORDER))
    if not names:
        raise ValueError("no traces to write")
    lengths = {len(traces[n]) for n in names}
    if len(lengths) != 1:
        raise ValueError("traces have different time axes")
    t = traces[names[0]].t
    if quantity == "outage":
        cols = [traces[n].epsilon.max(axis=1) for n in names]
    elif quantity == "power":
        cols = [traces[n].power_fraction for n in names]
    else:
        raise ValueError(f"unknown quantity {quantity!r}")
    rows = ([t[j]] + [c[j] for c in cols] for j in range(len(t)))
    atomic_write_text(path, _csv_text(["t", *names], rows))


def write_episode_csv(trace: EpisodeTrace, path) -> None:
    """Full per-(step, user) log, enough to recompute every outage value."""
    n_steps, n_users, k = trace.alloc.shape
    header = (["t", "user", "x", "y", "z", "in_zone", "threshold", "epsilon",
               "user_power_fraction", "power_fraction", "reward"]
              + [f"los_{j}" for j in range(k)] + [f"p_{j}" for j in range(k)])
    upf = trace.user_power_fraction

    def rows():
        for s in range(n_steps):
            for i in range(n_users):
                yield ([trace.t[s], i, *trace.positions[s, i], bool(trace.in_zone[s, i]),
                        trace.threshold[s, i], trace.epsilon[s, i], upf[s, i],
                        trace.power_fraction[s], trace.reward[s]]
                       + [bool(b) for b in trace.los[s, i]] + list(trace.alloc[s, i]))

    atomic_write_text(path, _csv_text(header, rows()))


def read_episode_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} holds no rows")
    cols = {key: np.array([float(r[key]) for r in rows]) for key in rows[0]}
    return cols


def write_cdf_csv(tables: dict[str, CdfTable], path, log10: bool = True) -> None:
    """Long-format ``zone,<abscissa>,cdf``; outage abscissae as log10."""
    def rows():
        for zone, table in tables.items():
            vals = np.log10(np.maximum(table.values, 1e-300)) if log10 else table.values
            for v, c in zip(vals, table.cdf):
                yield [zone, v, c]

    label = "log10_outage" if log10 else "value"
    atomic_write_text(path, _csv_text(["zone", label, "cdf"], rows()))


def trace_filename(policy: str, seed: int) -> str:
    return f"trace_{policy}_seed{seed}.csv"


_TRACE_RE = re.compile(r"^trace_(?P<policy>.+)_seed(?P<seed>-?\d+)\.csv$")


def summarize(episodes: dict[str, list[dict[str, np.ndarray]]]) -> dict:
    """Per-policy, per-zone power, violation rate and outage quantiles."""
    summary = {}
    for policy, parts in sorted(episodes.items()):
        cols = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
        zone = cols["in_zone"].astype(bool)
        entry = {}
        for name, mask in (("inside", zone), ("outside", ~zone), ("all", np.ones_like(zone))):
            if not mask.any():
                continue
            eps = cols["epsilon"][mask]
            entry[name] = {
                "steps": int(mask.sum()),
                "mean_power_fraction": float(cols["user_power_fraction"][mask].mean()),
                "violation_rate": float(np.mean(eps > cols["threshold"][mask])),
                **{f"eps_q{int(q * 100):02d}": float(np.quantile(eps, q)) for q in QUANTILES},
            }
        summary[policy] = entry
    return summary


def report(run_dir) -> dict:
    """Summarise every episode trace in ``run_dir``; writes summary.json/.csv."""
    run_dir = Path(run_dir)
    files = sorted(run_dir.glob("trace_*.csv")) if run_dir.is_dir() else []
    episodes: dict[str, list] = {}
    for f in files:
        m = _TRACE_RE.match(f.name)
        if m:
            episodes.setdefault(m["policy"], []).append(read_episode_csv(f))
    if not episodes:
        raise NoRunsError(f"no runs found in {run_dir}")
    summary = summarize(episodes)
    atomic_write_text(run_dir / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    keys = ["steps", "mean_power_fraction", "violation_rate"] + [
        f"eps_q{int(q * 100):02d}" for q in QUANTILES]
    rows = ([policy, zone] + [entry[k] for k in keys]
            for policy, zones in summary.items() for zone, entry in zones.items())
    atomic_write_text(run_dir / "summary.csv", _csv_text(["policy", "zone", *keys], rows))
    return summary


def format_summary(summary: dict) -> str:
    lines = []
    for policy, zones in summary.items():
        for zone, e in zones.items():
            lines.append(
                f"{policy:8s} {zone:8s} steps={e['steps']:6d} power={e['mean_power_fraction']:.4f} "
                f"violations={e['violation_rate']:.4f} eps_median={e['eps_q50']:.3e}")
    return "\n".join(lines)


def write_manifest(out_dir, config, seed: int, extra: dict | None = None) -> dict:
    import torch

    manifest = {
        "config_hash": config_hash(config),
        "seed": seed,
        "build": {
            "package": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "torch": torch.__version__,
        },
        "config": config.model_dump(mode="json"),
    }
    if extra:
        manifest.update(extra)
    atomic_write_text(Path(out_dir) / "manifest.json",
                      json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
