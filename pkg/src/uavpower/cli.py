"""Command line entry point: ``train``, ``eval``, ``baseline`` and ``report``.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .agents import ClosestPolicy, FullPowerPolicy, SacAgent, SacParams, SacPolicy, train
from .config import (ConfigError, ScenarioConfig, format_validation_error, get_scenario,
                     load_scenario)
from .env import PowerControlEnv
from .evaluation import (NoRunsError, empirical_cdf, format_summary, report, run_episode,
                         trace_filename, write_cdf_csv, write_episode_csv, write_manifest,
                         write_trace_csv)

logger = logging.getLogger("uavpower")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: Union[str, ScenarioConfig]
    agent: Literal["sac", "full_power", "closest"] = "sac"
    sac: SacParams = SacParams()
    budget: int = Field(300_000, ge=0)
    eval_episodes: int = Field(50, ge=1)
    eval_seed: int = 10_000
    eval_interval: int = Field(0, ge=0)
    checkpoint_interval: int = Field(0, ge=0)
    seed: int = 0
    out: Optional[str] = None

    def resolve_scenario(self) -> ScenarioConfig:
        if isinstance(self.scenario, str):
            return get_scenario(self.scenario)
        return self.scenario


def load_run_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(format_validation_error(exc)) from None


def parse_seeds(text: str) -> list[int]:
    """``"3"`` or an inclusive range ``"0..9"``."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(text)]
    except ValueError:
        raise ConfigError(f"seeds: expected N or A..B, got {text!r}") from None


def evaluate_policies(policies, scenario: ScenarioConfig, seeds, out_dir) -> dict:
    """Run every policy on every seed; write traces, time series and CDFs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    traces: dict[str, list] = {}
    for policy in policies:
        for seed in seeds:
            trace = run_episode(policy, PowerControlEnv(scenario), seed)
            write_episode_csv(trace, out_dir / trace_filename(trace.policy, seed))
            traces.setdefault(trace.policy, []).append(trace)
    first = {name: ts[0] for name, ts in traces.items()}
    write_trace_csv(first, out_dir / "outage.csv", "outage")
    write_trace_csv(first, out_dir / "power.csv", "power")
    for name, ts in traces.items():
        eps = [t.epsilon.ravel() for t in ts]
        zone = [t.in_zone.ravel() for t in ts]
        upf = [t.user_power_fraction.ravel() for t in ts]
        write_cdf_csv(empirical_cdf(np.concatenate(eps), np.concatenate(zone)),
                      out_dir / f"outage_cdf_{name}.csv", log10=True)
        write_cdf_csv(empirical_cdf(np.concatenate(upf), np.concatenate(zone)),
                      out_dir / f"power_cdf_{name}.csv", log10=False)
    return traces


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    scenario = cfg.resolve_scenario()
    out = Path(args.out or cfg.out or "runs/latest")
    out.mkdir(parents=True, exist_ok=True)
    seeds = list(range(cfg.eval_seed, cfg.eval_seed + cfg.eval_episodes))
    if cfg.agent == "sac":
        env = PowerControlEnv(scenario)
        agent = SacAgent(env.observation_size, env.action_size, cfg.sac)

        def eval_hook(a):
            tr = run_episode(SacPolicy(a), PowerControlEnv(scenario), cfg.eval_seed)
            return {"mean_power_fraction": float(tr.power_fraction.mean()),
                    "violation_rate": float(np.mean(tr.epsilon > tr.threshold))}

        agent, log = train(lambda: PowerControlEnv(scenario), agent, cfg.budget,
                           eval_hook=eval_hook, eval_interval=cfg.eval_interval,
                           checkpoint_dir=out / "checkpoints" if cfg.checkpoint_interval else None,
                           checkpoint_interval=cfg.checkpoint_interval, seed=cfg.seed)
        agent.save(out / "agent.pt")
        (out / "training_log.json").write_text(json.dumps(log, indent=1) + "\n")
        policies = [ClosestPolicy(), FullPowerPolicy(), SacPolicy(agent)]
    else:
        policies = [ClosestPolicy() if cfg.agent == "closest" else FullPowerPolicy()]
    evaluate_policies(policies, scenario, seeds, out)
    write_manifest(out, cfg, cfg.seed, {"scenario": scenario.model_dump(mode="json")})
    print(format_summary(report(out)))
    return EXIT_OK


def cmd_eval(args) -> int:
    scenario = get_scenario(args.scenario)
    seeds = parse_seeds(args.seeds)
    agent = SacAgent.load(args.checkpoint)
    env = PowerControlEnv(scenario)
    if (agent.obs_dim, agent.act_dim) != (env.observation_size, env.action_size):
        raise ConfigError(
            f"checkpoint: agent dims {(agent.obs_dim, agent.act_dim)} do not match scenario "
            f"{args.scenario!r} {(env.observation_size, env.action_size)}")
    out = Path(args.out)
    evaluate_policies([ClosestPolicy(), FullPowerPolicy(), SacPolicy(agent)], scenario, seeds, out)
    write_manifest(out, scenario, seeds[0], {"checkpoint": str(args.checkpoint), "seeds": seeds})
    print(format_summary(report(out)))
    return EXIT_OK


def cmd_baseline(args) -> int:
    scenario = get_scenario(args.scenario)
    seeds = parse_seeds(args.seeds)
    policy = ClosestPolicy() if args.policy == "closest" else FullPowerPolicy()
    out = Path(args.out)
    evaluate_policies([policy], scenario, seeds, out)
    write_manifest(out, scenario, seeds[0], {"policy": args.policy, "seeds": seeds})
    print(format_summary(report(out)))
    return EXIT_OK


def cmd_report(args) -> int:
    print(format_summary(report(args.run_dir)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavpower", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an agent from a JSON run config and evaluate it")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint next to both baselines")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--seeds", default="0")
    p.add_argument("--out", default="runs/eval")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="evaluate a fixed baseline policy")
    p.add_argument("--policy", required=True, choices=["closest", "full_power"])
    p.add_argument("--scenario", required=True)
    p.add_argument("--seeds", default="0")
    p.add_argument("--out", default="runs/baseline")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("report", help="summarise the traces of a run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, NoRunsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 2
        logger.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
