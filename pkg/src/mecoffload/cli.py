"""Command-line experiment runner.

Subcommands: ``simulate`` (baseline episodes), ``train``, ``evaluate``
(greedy checkpoint episodes), ``sweep`` (long-format parameter sweeps) and
``trace`` (per-task JSON lines plus a battery power trace).

Exit codes: 0 ok, 1 invalid input, 2 runtime failure. Errors are printed
to stderr as one JSON object on one line. Log verbosity comes from the
``MECOFFLOAD_LOG`` environment variable (default ``WARNING``).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import tomli

from .battery import write_trace_csv
from .core import Config, ConfigError, config_from_dict, load_config
from .env import MecEnv
from .experiments import episode_seeds, greedy_evaluator, run_episode, summarize
from .marl import Trainer, TrainConfig, TrainingDiverged, checkpoint_meta, write_curve
from .policies import BASELINES, make_policy

log = logging.getLogger("mecoffload")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
AXES = ("battery", "genprob", "cpufreq")
CPUFREQ_VALUES = ("dvfs", "fixed-max")

# metric key -> CSV column (unit suffix; costs are dimensionless)
METRIC_COLUMNS = [
    ("cost", "cost"), ("cost_epri", "cost_epri"), ("cost_drop", "cost_drop"),
    ("cost_fail", "cost_fail"), ("cost_bd", "cost_bd"), ("tasks", "tasks_count"),
    ("drop_rate", "drop_rate_frac"), ("fail_rate", "fail_rate_frac"),
    ("e_tra", "e_tra_j"), ("e_rec", "e_rec_j"), ("e_exe", "e_exe_j"),
]


class InvalidInput(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidInput("args", message)


# ----------------------------------------------------------------- helpers
def _config(path) -> Config:
    if path is None:
        return Config()
    try:
        return load_config(path)
    except FileNotFoundError as exc:
        raise InvalidInput("config", f"no such file: {path}") from exc


def _with_seed(cfg: Config, seed) -> Config:
    return cfg if seed is None else cfg.replace(sim={"seed": seed})


def _train_config(path, seed) -> TrainConfig:
    data = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise InvalidInput("train-config", f"no such file: {path}")
        text = p.read_text()
        try:
            data = json.loads(text) if p.suffix == ".json" else tomli.loads(text)
        except (json.JSONDecodeError, tomli.TOMLDecodeError) as exc:
            raise InvalidInput("train-config", f"cannot parse {path}: {exc}") from exc
        data = data.get("train", data)
    if seed is not None:
        data["seed"] = seed
    try:
        return TrainConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise InvalidInput("train-config", str(exc)) from exc


def _out_dir(path) -> Path:
    if path is None:
        raise InvalidInput("out", "--out is required")
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise InvalidInput("out", f"cannot write to {out}: {exc.strerror}") from exc
    return out


def _positive(value: int, name: str) -> int:
    if value < 1:
        raise InvalidInput(name, "must be >= 1")
    return value


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _metric_row(m: dict) -> list:
    return [_fmt(m[k]) for k, _ in METRIC_COLUMNS]


def _write_episodes(path: Path, rows: list[dict], n_agents: int, lead: list[str]):
    """One row per episode; ``lead`` columns come first from each row dict."""
    cols = lead + [c for _, c in METRIC_COLUMNS] + [f"agent{i}_cost" for i in range(n_agents)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in lead] + _metric_row(r["metrics"])
                       + [_fmt(c) for c in r["metrics"]["per_agent_cost"]])


def _summary_json(metrics: list[dict]) -> dict:
    s = summarize(metrics)
    out = {k: float(v) for k, v in s.items() if k not in ("per_agent_cost", "episodes")}
    out["per_agent_cost"] = [float(c) for c in s["per_agent_cost"]]
    out["neg_cost"] = -out["cost"]
    out["per_agent_neg_cost"] = [-c for c in out["per_agent_cost"]]
    out["episodes"] = int(s["episodes"])
    return out


def _dump_json(path: Path, data):
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _load_trainer(path, cfg: Config) -> Trainer:
    if path is None or not Path(path).exists():
        raise InvalidInput("checkpoint", f"no such checkpoint: {path}")
    try:
        return Trainer.load(path, lambda: MecEnv(cfg))
    except (KeyError, OSError, json.JSONDecodeError) as exc:
        raise InvalidInput("checkpoint", f"unreadable checkpoint {path}: {exc}") from exc
    except ValueError as exc:
        raise InvalidInput("checkpoint", str(exc)) from exc


def _policy(name: str, cfg: Config, seed: int, checkpoint=None):
    if name == "trained":
        return _load_trainer(checkpoint, cfg).greedy_policy()
    try:
        return make_policy(name, cfg.sim.num_mds, cfg.sim.num_eds, seed)
    except ValueError as exc:
        raise InvalidInput("policy", str(exc)) from exc


def _episodes(cfg: Config, policy, seeds) -> list[dict]:
    env = MecEnv(cfg)
    return [run_episode(env, policy, s) for s in seeds]


# ------------------------------------------------------------- subcommands
def cmd_simulate(args) -> int:
    cfg = _with_seed(_config(args.config), args.seed)
    out = _out_dir(args.out)
    n = _positive(args.episodes, "episodes")
    policy = _policy(args.policy, cfg, cfg.seed, args.checkpoint)
    seeds = episode_seeds(cfg.seed, n)
    metrics = _episodes(cfg, policy, seeds)
    rows = [{"episode": i, "seed": s, "metrics": m} for i, (s, m) in enumerate(zip(seeds, metrics))]
    _write_episodes(out / "episodes.csv", rows, cfg.sim.num_mds, ["episode", "seed"])
    _dump_json(out / "summary.json", {"policy": args.policy, **_summary_json(metrics)})
    log.info("simulate %s: mean cost %.6g over %d episodes", args.policy,
             np.mean([m["cost"] for m in metrics]), n)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _with_seed(_config(args.config), args.seed)
    tcfg = _train_config(args.train_config, args.seed)
    if args.steps is not None:
        tcfg = TrainConfig.from_dict({**tcfg.__dict__, "step_max": args.steps})
    out = _out_dir(args.out)
    factory = lambda: MecEnv(cfg)  # noqa: E731
    if args.checkpoint:
        if not Path(args.checkpoint).exists():
            raise InvalidInput("checkpoint", f"no such checkpoint: {args.checkpoint}")
        try:
            trainer = Trainer.load(args.checkpoint, factory, tcfg)
        except ValueError as exc:
            raise InvalidInput("checkpoint", str(exc)) from exc
    else:
        trainer = Trainer(factory, tcfg)
    evaluate = greedy_evaluator(cfg, episode_seeds(tcfg.eval_seed, tcfg.eval_episodes))

    def report(tr, diag):
        log.info("steps %d %s", tr.total_steps, " ".join(f"{k}={v:.4g}" for k, v in diag.items()))

    trainer.train(evaluate, report)
    trainer.save(out / "checkpoint.npz", extra={"env_config": cfg.to_dict()})
    write_curve(out / "curve.csv", trainer.curve, cfg.sim.num_mds)
    return EXIT_OK


def _checkpoint_config(path) -> Config:
    """Environment config saved alongside a checkpoint by ``train``."""
    if path is None or not Path(path).exists():
        raise InvalidInput("checkpoint", f"no such checkpoint: {path}")
    try:
        env_cfg = checkpoint_meta(path)["extra"].get("env_config")
    except (KeyError, OSError, ValueError) as exc:
        raise InvalidInput("checkpoint", f"unreadable checkpoint {path}: {exc}") from exc
    if env_cfg is None:
        raise InvalidInput("config", "checkpoint carries no environment config; pass --config")
    return config_from_dict(env_cfg)


def cmd_evaluate(args) -> int:
    base = _checkpoint_config(args.checkpoint) if args.config is None else _config(args.config)
    cfg = _with_seed(base, args.seed)
    out = _out_dir(args.out)
    n = _positive(args.episodes, "episodes")
    policy = _load_trainer(args.checkpoint, cfg).greedy_policy()
    seeds = episode_seeds(cfg.seed, n)
    metrics = _episodes(cfg, policy, seeds)
    rows = [{"episode": i, "seed": s, "metrics": m} for i, (s, m) in enumerate(zip(seeds, metrics))]
    _write_episodes(out / "episodes.csv", rows, cfg.sim.num_mds, ["episode", "seed"])
    _dump_json(out / "summary.json", {"policy": "trained", **_summary_json(metrics)})
    return EXIT_OK


def _axis_values(axis: str, raw: str) -> list:
    items = [v.strip() for v in raw.split(",") if v.strip()]
    if not items:
        raise InvalidInput("values", "empty value list")
    if axis == "cpufreq":
        bad = [v for v in items if v not in CPUFREQ_VALUES]
        if bad:
            raise InvalidInput("values", f"cpufreq values must be in {CPUFREQ_VALUES}, got {bad[0]!r}")
        return items
    try:
        return [float(v) for v in items]
    except ValueError as exc:
        raise InvalidInput("values", f"not a number: {exc}") from exc


def _apply_axis(cfg: Config, axis: str, value) -> Config:
    try:
        if axis == "battery":
            return cfg.replace(sim={"battery_capacity": value})
        if axis == "genprob":
            return cfg.replace(sim={"task_gen_prob": value})
        return cfg.with_fixed_max_frequency() if value == "fixed-max" else cfg
    except ConfigError as exc:
        raise InvalidInput("values", str(exc)) from exc


def _checkpoint_map(specs) -> dict:
    """``--checkpoint PATH`` (every value) or ``--checkpoint VALUE=PATH``."""
    out = {}
    for spec in specs or []:
        if "=" in spec:
            value, path = spec.split("=", 1)
            out[value] = path
        else:
            out[None] = spec
    return out


def cmd_sweep(args) -> int:
    if args.axis not in AXES:
        raise InvalidInput("axis", f"axis must be one of {AXES}")
    base = _with_seed(_config(args.config), args.seed)
    values = _axis_values(args.axis, args.values or "")
    policies = [p.strip() for p in (args.policy or "random").split(",") if p.strip()]
    for p in policies:
        if p != "trained" and p not in BASELINES:
            raise InvalidInput("policy", f"unknown policy {p!r}")
    ckpts = _checkpoint_map(args.checkpoint)
    out = Path(args.out) if args.out else None
    if out is None or out.suffix != ".csv":
        raise InvalidInput("out", "--out must be a .csv path")
    _out_dir(out.parent)
    n = _positive(args.episodes, "episodes")
    seeds = episode_seeds(base.seed, n)
    rows = []
    for value in values:
        cfg = _apply_axis(base, args.axis, value)
        for name in policies:
            ckpt = None
            if name == "trained":
                key = str(value) if args.axis == "cpufreq" else None
                ckpt = ckpts.get(key, ckpts.get(None))
                if ckpt is None:
                    raise InvalidInput("checkpoint", f"no checkpoint for value {value!r}")
            policy = _policy(name, cfg, base.seed, ckpt)
            for s, m in zip(seeds, _episodes(cfg, policy, seeds)):
                rows.append({"policy": name, "axis": args.axis, "value": value, "seed": s,
                             "metrics": m})
            log.info("sweep %s=%s %s done", args.axis, value, name)
    _write_episodes(out, rows, base.sim.num_mds, ["policy", "axis", "value", "seed"])
    return EXIT_OK


def cmd_trace(args) -> int:
    cfg = _with_seed(_config(args.config), args.seed)
    out = _out_dir(args.out)
    name = "trained" if args.checkpoint and args.policy is None else (args.policy or "random")
    policy = _policy(name, cfg, cfg.seed, args.checkpoint)
    env = MecEnv(cfg)
    seed = episode_seeds(cfg.seed, 1)[0]
    run_episode(env, policy, seed)
    with open(out / "tasks.jsonl", "w") as fh:
        for r in sorted(env.results, key=lambda r: (r.agent, r.g)):
            fh.write(json.dumps(r.to_record(), sort_keys=True) + "\n")
    write_trace_csv(out / "battery.csv", env.trace_rows)
    drain = env.battery_drain()
    with open(out / "devices.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["device", "drain_j", "e_tra_j", "e_rec_j", "e_exe_j"])
        for d in range(len(drain)):
            w.writerow([d] + [_fmt(v) for v in (drain[d], env.e_tra[d], env.e_rec[d], env.e_exe[d])])
    return EXIT_OK


# -------------------------------------------------------------------- main
def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mecoffload", description="MEC offloading simulator and trainer")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, episodes=True):
        sp.add_argument("--config", help="TOML or JSON environment config")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="output directory (sweep: output .csv path)")
        if episodes:
            sp.add_argument("--episodes", type=int, default=10)

    sp = sub.add_parser("simulate", help="run a baseline policy")
    common(sp)
    sp.add_argument("--policy", default="random", help=f"one of {', '.join(BASELINES)}, trained")
    sp.add_argument("--checkpoint", help="checkpoint for --policy trained")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("train", help="train agents, writing checkpoint.npz and curve.csv")
    common(sp, episodes=False)
    sp.add_argument("--train-config", help="TOML or JSON training hyperparameters")
    sp.add_argument("--checkpoint", help="resume from this checkpoint")
    sp.add_argument("--steps", type=int, help="override step_max")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="greedy episodes from a checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep", help="long-format cost sweep over one axis")
    common(sp)
    sp.add_argument("--axis", required=True, help=", ".join(AXES))
    sp.add_argument("--values", required=True, help="comma separated values")
    sp.add_argument("--policy", help="comma separated policies (default random)")
    sp.add_argument("--checkpoint", action="append",
                    help="PATH or VALUE=PATH for policy 'trained' (repeatable)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("trace", help="per-task JSON lines and battery trace of one episode")
    common(sp, episodes=False)
    sp.add_argument("--policy", help="baseline policy (default random)")
    sp.add_argument("--checkpoint", help="trace a trained checkpoint instead")
    sp.set_defaults(func=cmd_trace)
    return p


def _error(kind: str, field: str, message: str):
    print(json.dumps({"error": kind, "field": field, "message": message}), file=sys.stderr)


def main(argv=None) -> int:
    level = os.environ.get("MECOFFLOAD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise InvalidInput("command", "missing subcommand")
        return args.func(args)
    except InvalidInput as exc:
        _error("invalid", exc.field, str(exc))
        return EXIT_INVALID
    except ConfigError as exc:
        _error("invalid", exc.field, str(exc))
        return EXIT_INVALID
    except TrainingDiverged as exc:
        _error("runtime", "training", str(exc))
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last-resort single-line report
        _error("runtime", type(exc).__name__, str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
