"""Command-line front end.

Subcommands: ``gen-task``, ``run``, ``sweep``, ``replay`` and ``decompose``.
Exit status is 0 on success, 2 on invalid configuration or input data, and
1 on I/O failures.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import config as run_config
from .core import ConfigError, UsageError
from .environment import (
    TASK_PRESETS,
    ReplayLogError,
    generate_task,
    write_matrix_csv,
    write_replay_log,
)
from .harness import ExperimentConfig, decomposition_check, run_experiment, sweep, sweep_to_csv
from .rng import DEFAULT_SEED
from .specs import ForecasterSpec, parse_forecasters

log = logging.getLogger("proxyforecast")

TASK_FLAGS = {
    "mu": "mu", "epsilon": "epsilon", "fraction": "fraction", "delay": "outcome_delay",
    "proxy_delay": "proxy_delay", "rounds": "n_rounds", "instances": "n_instances",
    "proxies": "n_proxies", "outcomes": "n_outcomes",
}


def _add_task_flags(p):
    g = p.add_argument_group("task")
    g.add_argument("--preset", choices=sorted(TASK_PRESETS), help="task preset (default: appendix)")
    g.add_argument("--mu", type=float, help="probability of a uniform instance draw per round")
    g.add_argument("--epsilon", type=float, help="interpolation towards random rows in H and G")
    g.add_argument("--fraction", type=float, help="probability the observed proxy is the true one")
    g.add_argument("--delay", type=int, help="outcome delay D in rounds")
    g.add_argument("--proxy-delay", type=int, help="proxy delay in rounds")
    g.add_argument("--rounds", type=int, help="horizon T")
    g.add_argument("--instances", type=int)
    g.add_argument("--proxies", type=int)
    g.add_argument("--outcomes", type=int)


def _add_run_flags(p, replay=False):
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--forecasters", help="comma list, e.g. tabular-df,tabular-ff:kt,nn-rff:github")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
    p.add_argument("--comparator", help="true-model | hindsight | external:<path>")
    p.add_argument("--jobs", type=int, help="parallel trial workers")
    p.add_argument("-o", "--out", help="output CSV path (default: stdout)")
    p.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxyforecast", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-task", help="write task matrices and an event stream")
    _add_task_flags(p)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("-o", "--out", required=True, help="existing output directory")

    p = sub.add_parser("run", help="multi-trial experiment, per-round CSV")
    _add_task_flags(p)
    _add_run_flags(p)

    p = sub.add_parser("sweep", help="final regret across values of one parameter")
    p.add_argument("param", choices=["mu", "delay", "fraction"])
    p.add_argument("--values", required=True, help="comma list of parameter values")
    p.add_argument("--t-scale", type=int, default=4, help="delay sweeps use T = t_scale * N * D (0 keeps T)")
    _add_task_flags(p)
    _add_run_flags(p)

    p = sub.add_parser("replay", help="run forecasters over a replay log")
    p.add_argument("log", help="replay-log file")
    _add_run_flags(p)

    p = sub.add_parser("decompose", help="compare FF regret with its two-factor decomposition")
    _add_task_flags(p)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--estimator", choices=["laplace", "kt"], default="laplace")
    return parser


def _task_overrides(args) -> dict:
    return {field: getattr(args, flag) for flag, field in TASK_FLAGS.items()
            if getattr(args, flag, None) is not None}


def resolve_run_config(args, replay: str | None = None) -> run_config.RunConfig:
    cfg = run_config.load(args.config) if args.config else run_config.RunConfig()
    if replay is not None:
        cfg.replay = replay
        cfg.task_preset = None
    else:
        if args.preset:
            cfg.task_preset = args.preset
        cfg.task_overrides.update(_task_overrides(args))
    if args.forecasters:
        cfg.forecasters = parse_forecasters(args.forecasters)
    elif not cfg.forecasters:
        cfg.forecasters = parse_forecasters("tabular-df,tabular-ff")
    for name in ("trials", "seed", "comparator", "jobs", "out"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    cfg.validate()
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    log.info("wrote %s", out)


def cmd_gen_task(args) -> None:
    if not os.path.isdir(args.out):
        raise FileNotFoundError(f"output directory {args.out!r} does not exist")
    params = TASK_PRESETS[args.preset or "appendix"].replace(**_task_overrides(args))
    task, stream = generate_task(params, args.seed)
    write_matrix_csv(os.path.join(args.out, "H.csv"), task.H)
    write_matrix_csv(os.path.join(args.out, "G.csv"), task.G)
    write_replay_log(os.path.join(args.out, "stream.log"), task.spaces, stream)
    with open(os.path.join(args.out, "true_proxies.txt"), "w", encoding="ascii", newline="\n") as fh:
        fh.write("".join(f"{int(z)}\n" for z in stream.proxies))


def cmd_run(args) -> None:
    cfg = resolve_run_config(args)
    if args.dump_config:
        sys.stdout.write(cfg.dumps())
        return
    result = run_experiment(cfg.to_experiment())
    _emit(result.to_csv(), cfg.out)


def cmd_sweep(args) -> None:
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad --values {args.values!r}")
    if not values:
        raise ConfigError("empty sweep list")
    if args.param == "delay":
        if any(v != int(v) for v in values):
            raise ConfigError("delays must be integers")
        values = [int(v) for v in values]
    cfg = resolve_run_config(args)
    if args.dump_config:
        sys.stdout.write(cfg.dumps())
        return
    exp = cfg.to_experiment()
    rows = sweep(exp, args.param, values, t_scale=(args.t_scale or None) if args.param == "delay" else None)
    _emit(sweep_to_csv(rows), cfg.out)


def cmd_replay(args) -> None:
    cfg = resolve_run_config(args, replay=args.log)
    if args.dump_config:
        sys.stdout.write(cfg.dumps())
        return
    result = run_experiment(cfg.to_experiment())
    _emit(result.to_csv(), cfg.out)


def cmd_decompose(args) -> None:
    params = TASK_PRESETS[args.preset or "appendix"].replace(**_task_overrides(args))
    rep = decomposition_check(params, args.trials, args.seed, ForecasterSpec("tabular-ff", args.estimator))
    for k, v in rep.summary().items():
        print(f"{k},{v}")


COMMANDS = {"gen-task": cmd_gen_task, "run": cmd_run, "sweep": cmd_sweep, "replay": cmd_replay,
            "decompose": cmd_decompose}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ConfigError, UsageError, ReplayLogError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
