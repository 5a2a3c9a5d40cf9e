"""Run configuration: an INI-style file with ``[task]``, ``[run]`` and one
``[forecaster.<label>]`` section per forecaster.

Example::

    [task]
    preset = appendix
    mu = 0.0
    fraction = 1.0

    [run]
    trials = 200
    seed = 7
    comparator = true-model

    [forecaster.tabular-df]
    kind = tabular-df

    [forecaster.rff]
    kind = nn-rff
    preset = github
    hidden = 40/20
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import os
from dataclasses import dataclass, field

from .core import ConfigError
from .environment import TASK_PRESETS, TaskParams, load_replay_log
from .harness import Comparator, ExperimentConfig
from .rng import DEFAULT_SEED
from .specs import NEURAL_OVERRIDES, ForecasterSpec

TASK_KEYS = {
    "n_instances": int, "n_proxies": int, "n_outcomes": int, "n_rounds": int,
    "outcome_delay": int, "proxy_delay": int, "epsilon": float, "mu": float,
    "fraction": float, "block": int,
}
RUN_KEYS = {"trials", "seed", "comparator", "out", "jobs", "replay"}
FORECASTER_KEYS = {"kind", "estimator", "preset", *NEURAL_OVERRIDES}


@dataclass
class RunConfig:
    task_preset: str | None = "appendix"
    task_overrides: dict = field(default_factory=dict)
    replay: str | None = None
    forecasters: list[ForecasterSpec] = field(default_factory=list)
    trials: int = 200
    seed: int = DEFAULT_SEED
    comparator: str | None = None
    out: str | None = None
    jobs: int = 1

    def validate(self) -> None:
        if self.replay is not None and self.task_overrides:
            raise ConfigError("a replay run takes no task parameters")
        if self.replay is None and self.task_preset not in TASK_PRESETS:
            raise ConfigError(f"unknown task preset {self.task_preset!r}")
        for key in self.task_overrides:
            if key not in TASK_KEYS:
                raise ConfigError(f"unknown task key {key!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not self.forecasters:
            raise ConfigError("no forecasters configured")
        for spec in self.forecasters:
            if spec.is_neural:
                spec.neural_config()
        if self.out is not None and not os.path.isdir(os.path.dirname(os.path.abspath(self.out))):
            raise FileNotFoundError(f"output directory for {self.out!r} does not exist")
        self.task_params()
        comp = self.effective_comparator
        if comp not in ("true-model", "hindsight") and not comp.startswith("external:"):
            raise ConfigError(f"unknown comparator {comp!r}")
        if self.replay is not None and comp == "true-model":
            raise ConfigError("true-model comparator is unavailable for replay logs")

    @property
    def effective_comparator(self) -> str:
        if self.comparator is not None:
            return self.comparator
        return "hindsight" if self.replay is not None else "true-model"

    def task_params(self) -> TaskParams | None:
        if self.replay is not None:
            return None
        try:
            return TASK_PRESETS[self.task_preset].replace(**self.task_overrides)
        except TypeError as exc:
            raise ConfigError(str(exc))

    def to_experiment(self) -> ExperimentConfig:
        self.validate()
        replay = load_replay_log(self.replay) if self.replay is not None else None
        comparator = Comparator.parse(self.effective_comparator)
        cfg = ExperimentConfig(self.forecasters, self.task_params(), replay, self.trials, comparator,
                               self.seed, self.jobs)
        cfg.validate()
        return cfg

    def dumps(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        if self.replay is None:
            cp["task"] = {"preset": self.task_preset,
                          **{k: repr(v) if isinstance(v, float) else str(v) for k, v in self.task_overrides.items()}}
        run = {"trials": str(self.trials), "seed": str(self.seed), "jobs": str(self.jobs)}
        if self.comparator is not None:
            run["comparator"] = self.comparator
        if self.out is not None:
            run["out"] = self.out
        if self.replay is not None:
            run["replay"] = self.replay
        cp["run"] = run
        for spec in self.forecasters:
            sec = {"kind": spec.kind}
            if spec.kind in ("tabular-df", "tabular-ff"):
                sec["estimator"] = spec.estimator
            elif spec.is_neural:
                sec["preset"] = spec.preset
                sec.update(dict(spec.overrides))
            cp[f"forecaster.{spec.label}"] = sec
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _check_keys(section: str, keys, allowed) -> None:
    unknown = sorted(set(keys) - set(allowed))
    if unknown:
        raise ConfigError(f"[{section}]: unknown key(s) {', '.join(unknown)}")


def _convert(section, key, value, kind):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {value!r} is not a valid {kind.__name__}")


def loads(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}")
    cfg = RunConfig()
    for name in cp.sections():
        sec = cp[name]
        if name == "task":
            _check_keys(name, sec.keys(), {"preset", *TASK_KEYS})
            cfg.task_preset = sec.get("preset", "appendix")
            cfg.task_overrides = {k: _convert(name, k, v, TASK_KEYS[k]) for k, v in sec.items() if k != "preset"}
        elif name == "run":
            _check_keys(name, sec.keys(), RUN_KEYS)
            cfg.trials = _convert(name, "trials", sec.get("trials", "200"), int)
            cfg.seed = _convert(name, "seed", sec.get("seed", str(DEFAULT_SEED)), int)
            cfg.jobs = _convert(name, "jobs", sec.get("jobs", "1"), int)
            cfg.comparator = sec.get("comparator")
            cfg.out = sec.get("out")
            cfg.replay = sec.get("replay")
        elif name.startswith("forecaster."):
            _check_keys(name, sec.keys(), FORECASTER_KEYS)
            if "kind" not in sec:
                raise ConfigError(f"[{name}]: missing kind")
            label = name[len("forecaster."):]
            overrides = tuple((k, v) for k, v in sec.items() if k in NEURAL_OVERRIDES)
            spec = ForecasterSpec(sec["kind"], sec.get("estimator", "laplace"), sec.get("preset", "github"),
                                  overrides)
            if spec.label != label:
                spec = dataclasses.replace(spec, name=label)
            cfg.forecasters.append(spec)
        else:
            raise ConfigError(f"unknown section [{name}]")
    if cfg.replay is not None and "task" in cp.sections():
        raise ConfigError("a replay run takes no [task] section")
    if cfg.replay is not None:
        cfg.task_preset = None
    return cfg


def load(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
