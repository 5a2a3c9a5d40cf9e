"""The delayed-feedback game loop, regret accounting, multi-trial experiments
and parameter sweeps."""

from __future__ import annotations

import io
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .base import Forecaster
from .core import DEFAULT_LOSS_CAP, ConfigError, ProblemSpaces, UsageError, log_loss
from .environment import EventStream, FactoredTask, ReplayLog, TaskParams, generate_task
from .rng import DEFAULT_SEED, derive_seed
from .specs import ForecasterSpec

Z95 = 1.959963984540054
HINDSIGHT_ALPHA = 1e-6


@dataclass(frozen=True)
class Comparator:
    """How per-round comparator losses are obtained.

    ``true_model`` scores the task's true p(y | x); ``hindsight`` the best
    fixed per-instance predictor fitted to the realised outcomes (smoothed by
    ``alpha``); ``external`` reads a loss per round from ``losses``.
    """

    kind: str = "true_model"
    alpha: float = HINDSIGHT_ALPHA
    losses: tuple[float, ...] | None = None
    source: str | None = None

    KINDS = ("true_model", "hindsight", "external")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown comparator {self.kind!r}")
        if self.kind == "external" and self.losses is None:
            raise ConfigError("external comparator needs per-round losses")

    @classmethod
    def parse(cls, text: str) -> "Comparator":
        """Accepts ``true-model``, ``hindsight`` or ``external:<path>``."""
        if text in ("true-model", "true_model"):
            return cls("true_model")
        if text == "hindsight":
            return cls("hindsight")
        if text.startswith("external:"):
            path = text[len("external:"):]
            return cls("external", losses=tuple(load_comparator_losses(path)), source=path)
        raise ConfigError(f"unknown comparator {text!r}; expected true-model, hindsight or external:<path>")

    def __str__(self):
        if self.kind == "external":
            return f"external:{self.source}"
        return self.kind.replace("_", "-")

    def round_losses(self, stream: EventStream, spaces: ProblemSpaces,
                     task: FactoredTask | None = None, cap: float = DEFAULT_LOSS_CAP) -> np.ndarray:
        x, y = stream.instances, stream.outcomes
        if self.kind == "true_model":
            if task is None:
                raise UsageError("true-model comparator needs a synthetic task")
            p = task.optimal[x, y]
        elif self.kind == "hindsight":
            counts = np.zeros((spaces.n_instances, spaces.n_outcomes))
            np.add.at(counts, (x, y), 1.0)
            table = (counts + self.alpha) / (counts.sum(axis=1, keepdims=True) + spaces.n_outcomes * self.alpha)
            p = table[x, y]
        else:
            if len(self.losses) != len(stream):
                raise ConfigError(f"external comparator has {len(self.losses)} losses, "
                                  f"stream has {len(stream)} rounds")
            return np.asarray(self.losses, dtype=np.float64)
        with np.errstate(divide="ignore"):
            return np.minimum(-np.log(p), cap)


def load_comparator_losses(path) -> list[float]:
    """One real number per line; blank lines and a non-numeric first line are skipped."""
    out = []
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(float(line))
            except ValueError:
                if lineno == 1:
                    continue
                raise ConfigError(f"{path}:{lineno}: not a number: {line!r}")
    return out


class DelayQueue:
    """Pending revelations keyed by the round at whose end they are delivered."""

    def __init__(self):
        self._due = defaultdict(list)

    def push(self, reveal_round: int, entry) -> None:
        self._due[reveal_round].append(entry)

    def pop_due(self, t: int) -> list:
        return self._due.pop(t, [])

    def __len__(self):
        return sum(len(v) for v in self._due.values())


@dataclass
class TrialTrace:
    instances: np.ndarray
    predictions: np.ndarray
    observed: np.ndarray
    outcomes: np.ndarray
    losses: np.ndarray
    comparator_losses: np.ndarray
    cumulative_regret: np.ndarray
    proxy_deliveries: int = 0
    outcome_deliveries: int = 0
    factor_probs: np.ndarray | None = None  # (T, 2): g-hat(y_t|z_t), h-hat(z_t|x_t)

    @property
    def final_regret(self) -> float:
        return float(self.cumulative_regret[-1]) if len(self.cumulative_regret) else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        n_y = self.predictions.shape[1] if self.predictions.ndim == 2 else 0
        buf.write("round,instance,observed_proxy,outcome,loss,comparator_loss,cumulative_regret,"
                  + ",".join(f"p{k}" for k in range(n_y)) + "\n")
        for i in range(len(self.losses)):
            cells = [str(i + 1), str(int(self.instances[i])), str(int(self.observed[i])),
                     str(int(self.outcomes[i])), repr(float(self.losses[i])),
                     repr(float(self.comparator_losses[i])), repr(float(self.cumulative_regret[i]))]
            cells += [repr(float(v)) for v in self.predictions[i]]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


def run_trial(forecaster: Forecaster, stream: EventStream, spaces: ProblemSpaces,
              comparator: Comparator | str = "true_model", task: FactoredTask | None = None,
              cap: float = DEFAULT_LOSS_CAP, record_factors: bool = False) -> TrialTrace:
    """Play one game of ``len(stream)`` rounds.

    Round t: predict for x_t and score against y_t; at the end of round t the
    proxy of round t - D_z is delivered, then the outcome of round t - D
    (together with that round's observed proxy). Revelations due after the
    horizon are dropped.
    """
    if isinstance(comparator, str):
        comparator = Comparator.parse(comparator)
    n = len(stream)
    if n < 1:
        raise UsageError("stream must have at least one round")
    stream.check(spaces)
    if comparator.kind == "true_model":
        if task is None:
            raise UsageError("true-model comparator needs a synthetic task")
        if task.spaces.n_instances != spaces.n_instances or task.spaces.n_outcomes != spaces.n_outcomes:
            raise UsageError("task alphabets do not match spaces")

    xs = stream.instances.tolist()
    zs = stream.observed.tolist()
    zs_true = stream.proxies.tolist()
    ys = stream.outcomes.tolist()
    d_z, d = spaces.proxy_delay, spaces.outcome_delay

    predictions = np.empty((n, spaces.n_outcomes))
    losses = np.empty(n)
    factors = np.empty((n, 2)) if record_factors else None
    queue_z, queue_y = DelayQueue(), DelayQueue()
    n_proxy = n_outcome = 0
    for i in range(n):
        t = i + 1
        x, y = xs[i], ys[i]
        p = forecaster.predict(x)
        predictions[i] = p
        losses[i] = log_loss(p, y, cap)
        if record_factors:
            factors[i] = forecaster.factor_probs(x, zs_true[i], y)
        queue_z.push(t + d_z, i)
        queue_y.push(t + d, i)
        for s in queue_z.pop_due(t):
            forecaster.observe_proxy(xs[s], zs[s])
            n_proxy += 1
        for s in queue_y.pop_due(t):
            forecaster.observe_outcome(xs[s], zs[s], ys[s])
            n_outcome += 1
        forecaster.end_round(t)

    comp = comparator.round_losses(stream, spaces, task, cap)
    return TrialTrace(stream.instances, predictions, stream.observed, stream.outcomes, losses,
                      comp, np.cumsum(losses - comp), n_proxy, n_outcome, factors)


# ---------------------------------------------------------------------------
# experiments

@dataclass
class ExperimentConfig:
    forecasters: Sequence[ForecasterSpec]
    task: TaskParams | None = None
    replay: ReplayLog | None = None
    n_trials: int = 1
    comparator: Comparator = field(default_factory=Comparator)
    seed: int = DEFAULT_SEED
    jobs: int = 1
    cap: float = DEFAULT_LOSS_CAP

    def validate(self) -> None:
        if (self.task is None) == (self.replay is None):
            raise ConfigError("exactly one of task or replay must be given")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if not self.forecasters:
            raise ConfigError("at least one forecaster is required")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        labels = [f.label for f in self.forecasters]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate forecaster labels in {labels}")
        if self.replay is not None:
            if self.comparator.kind == "true_model":
                raise ConfigError("true-model comparator is unavailable for replay logs")
            if any(f.kind == "oracle" for f in self.forecasters):
                raise ConfigError("oracle forecaster is unavailable for replay logs")
            n = len(self.replay)
            if n < 1:
                raise ConfigError("replay log has no rounds")
        else:
            n = self.task.n_rounds
        if self.comparator.kind == "external" and len(self.comparator.losses) != n:
            raise ConfigError(f"external comparator has {len(self.comparator.losses)} losses, "
                              f"stream has {n} rounds")
        spaces = self.spaces
        for f in self.forecasters:
            f.validate(spaces)

    @property
    def spaces(self) -> ProblemSpaces:
        return self.replay.spaces if self.replay is not None else self.task.spaces

    @property
    def n_rounds(self) -> int:
        return len(self.replay) if self.replay is not None else self.task.n_rounds


def trial_inputs(config: ExperimentConfig, trial: int):
    """The (task, stream) of ``trial``; every forecaster of the trial sees this same stream."""
    if config.replay is not None:
        return None, config.replay.stream
    return generate_task(config.task, derive_seed(config.seed, trial))


def _run_trial_batch(config: ExperimentConfig, trial: int) -> list[tuple[np.ndarray, np.ndarray]]:
    task, stream = trial_inputs(config, trial)
    spaces = config.spaces
    out = []
    for j, spec in enumerate(config.forecasters):
        f = spec.build(spaces, derive_seed(config.seed, trial, j + 1), task)
        trace = run_trial(f, stream, spaces, config.comparator, task, config.cap)
        out.append((trace.losses, trace.cumulative_regret))
    return out


@dataclass
class SeriesSummary:
    """Pointwise statistics over trials for one forecaster."""

    label: str
    losses: np.ndarray   # (trials, T)
    regrets: np.ndarray  # (trials, T) cumulative

    @property
    def n_trials(self) -> int:
        return self.losses.shape[0]

    def _std(self, a):
        if self.n_trials < 2:
            return np.zeros(a.shape[1])
        return a.std(axis=0, ddof=1)

    @property
    def mean_loss(self):
        return self.losses.mean(axis=0)

    @property
    def loss_ci95(self):
        return Z95 * self._std(self.losses) / math.sqrt(self.n_trials)

    @property
    def mean_regret(self):
        return self.regrets.mean(axis=0)

    @property
    def std_regret(self):
        return self._std(self.regrets)

    @property
    def regret_ci95(self):
        return Z95 * self.std_regret / math.sqrt(self.n_trials)

    @property
    def final_regrets(self) -> np.ndarray:
        return self.regrets[:, -1]

    @property
    def final_mean_regret(self) -> float:
        return float(self.mean_regret[-1])

    @property
    def final_ci95(self) -> float:
        return float(self.regret_ci95[-1])

    @property
    def final_interval(self) -> tuple[float, float]:
        m, h = self.final_mean_regret, self.final_ci95
        return m - h, m + h

    def smoothed_loss(self, window: int = 5) -> np.ndarray:
        """Mean loss averaged over ``window`` consecutive rounds (trailing, shorter at the start)."""
        m = self.mean_loss
        c = np.concatenate([[0.0], np.cumsum(m)])
        idx = np.arange(1, len(m) + 1)
        lo = np.maximum(0, idx - window)
        return (c[idx] - c[lo]) / (idx - lo)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    series: dict[str, SeriesSummary]

    def __getitem__(self, label: str) -> SeriesSummary:
        return self.series[label]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("forecaster,round,mean_loss,loss_ci95,mean_regret,regret_ci95,std_regret\n")
        for label, s in self.series.items():
            cols = (s.mean_loss, s.loss_ci95, s.mean_regret, s.regret_ci95, s.std_regret)
            for i in range(s.losses.shape[1]):
                buf.write(f"{label},{i + 1}," + ",".join(_fmt(c[i]) for c in cols) + "\n")
        return buf.getvalue()


def _fmt(v: float) -> str:
    return repr(float(v))


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run ``n_trials`` independent trials for every forecaster on shared streams.

    Each trial redraws the task matrices and the stream from its own seeded
    substream; results are merged in trial order whatever ``jobs`` is.
    """
    config.validate()
    trials = range(config.n_trials)
    if config.jobs > 1 and config.n_trials > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            batches = list(pool.map(_run_trial_batch, [config] * config.n_trials, trials))
    else:
        batches = [_run_trial_batch(config, i) for i in trials]
    series = {}
    for j, spec in enumerate(config.forecasters):
        losses = np.vstack([b[j][0] for b in batches])
        regrets = np.vstack([b[j][1] for b in batches])
        series[spec.label] = SeriesSummary(spec.label, losses, regrets)
    return ExperimentResult(config, series)


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class SweepRow:
    forecaster: str
    param: float
    summary: SeriesSummary

    @property
    def final_mean_regret(self):
        return self.summary.final_mean_regret

    @property
    def final_ci95(self):
        return self.summary.final_ci95


SWEEP_PARAMS = {"mu": "mu", "fraction": "fraction", "delay": "outcome_delay", "epsilon": "epsilon"}


def sweep(config: ExperimentConfig, param: str, values: Sequence[float], t_scale: int | None = None) -> list[SweepRow]:
    """One experiment per value of ``param``; rows ordered by value, then forecaster.

    For ``param="delay"`` with ``t_scale`` set, each point uses
    ``T = t_scale * N * D`` rounds (the configured T when D = 0).
    """
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"cannot sweep {param!r}; expected one of {sorted(SWEEP_PARAMS)}")
    if len(values) == 0:
        raise ConfigError("sweep needs at least one value")
    if config.task is None:
        raise ConfigError("sweeps need a synthetic task")
    configs = []
    for v in values:
        changes = {SWEEP_PARAMS[param]: v}
        if param == "delay":
            v = int(v)
            changes = {"outcome_delay": v, "proxy_delay": min(config.task.proxy_delay, v)}
            if t_scale and v > 0:
                changes["n_rounds"] = t_scale * config.task.n_instances * v
            elif changes.get("n_rounds", config.task.n_rounds) < config.task.n_instances * v:
                raise ConfigError(f"T={config.task.n_rounds} is shorter than N*D for D={v}")
        try:
            task = config.task.replace(**changes)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid {param}={v}: {exc}")
        sub = ExperimentConfig(config.forecasters, task, None, config.n_trials, config.comparator,
                               config.seed, config.jobs, config.cap)
        sub.validate()
        configs.append((v, sub))
    rows = []
    for v, sub in configs:
        result = run_experiment(sub)
        rows.extend(SweepRow(label, v, s) for label, s in result.series.items())
    return rows


def mu_sweep(config: ExperimentConfig, mu_values: Sequence[float]) -> list[SweepRow]:
    return sweep(config, "mu", mu_values)


def fraction_sweep(config: ExperimentConfig, fractions: Sequence[float]) -> list[SweepRow]:
    return sweep(config, "fraction", fractions)


def delay_sweep(config: ExperimentConfig, delays: Sequence[int], t_scale: int = 4) -> list[SweepRow]:
    return sweep(config, "delay", delays, t_scale=t_scale)


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    buf.write("forecaster,param,final_mean_regret,final_ci95\n")
    for r in rows:
        buf.write(f"{r.forecaster},{_fmt(r.param)},{_fmt(r.final_mean_regret)},{_fmt(r.final_ci95)}\n")
    return buf.getvalue()


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    pvalue: float
    intercept: float

    def lower(self, z: float = 2.5758293035489) -> float:
        """Lower end of the two-sided normal interval (99% by default)."""
        return self.slope - z * self.stderr


def regret_slope(rows: Sequence[SweepRow], forecaster: str) -> SlopeFit:
    """Least-squares slope of per-trial final regret against the swept parameter."""
    xs, ys = [], []
    for r in rows:
        if r.forecaster == forecaster:
            finals = r.summary.final_regrets
            xs.extend([r.param] * len(finals))
            ys.extend(finals.tolist())
    if len(set(xs)) < 2:
        raise UsageError(f"need at least two parameter values for {forecaster!r}")
    fit = stats.linregress(xs, ys)
    return SlopeFit(float(fit.slope), float(fit.stderr), float(fit.pvalue), float(fit.intercept))


# ---------------------------------------------------------------------------
# regret decomposition

@dataclass(frozen=True)
class DecompositionReport:
    lhs: np.ndarray      # per-trial regret against the true model
    g_regret: np.ndarray
    h_regret: np.ndarray

    @property
    def rhs(self) -> np.ndarray:
        return self.g_regret + self.h_regret

    @staticmethod
    def _se(a):
        return float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0

    @property
    def lhs_mean(self) -> float:
        return float(self.lhs.mean())

    @property
    def rhs_mean(self) -> float:
        return float(self.rhs.mean())

    @property
    def combined_se(self) -> float:
        return math.hypot(self._se(self.lhs), self._se(self.rhs))

    @property
    def holds(self) -> bool:
        return self.lhs_mean <= self.rhs_mean + 2.0 * self.combined_se

    def summary(self) -> dict:
        return {"lhs": self.lhs_mean, "rhs": self.rhs_mean,
                "g_regret": float(self.g_regret.mean()), "h_regret": float(self.h_regret.mean()),
                "combined_se": self.combined_se, "holds": self.holds}


def decomposition_check(params: TaskParams, n_trials: int, seed: int = DEFAULT_SEED,
                        spec: ForecasterSpec | None = None) -> DecompositionReport:
    """Per trial: FF regret against the true model versus the summed regrets of its
    outcome-given-proxy and proxy-given-instance estimates, scored at the true proxy."""
    if spec is None:
        spec = ForecasterSpec("tabular-ff")
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    config = ExperimentConfig([spec], params, n_trials=n_trials, seed=seed)
    config.validate()
    lhs, g_reg, h_reg = [], [], []
    spaces = params.spaces
    for trial in range(n_trials):
        task, stream = trial_inputs(config, trial)
        f = spec.build(spaces, derive_seed(seed, trial, 1), task)
        trace = run_trial(f, stream, spaces, Comparator("true_model"), task, record_factors=True)
        x, z, y = stream.instances, stream.proxies, stream.outcomes
        g_hat, h_hat = trace.factor_probs[:, 0], trace.factor_probs[:, 1]
        lhs.append(trace.final_regret)
        g_reg.append(float(np.sum(np.log(task.G[z, y] / g_hat))))
        h_reg.append(float(np.sum(np.log(task.H[x, z] / h_hat))))
    return DecompositionReport(np.array(lhs), np.array(g_reg), np.array(h_reg))
