"""Synthetic factored prediction tasks, instance schedules, proxy dilution,
and the replay-log file format for external event data."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import ConfigError, ProblemSpaces, RoundEvent, UsageError, validate_prob_vector
from .rng import make_rng


class ReplayLogError(ValueError):
    """Malformed replay-log file; the message names the offending line."""


def generate_stochastic_matrix(rows: int, cols: int, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Row-stochastic matrix ``(1 - eps) * R + eps * U``.

    Each row of R is one-hot on a uniformly drawn column; each row of U is a
    vector of independent Uniform(0, 1) draws normalised to sum to one. Draw
    order: all ``rows`` column indices first, then the ``rows x cols`` uniforms.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError(f"epsilon must lie in [0, 1], got {epsilon}")
    hot = rng.integers(cols, size=rows)
    u = rng.random((rows, cols))
    u /= u.sum(axis=1, keepdims=True)
    m = epsilon * u
    m[np.arange(rows), hot] += 1.0 - epsilon
    return m


@dataclass(frozen=True)
class TaskParams:
    n_instances: int = 10
    n_proxies: int = 4
    n_outcomes: int = 5
    n_rounds: int = 1000
    outcome_delay: int = 100
    proxy_delay: int = 0
    epsilon: float = 0.1
    mu: float = 0.0
    fraction: float = 1.0
    # schedule block length; None means outcome_delay (or 1 when that is 0)
    block: int | None = None

    def __post_init__(self):
        self.spaces  # validates alphabets and delays
        if self.n_rounds < 1:
            raise ConfigError("n_rounds must be >= 1")
        for name in ("epsilon", "mu", "fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.block is not None and self.block < 1:
            raise ConfigError("block must be >= 1")

    @property
    def spaces(self) -> ProblemSpaces:
        return ProblemSpaces(self.n_instances, self.n_proxies, self.n_outcomes,
                             self.proxy_delay, self.outcome_delay)

    @property
    def block_length(self) -> int:
        if self.block is not None:
            return self.block
        return self.outcome_delay if self.outcome_delay > 0 else 1

    def replace(self, **changes) -> "TaskParams":
        return dataclasses.replace(self, **changes)


TASK_PRESETS = {
    "appendix": TaskParams(),
}


@dataclass(frozen=True)
class FactoredTask:
    spaces: ProblemSpaces
    H: np.ndarray
    G: np.ndarray
    epsilon: float
    mu: float
    useful_proxy_fraction: float
    block_length: int
    seed: int | None = None

    def __post_init__(self):
        for name, m, shape in (("H", self.H, (self.spaces.n_instances, self.spaces.n_proxies)),
                               ("G", self.G, (self.spaces.n_proxies, self.spaces.n_outcomes))):
            if m.shape != shape:
                raise UsageError(f"{name} has shape {m.shape}, expected {shape}")
            for row in m:
                validate_prob_vector(row)
            m.flags.writeable = False

    @property
    def optimal(self) -> np.ndarray:
        """Table of true p(y | x) = sum_z G[z, y] H[x, z]."""
        return self.H @ self.G


@dataclass(frozen=True)
class EventStream:
    """Pre-generated rounds. ``proxies`` are the true proxies that drove the
    outcomes; ``observed`` are what the forecaster is shown."""

    instances: np.ndarray
    proxies: np.ndarray
    observed: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        n = len(self.instances)
        for arr in (self.instances, self.proxies, self.observed, self.outcomes):
            if arr.shape != (n,):
                raise UsageError("stream arrays must be one-dimensional and equally long")
            arr.flags.writeable = False

    def __len__(self):
        return len(self.instances)

    def events(self) -> Iterator[RoundEvent]:
        for i in range(len(self)):
            yield RoundEvent(i + 1, int(self.instances[i]), int(self.proxies[i]), int(self.outcomes[i]))

    def check(self, spaces: ProblemSpaces) -> None:
        for name, arr, bound in (("instance", self.instances, spaces.n_instances),
                                 ("proxy", self.proxies, spaces.n_proxies),
                                 ("observed proxy", self.observed, spaces.n_proxies),
                                 ("outcome", self.outcomes, spaces.n_outcomes)):
            if len(arr) and (arr.min() < 0 or arr.max() >= bound):
                raise UsageError(f"{name} index outside [0, {bound})")


def adversarial_instance(t: int, n_instances: int, block_length: int) -> int:
    """0-based form of min(N, floor(t / block) + 1) for 1-based round ``t``."""
    return min(n_instances, t // block_length + 1) - 1


def schedule_instance(t: int, task: FactoredTask, rng: np.random.Generator) -> int:
    """Uniform instance with probability ``mu``, otherwise the adversarial block schedule."""
    if t < 1:
        raise UsageError("round must be >= 1")
    n = task.spaces.n_instances
    if rng.random() < task.mu:
        return int(rng.integers(n))
    return adversarial_instance(t, n, task.block_length)


def _categorical(p: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(np.cumsum(p), u, side="right")), len(p) - 1)


def sample_round(t: int, task: FactoredTask, rng: np.random.Generator) -> tuple[RoundEvent, int]:
    """Draw one round; returns the event (with the true proxy) and the observed proxy."""
    x = schedule_instance(t, task, rng)
    z = _categorical(task.H[x], rng.random())
    y = _categorical(task.G[z], rng.random())
    if rng.random() < task.useful_proxy_fraction:
        observed = z
    else:
        observed = int(rng.integers(task.spaces.n_proxies))
    return RoundEvent(t, x, z, y), observed


def _categorical_rows(table: np.ndarray, rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(table, axis=1)[rows]
    idx = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(idx, table.shape[1] - 1)


def generate_stream(task: FactoredTask, n_rounds: int, rng: np.random.Generator) -> EventStream:
    """Materialise ``n_rounds`` rounds up front, before any forecaster acts.

    Same distribution as repeated :func:`sample_round`, drawn in bulk: the
    schedule coins, uniform instances, proxy uniforms, outcome uniforms,
    dilution coins and noise proxies are each drawn as one block.
    """
    sp = task.spaces
    t = np.arange(1, n_rounds + 1)
    coin = rng.random(n_rounds) < task.mu
    uniform = rng.integers(sp.n_instances, size=n_rounds)
    blocked = np.minimum(sp.n_instances, t // task.block_length + 1) - 1
    x = np.where(coin, uniform, blocked)
    z = _categorical_rows(task.H, x, rng.random(n_rounds))
    y = _categorical_rows(task.G, z, rng.random(n_rounds))
    useful = rng.random(n_rounds) < task.useful_proxy_fraction
    noise = rng.integers(sp.n_proxies, size=n_rounds)
    observed = np.where(useful, z, noise)
    return EventStream(x.astype(np.int64), z.astype(np.int64), observed.astype(np.int64), y.astype(np.int64))


def make_task(params: TaskParams, rng: np.random.Generator, seed: int | None = None) -> FactoredTask:
    H = generate_stochastic_matrix(params.n_instances, params.n_proxies, params.epsilon, rng)
    G = generate_stochastic_matrix(params.n_proxies, params.n_outcomes, params.epsilon, rng)
    return FactoredTask(params.spaces, H, G, params.epsilon, params.mu, params.fraction,
                        params.block_length, seed)


def generate_task(params: TaskParams, seed: int) -> tuple[FactoredTask, EventStream]:
    """Draw H and G, then a full stream of ``params.n_rounds`` rounds, from one seeded generator."""
    rng = make_rng(seed)
    task = make_task(params, rng, seed)
    return task, generate_stream(task, params.n_rounds, rng)


# ---------------------------------------------------------------------------
# replay logs

@dataclass(frozen=True)
class ReplayLog:
    spaces: ProblemSpaces
    rounds: np.ndarray
    stream: EventStream

    def __len__(self):
        return len(self.stream)


def load_replay_log(path: str | os.PathLike) -> ReplayLog:
    """Parse a replay log.

    Format: ASCII, LF line endings; a header ``#spaces N Z Y Dz D`` then rows
    ``round,instance,proxy,outcome`` of base-10 integers with strictly
    increasing rounds. Each row is one game round; the round column labels it.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise ReplayLogError(f"{path}: not ASCII ({exc})")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ReplayLogError(f"{path}:1: missing '#spaces' header")

    head = lines[0].split()
    if len(head) != 6 or head[0] != "#spaces":
        raise ReplayLogError(f"{path}:1: expected '#spaces N Z Y Dz D', got {lines[0]!r}")
    try:
        spaces = ProblemSpaces(*(int(v) for v in head[1:]))
    except ValueError as exc:
        raise ReplayLogError(f"{path}:1: bad header: {exc}")

    bounds = (spaces.n_instances, spaces.n_proxies, spaces.n_outcomes)
    names = ("instance", "proxy", "outcome")
    rows = []
    last = None
    for lineno, line in enumerate(lines[1:], start=2):
        if "\r" in line:
            raise ReplayLogError(f"{path}:{lineno}: CR line ending")
        fields = line.split(",")
        if len(fields) != 4:
            raise ReplayLogError(f"{path}:{lineno}: expected 4 comma-separated fields, got {line!r}")
        try:
            r, *vals = (int(f) for f in fields)
        except ValueError:
            raise ReplayLogError(f"{path}:{lineno}: non-integer field in {line!r}")
        for name, v, bound in zip(names, vals, bounds):
            if not 0 <= v < bound:
                raise ReplayLogError(f"{path}:{lineno}: {name} id {v} outside [0, {bound})")
        if last is not None and r <= last:
            raise ReplayLogError(f"{path}:{lineno}: round {r} not greater than previous round {last}")
        last = r
        rows.append((r, *vals))

    arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
    stream = EventStream(arr[:, 1].copy(), arr[:, 2].copy(), arr[:, 2].copy(), arr[:, 3].copy())
    return ReplayLog(spaces, arr[:, 0].copy(), stream)


def write_replay_log(path: str | os.PathLike, spaces: ProblemSpaces, stream: EventStream,
                     rounds=None) -> None:
    """Write ``stream`` (with its observed proxies) in replay-log format."""
    if rounds is None:
        rounds = range(1, len(stream) + 1)
    out = [f"#spaces {spaces.n_instances} {spaces.n_proxies} {spaces.n_outcomes} "
           f"{spaces.proxy_delay} {spaces.outcome_delay}"]
    for r, x, z, y in zip(rounds, stream.instances, stream.observed, stream.outcomes):
        out.append(f"{int(r)},{int(x)},{int(z)},{int(y)}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def write_matrix_csv(path: str | os.PathLike, m: np.ndarray) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for row in m:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
