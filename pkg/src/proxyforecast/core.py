"""Shared domain types: alphabets, probability vectors, round events and the
delayed-revelation timeline."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

#: Loss returned for a zero-probability outcome instead of ``inf``.
DEFAULT_LOSS_CAP = 50.0

PROB_TOL = 1e-9
NEG_TOL = 1e-12

ProbVector = np.ndarray


class UsageError(ValueError):
    """Raised on out-of-range indices or mismatched shapes."""


class ValidationError(ValueError):
    """Raised when numeric input fails a domain check."""


class ConfigError(ValueError):
    """Raised when run parameters are invalid, before any compute starts."""


@dataclass(frozen=True)
class ProblemSpaces:
    n_instances: int
    n_proxies: int
    n_outcomes: int
    proxy_delay: int = 0
    outcome_delay: int = 0

    def __post_init__(self):
        if self.n_instances < 1 or self.n_proxies < 1:
            raise ConfigError("n_instances and n_proxies must be >= 1")
        if self.n_outcomes < 2:
            raise ConfigError("n_outcomes must be >= 2")
        if self.proxy_delay < 0 or self.outcome_delay < 0:
            raise ConfigError("delays must be non-negative")
        if self.proxy_delay > self.outcome_delay:
            raise ConfigError(
                f"proxy_delay ({self.proxy_delay}) exceeds outcome_delay ({self.outcome_delay})"
            )

    def check_instance(self, x: int) -> None:
        if not 0 <= x < self.n_instances:
            raise UsageError(f"instance {x} outside [0, {self.n_instances})")

    def check_proxy(self, z: int) -> None:
        if not 0 <= z < self.n_proxies:
            raise UsageError(f"proxy {z} outside [0, {self.n_proxies})")

    def check_outcome(self, y: int) -> None:
        if not 0 <= y < self.n_outcomes:
            raise UsageError(f"outcome {y} outside [0, {self.n_outcomes})")


@dataclass(frozen=True)
class RoundEvent:
    """One round of the game. ``round`` is 1-based; indices are 0-based."""

    round: int
    instance: int
    proxy: int
    outcome: int

    def check(self, spaces: ProblemSpaces) -> None:
        if self.round < 1:
            raise UsageError(f"round {self.round} must be >= 1")
        spaces.check_instance(self.instance)
        spaces.check_proxy(self.proxy)
        spaces.check_outcome(self.outcome)


def validate_prob_vector(raw: Sequence[float]) -> ProbVector:
    """Return a read-only float64 copy of ``raw`` if it is a distribution.

    Entries down to -1e-12 are clamped to zero and the vector renormalised;
    anything further off raises :class:`ValidationError`.
    """
    p = np.array(raw, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("probability vector must be one-dimensional and non-empty")
    if not np.all(np.isfinite(p)):
        raise ValidationError("probability vector contains non-finite entries")
    if np.any(p < -NEG_TOL):
        raise ValidationError(f"negative entry {p.min()!r}")
    total = float(p.sum())
    if abs(total - 1.0) > PROB_TOL:
        raise ValidationError(f"entries sum to {total!r}, expected 1")
    if np.any(p < 0) or total != 1.0:
        p = np.clip(p, 0.0, None)
        p /= p.sum()
    p.flags.writeable = False
    return p


def is_prob_vector(p: np.ndarray, tol: float = PROB_TOL) -> bool:
    p = np.asarray(p)
    return bool(p.ndim == 1 and np.all(p >= 0) and np.all(p <= 1 + tol) and abs(p.sum() - 1.0) <= tol)


def log_loss(prediction: Sequence[float], outcome: int, cap: float = DEFAULT_LOSS_CAP) -> float:
    """Negative log-probability of ``outcome`` under ``prediction``, capped at ``cap``."""
    n = len(prediction)
    if not 0 <= outcome < n:
        raise UsageError(f"outcome {outcome} outside [0, {n})")
    p = float(prediction[outcome])
    if p <= 0.0:
        return cap
    return min(-math.log(p), cap)


class RevelationSchedule:
    """Which originating rounds are revealed at the end of each round.

    A proxy generated at round ``s`` is revealed at the end of round
    ``s + proxy_delay``; an outcome at the end of ``s + outcome_delay``.
    Events whose reveal round falls after the horizon are never revealed.
    """

    def __init__(self, n_rounds: int, proxy_delay: int, outcome_delay: int):
        if n_rounds < 0 or proxy_delay < 0 or outcome_delay < 0:
            raise UsageError("rounds and delays must be non-negative")
        self.n_rounds = n_rounds
        self.proxy_delay = proxy_delay
        self.outcome_delay = outcome_delay

    def _origin(self, t: int, delay: int) -> list[int]:
        s = t - delay
        return [s] if 1 <= s <= self.n_rounds and t <= self.n_rounds else []

    def proxies_revealed_at(self, t: int) -> list[int]:
        return self._origin(t, self.proxy_delay)

    def outcomes_revealed_at(self, t: int) -> list[int]:
        return self._origin(t, self.outcome_delay)

    def proxy_visible(self, origin: int, prediction_round: int) -> bool:
        return prediction_round > origin + self.proxy_delay

    def outcome_visible(self, origin: int, prediction_round: int) -> bool:
        return prediction_round > origin + self.outcome_delay

    def __iter__(self) -> Iterator[tuple[int, list[int], list[int]]]:
        for t in range(1, self.n_rounds + 1):
            yield t, self.proxies_revealed_at(t), self.outcomes_revealed_at(t)
