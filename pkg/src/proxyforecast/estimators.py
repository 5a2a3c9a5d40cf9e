"""Additive-smoothing sequential categorical estimators and the delayed
prediction-drift quantities they obey."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .core import ProblemSpaces, UsageError

PRESETS = {"laplace": 1.0, "kt": 0.5}


def resolve_alpha(alpha: float | str) -> float:
    """Map a preset name (``"laplace"``, ``"kt"``) or a number to a smoothing constant."""
    if isinstance(alpha, str):
        try:
            return PRESETS[alpha.lower()]
        except KeyError:
            raise UsageError(f"unknown estimator preset {alpha!r}; expected one of {sorted(PRESETS)}")
    alpha = float(alpha)
    if not alpha > 0:
        raise UsageError(f"alpha must be positive, got {alpha}")
    return alpha


class SmoothedCategoricalEstimator:
    """Sequential estimator q(a) = (count[a] + alpha) / (total + K * alpha).

    ``alpha=1`` is the Laplace estimator, ``alpha=0.5`` Krichevsky-Trofimov.
    """

    def __init__(self, n_categories: int, alpha: float | str = 1.0):
        if n_categories < 1:
            raise UsageError("n_categories must be >= 1")
        self.n_categories = n_categories
        self.alpha = resolve_alpha(alpha)
        self.counts = np.zeros(n_categories, dtype=np.int64)
        self.total = 0

    def predict(self) -> np.ndarray:
        return (self.counts + self.alpha) / (self.total + self.n_categories * self.alpha)

    def prob(self, a: int) -> float:
        return (self.counts[a] + self.alpha) / (self.total + self.n_categories * self.alpha)

    def update(self, observed: int) -> None:
        if not 0 <= observed < self.n_categories:
            raise UsageError(f"category {observed} outside [0, {self.n_categories})")
        self.counts[observed] += 1
        self.total += 1

    def reset(self) -> None:
        self.counts[:] = 0
        self.total = 0

    def __repr__(self):
        return (f"SmoothedCategoricalEstimator(n_categories={self.n_categories}, "
                f"alpha={self.alpha}, counts={self.counts.tolist()})")


def _sizes(spaces) -> tuple[int, int]:
    if isinstance(spaces, ProblemSpaces):
        return spaces.n_instances, spaces.n_outcomes
    n_x, n_y = spaces
    return int(n_x), int(n_y)


def drift_bound_rhs(spaces, alpha: float | str, delay: int, horizon: int) -> float:
    """Upper bound D |X| |Y| ln((T - 1) / (alpha |X| |Y|) + 1) on cumulative drift.

    ``spaces`` is a :class:`ProblemSpaces` or an ``(n_instances, n_outcomes)`` pair.
    """
    if horizon < 1:
        raise UsageError("horizon must be >= 1")
    n_x, n_y = _sizes(spaces)
    alpha = resolve_alpha(alpha)
    cells = n_x * n_y
    return delay * cells * math.log((horizon - 1) / (alpha * cells) + 1.0)


def cumulative_drift(events: Iterable[Sequence[int]], spaces, alpha: float | str, delay: int) -> float:
    """Sum over s of ln(p_s(y_s|x_s) / p_{s-D}(y_s|x_s)) for per-instance estimators.

    p_t uses the events of rounds 1..t-1. For t <= 0 both sides use the
    smoothing prior (uniform), so every factor stays a probability.
    """
    events = [(int(x), int(y)) for x, y in events]
    if not events:
        raise UsageError("events must be non-empty")
    n_x, n_y = _sizes(spaces)
    alpha = resolve_alpha(alpha)
    if delay == 0:
        return 0.0

    now = np.zeros((n_x, n_y), dtype=np.int64)
    lagged = np.zeros((n_x, n_y), dtype=np.int64)
    drift = 0.0
    for s, (x, y) in enumerate(events, start=1):
        p_now = (now[x, y] + alpha) / (now[x].sum() + n_y * alpha)
        p_lag = (lagged[x, y] + alpha) / (lagged[x].sum() + n_y * alpha)
        drift += math.log(p_now / p_lag)
        now[x, y] += 1
        # lagged holds rounds 1..s-D, ready for the prediction at round s+1
        lag_src = s - delay
        if lag_src >= 1:
            lx, ly = events[lag_src - 1]
            lagged[lx, ly] += 1
    return drift
