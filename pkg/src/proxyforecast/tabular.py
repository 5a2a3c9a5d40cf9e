"""Tabular direct and factored forecasters built on smoothed counts, and the
ground-truth factored predictor."""

from __future__ import annotations

import numpy as np

from .base import Forecaster
from .core import ProblemSpaces, UsageError, validate_prob_vector
from .estimators import SmoothedCategoricalEstimator, resolve_alpha


class DirectForecaster(Forecaster):
    """One outcome estimator per instance; proxies are ignored."""

    name = "tabular-df"

    def __init__(self, spaces: ProblemSpaces, alpha: float | str = "laplace"):
        self.spaces = spaces
        self.alpha = resolve_alpha(alpha)
        self.estimators = [SmoothedCategoricalEstimator(spaces.n_outcomes, self.alpha)
                           for _ in range(spaces.n_instances)]

    def predict(self, instance):
        self.spaces.check_instance(instance)
        return self.estimators[instance].predict()

    def observe_outcome(self, instance, proxy, outcome):
        self.spaces.check_instance(instance)
        self.estimators[instance].update(outcome)

    def reset(self):
        for est in self.estimators:
            est.reset()


class FactoredForecaster(Forecaster):
    """Mixes a per-instance proxy estimator with per-proxy outcome estimators.

    p(y | x) = sum_z g_z(y) h_x(z). The proxy estimators update as proxies
    arrive; the outcome estimator for proxy ``z`` updates when an outcome whose
    originating round showed ``z`` is revealed.
    """

    name = "tabular-ff"

    def __init__(self, spaces: ProblemSpaces, alpha: float | str = "laplace"):
        self.spaces = spaces
        self.alpha = resolve_alpha(alpha)
        self.h = [SmoothedCategoricalEstimator(spaces.n_proxies, self.alpha)
                  for _ in range(spaces.n_instances)]
        self.g = [SmoothedCategoricalEstimator(spaces.n_outcomes, self.alpha)
                  for _ in range(spaces.n_proxies)]
        self._g_matrix = np.vstack([est.predict() for est in self.g])

    def g_matrix(self) -> np.ndarray:
        return self._g_matrix.copy()

    def h_row(self, instance: int) -> np.ndarray:
        return self.h[instance].predict()

    def predict(self, instance):
        self.spaces.check_instance(instance)
        return self.h[instance].predict() @ self._g_matrix

    def observe_proxy(self, instance, proxy):
        self.spaces.check_instance(instance)
        self.h[instance].update(proxy)

    def observe_outcome(self, instance, proxy, outcome):
        self.spaces.check_proxy(proxy)
        est = self.g[proxy]
        est.update(outcome)
        self._g_matrix[proxy] = est.predict()

    def factor_probs(self, instance, proxy, outcome):
        return self.g[proxy].prob(outcome), self.h[instance].prob(proxy)

    def reset(self):
        for est in self.h + self.g:
            est.reset()
        self._g_matrix = np.vstack([est.predict() for est in self.g])


class OracleForecaster(Forecaster):
    """Predicts sum_z G[z, y] H[x, z] from the true task matrices; never learns."""

    name = "oracle"

    def __init__(self, H, G):
        H = np.asarray(H, dtype=np.float64)
        G = np.asarray(G, dtype=np.float64)
        if H.ndim != 2 or G.ndim != 2 or H.shape[1] != G.shape[0]:
            raise UsageError(f"incompatible shapes H{H.shape} G{G.shape}")
        for row in H:
            validate_prob_vector(row)
        for row in G:
            validate_prob_vector(row)
        self.H, self.G = H, G
        self._table = H @ G

    def predict(self, instance):
        if not 0 <= instance < self.H.shape[0]:
            raise UsageError(f"instance {instance} outside [0, {self.H.shape[0]})")
        return self._table[instance].copy()

    def factor_probs(self, instance, proxy, outcome):
        return float(self.G[proxy, outcome]), float(self.H[instance, proxy])

    def reset(self):
        pass
