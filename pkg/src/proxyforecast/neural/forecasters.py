"""Neural direct, factored and residual-factored forecasters trained online
by SGD from replay buffers."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..base import Forecaster
from ..core import ConfigError, ProblemSpaces
from ..rng import make_rng
from .mlp import Mlp, cross_entropy_grad, one_hot, softmax
from .replay import ReplayBuffer

ARCHITECTURES = ("DF", "FF", "RFF")


@dataclass(frozen=True)
class TrainCadence:
    steps_per_trigger: int = 1
    trigger_every_rounds: int = 4

    def __post_init__(self):
        if self.steps_per_trigger < 1 or self.trigger_every_rounds < 1:
            raise ConfigError("cadence values must be >= 1")


@dataclass(frozen=True)
class NeuralConfig:
    """Hyperparameters shared by the three architectures.

    ``lr`` trains towers fed by the instance (outcome tower of DF, the proxy
    tower, the residual tower); ``g_lr`` trains the hidden-layer-free,
    bias-free, unregularised proxy-to-outcome tower.
    """

    hidden: tuple[int, ...] = (40, 20)
    lr: float = 0.1
    g_lr: float = 1.0
    l2: float = 0.01
    capacity: int = 1000
    min_fill: int = 128
    batch_size: int = 128
    steps_per_trigger: int = 1
    trigger_every: int = 4

    def __post_init__(self):
        if any(h < 1 for h in self.hidden):
            raise ConfigError("hidden sizes must be >= 1")
        if self.lr <= 0 or self.g_lr <= 0 or self.l2 < 0:
            raise ConfigError("learning rates must be positive and l2 non-negative")
        if min(self.capacity, self.min_fill, self.batch_size) < 1:
            raise ConfigError("capacity, min_fill and batch_size must be >= 1")
        if self.min_fill > self.capacity:
            raise ConfigError("min_fill exceeds buffer capacity")
        TrainCadence(self.steps_per_trigger, self.trigger_every)

    @property
    def cadence(self) -> TrainCadence:
        return TrainCadence(self.steps_per_trigger, self.trigger_every)

    def replace(self, **changes) -> "NeuralConfig":
        return dataclasses.replace(self, **changes)


NEURAL_PRESETS = {
    "github": NeuralConfig(hidden=(40, 20), lr=0.1, g_lr=1.0, l2=0.01, capacity=1000, min_fill=128,
                           batch_size=128, steps_per_trigger=1, trigger_every=4),
    "marketplace": NeuralConfig(hidden=(20, 10), lr=0.1, g_lr=0.1, l2=0.01, capacity=3000, min_fill=500,
                                batch_size=128, steps_per_trigger=20, trigger_every=1000),
}


class NeuralForecaster(Forecaster):
    """Shared plumbing: one-hot encodings, buffers and the training cadence."""

    architecture = ""

    def __init__(self, spaces: ProblemSpaces, config: NeuralConfig | None = None, seed: int = 0):
        self.spaces = spaces
        self.config = config or NEURAL_PRESETS["github"]
        self.seed = seed
        self.reset()

    def reset(self):
        self.rng = make_rng(self.seed)
        self.steps = {}
        self._build()

    def _build(self):
        raise NotImplementedError

    def _x(self, instance):
        return one_hot(instance, self.spaces.n_instances)

    def _z(self, proxy):
        return one_hot(proxy, self.spaces.n_proxies)

    def _buffer(self, width):
        c = self.config
        return ReplayBuffer(c.capacity, width, self.rng)

    def _count(self, tower, n=1):
        self.steps[tower] = self.steps.get(tower, 0) + n

    def end_round(self, t):
        c = self.config
        if t % c.trigger_every:
            return
        for buffer, step in self._trainers():
            if len(buffer) >= c.min_fill:
                for _ in range(c.steps_per_trigger):
                    step(buffer.sample(c.batch_size))

    def _trainers(self):
        raise NotImplementedError


class NeuralDF(NeuralForecaster):
    """One MLP from instance to outcome logits; proxies ignored."""

    architecture = "DF"
    name = "nn-df"

    def _build(self):
        c, sp = self.config, self.spaces
        self.net = Mlp([sp.n_instances, *c.hidden, sp.n_outcomes], self.rng, lr=c.lr, l2=c.l2)
        self.outcome_buffer = self._buffer(2)

    def predict(self, instance):
        self.spaces.check_instance(instance)
        return softmax(self.net.forward(self._x(instance)))

    def observe_outcome(self, instance, proxy, outcome):
        self.outcome_buffer.add((instance, outcome))

    def train_step(self, batch):
        loss = self.net.sgd_step(self._x(batch[:, 0]), batch[:, 1])
        self._count("outcome")
        return loss

    def _trainers(self):
        return [(self.outcome_buffer, self.train_step)]


class NeuralFF(NeuralForecaster):
    """Proxy tower h(z | x) mixed with a linear proxy-to-outcome tower g(y | z)."""

    architecture = "FF"
    name = "nn-ff"

    def _build(self):
        c, sp = self.config, self.spaces
        self.h_net = Mlp([sp.n_instances, *c.hidden, sp.n_proxies], self.rng, lr=c.lr, l2=c.l2)
        self.g_net = Mlp([sp.n_proxies, sp.n_outcomes], self.rng, lr=c.g_lr, l2=0.0, bias_output=False)
        self.proxy_buffer = self._buffer(2)
        self.outcome_buffer = self._buffer(3)
        self._eye_z = np.eye(sp.n_proxies)

    def h_probs(self, instance) -> np.ndarray:
        return softmax(self.h_net.forward(self._x(instance)))

    def g_logits(self) -> np.ndarray:
        """(|Z|, |Y|) outcome logits from the proxy alone."""
        return self.g_net.forward(self._eye_z)

    def outcome_given_proxy(self, instance) -> np.ndarray:
        """(|Z|, |Y|) rows q(. | x, z) mixed by h(. | x)."""
        return softmax(self.g_logits())

    def predict(self, instance):
        self.spaces.check_instance(instance)
        return self.h_probs(instance) @ self.outcome_given_proxy(instance)

    def factor_probs(self, instance, proxy, outcome):
        return float(self.outcome_given_proxy(instance)[proxy, outcome]), float(self.h_probs(instance)[proxy])

    def observe_proxy(self, instance, proxy):
        self.proxy_buffer.add((instance, proxy))

    def observe_outcome(self, instance, proxy, outcome):
        self.outcome_buffer.add((instance, proxy, outcome))

    def h_step(self, batch):
        loss = self.h_net.sgd_step(self._x(batch[:, 0]), batch[:, 1])
        self._count("proxy")
        return loss

    def g_step(self, batch):
        loss = self.g_net.sgd_step(self._z(batch[:, 1]), batch[:, 2])
        self._count("outcome")
        return loss

    def _trainers(self):
        return [(self.proxy_buffer, self.h_step), (self.outcome_buffer, self.g_step)]


class NeuralRFF(NeuralFF):
    """FF plus a residual tower adding instance-dependent corrections to the
    proxy-only outcome logits.

    For each proxy z the combined logits are ``g_logits(z) + delta(x, z, g_logits(z))``
    and q(. | x, z) is their softmax. The residual tower reads the instance
    one-hot, the proxy one-hot and the proxy-only logits, the latter treated as
    constants, so the combined-logit loss trains only the residual tower.
    """

    architecture = "RFF"
    name = "nn-rff"

    def _build(self):
        super()._build()
        c, sp = self.config, self.spaces
        width = sp.n_instances + sp.n_proxies + sp.n_outcomes
        self.r_net = Mlp([width, *c.hidden, sp.n_outcomes], self.rng, lr=c.lr, l2=c.l2)
        # start as a pure FF: zero correction until the residual tower learns one
        self.r_net.weights[-1][:] = 0.0

    def _residual_input(self, x_onehot, z_onehot, fb_logits):
        return np.concatenate([x_onehot, z_onehot, fb_logits], axis=-1)

    def residual_logits(self, instance, fb_logits=None) -> np.ndarray:
        """(|Z|, |Y|) corrections for every proxy at this instance."""
        sp = self.spaces
        if fb_logits is None:
            fb_logits = self.g_logits()
        xs = np.repeat(self._x(instance)[None, :], sp.n_proxies, axis=0)
        return self.r_net.forward(self._residual_input(xs, self._eye_z, fb_logits))

    def outcome_given_proxy(self, instance):
        fb = self.g_logits()
        return softmax(fb + self.residual_logits(instance, fb))

    def residual_step(self, batch):
        """SGD on the combined-logit loss; only the residual tower moves."""
        xs, zs, ys = self._x(batch[:, 0]), self._z(batch[:, 1]), batch[:, 2]
        fb = self.g_net.forward(zs)  # constant here
        delta, cache = self.r_net.forward(self._residual_input(xs, zs, fb), return_cache=True)
        loss, d = cross_entropy_grad(fb + delta, ys)
        self.r_net.apply(self.r_net.backward(cache, d))
        self._count("residual")
        return loss

    def outcome_step(self, batch):
        # both losses read the pre-step feedback tower
        xs, zs, ys = self._x(batch[:, 0]), self._z(batch[:, 1]), batch[:, 2]
        fb, g_cache = self.g_net.forward(zs, return_cache=True)
        g_loss, g_d = cross_entropy_grad(fb, ys)
        delta, r_cache = self.r_net.forward(self._residual_input(xs, zs, fb), return_cache=True)
        r_loss, r_d = cross_entropy_grad(fb + delta, ys)
        self.g_net.apply(self.g_net.backward(g_cache, g_d))
        self.r_net.apply(self.r_net.backward(r_cache, r_d))
        self._count("outcome")
        self._count("residual")
        return g_loss, r_loss

    def _trainers(self):
        return [(self.proxy_buffer, self.h_step), (self.outcome_buffer, self.outcome_step)]


NEURAL_KINDS = {"nn-df": NeuralDF, "nn-ff": NeuralFF, "nn-rff": NeuralRFF}
