"""Small fully-connected softmax networks with hand-written backprop."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..core import UsageError


def relu(a):
    return np.maximum(a, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax (works on a vector or a batch)."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def one_hot(idx, width: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    out = np.zeros(idx.shape + (width,))
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return out


def cross_entropy_grad(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood of ``targets`` and its gradient w.r.t. ``logits``."""
    n = logits.shape[0]
    lsm = log_softmax(logits)
    rows = np.arange(n)
    loss = -lsm[rows, targets].mean()
    d = np.exp(lsm)
    d[rows, targets] -= 1.0
    return float(loss), d / n


@dataclass
class Cache:
    inputs: list   # activation entering each layer
    pre: list      # pre-activations of hidden layers


class Mlp:
    """Feed-forward net: ReLU hidden layers, identity (logit) output.

    Weights are stored as ``(fan_in, fan_out)`` matrices. L2 regularisation
    (``0.5 * l2 * ||W||^2``) applies to weight matrices, never to biases.
    """

    def __init__(self, sizes, rng: np.random.Generator | None = None, *, lr: float = 0.1,
                 l2: float = 0.0, bias_output: bool = True, init: str = "uniform"):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise UsageError(f"bad layer sizes {sizes}")
        if lr <= 0 or l2 < 0:
            raise UsageError("lr must be positive and l2 non-negative")
        self.sizes = sizes
        self.lr = lr
        self.l2 = l2
        self.bias_output = bias_output
        self.weights = []
        self.biases = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if init == "zeros":
                w = np.zeros((fan_in, fan_out))
            elif init == "uniform":
                if rng is None:
                    raise UsageError("uniform init needs an rng")
                bound = 1.0 / np.sqrt(fan_in)
                w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            else:
                raise UsageError(f"unknown init {init!r}")
            last = i == len(sizes) - 2
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out) if (not last or bias_output) else None)

    @property
    def n_in(self):
        return self.sizes[0]

    @property
    def n_out(self):
        return self.sizes[-1]

    @property
    def n_layers(self):
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair if p is not None]

    def forward(self, x: np.ndarray, return_cache: bool = False):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        a = x[None, :] if single else x
        if a.shape[1] != self.n_in:
            raise UsageError(f"input width {a.shape[1]} != {self.n_in}")
        inputs, pre = [], []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            s = a @ w
            if b is not None:
                s = s + b
            if i < self.n_layers - 1:
                pre.append(s)
                a = relu(s)
            else:
                a = s
        out = a[0] if single else a
        if return_cache:
            return out, Cache(inputs, pre)
        return out

    def backward(self, cache: Cache, dlogits: np.ndarray, regularize: bool = True):
        """Gradients of (whatever produced ``dlogits``) + L2 term, as ``(dW, db)`` per layer."""
        grads = [None] * self.n_layers
        d = dlogits
        for i in reversed(range(self.n_layers)):
            a = cache.inputs[i]
            dw = a.T @ d
            if regularize and self.l2:
                dw = dw + self.l2 * self.weights[i]
            db = d.sum(axis=0) if self.biases[i] is not None else None
            grads[i] = (dw, db)
            if i > 0:
                d = (d @ self.weights[i].T) * (cache.pre[i - 1] > 0)
        return grads

    def l2_penalty(self) -> float:
        if not self.l2:
            return 0.0
        return 0.5 * self.l2 * sum(float((w * w).sum()) for w in self.weights)

    def objective(self, x: np.ndarray, targets) -> float:
        """Mean log-loss over the batch plus the L2 penalty."""
        targets = np.asarray(targets, dtype=np.int64)
        lsm = log_softmax(self.forward(np.atleast_2d(x)))
        return float(-lsm[np.arange(len(targets)), targets].mean()) + self.l2_penalty()

    def loss_and_grads(self, x: np.ndarray, targets):
        targets = np.asarray(targets, dtype=np.int64)
        logits, cache = self.forward(np.atleast_2d(x), return_cache=True)
        loss, d = cross_entropy_grad(logits, targets)
        return loss, self.backward(cache, d)

    def apply(self, grads, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        for i, (dw, db) in enumerate(grads):
            self.weights[i] -= lr * dw
            if db is not None:
                self.biases[i] -= lr * db

    def sgd_step(self, x: np.ndarray, targets) -> float:
        """One SGD step on the batch; returns the mean log-loss before the step."""
        if len(targets) == 0:
            raise UsageError("empty batch")
        loss, grads = self.loss_and_grads(x, targets)
        self.apply(grads)
        return loss

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.forward(x))

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        pos = 0
        for p in self.parameters():
            p[...] = flat[pos:pos + p.size].reshape(p.shape)
            pos += p.size
        if pos != len(flat):
            raise UsageError(f"expected {pos} parameters, got {len(flat)}")

    def flat_grad(self, grads) -> np.ndarray:
        parts = []
        for dw, db in grads:
            parts.append(dw.ravel())
            if db is not None:
                parts.append(db.ravel())
        return np.concatenate(parts)

    def copy(self) -> "Mlp":
        new = Mlp.__new__(Mlp)
        new.__dict__.update(self.__dict__)
        new.weights = [w.copy() for w in self.weights]
        new.biases = [None if b is None else b.copy() for b in self.biases]
        return new

    def dump_csv(self, path: str | os.PathLike) -> None:
        """Write every parameter as ``layer,kind,row,col,value`` (kind is W or b; col is 0 for b)."""
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("layer,kind,row,col,value\n")
            for i, (w, b) in enumerate(zip(self.weights, self.biases)):
                for (r, c), v in np.ndenumerate(w):
                    fh.write(f"{i},W,{r},{c},{float(v)!r}\n")
                if b is not None:
                    for r, v in enumerate(b):
                        fh.write(f"{i},b,{r},0,{float(v)!r}\n")


def numeric_grad(net: Mlp, objective, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``objective()`` w.r.t. every parameter of ``net``, flattened
    in :meth:`Mlp.get_flat` order. Parameters are perturbed in place and restored."""
    out = []
    for p in net.parameters():
        flat = p.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = objective()
            flat[i] = orig - h
            down = objective()
            flat[i] = orig
            out.append((up - down) / (2 * h))
    return np.array(out)


def fd_grad(net: Mlp, x: np.ndarray, targets, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``net.objective(x, targets)``, same order as
    :meth:`Mlp.get_flat`.

    Equivalent to :func:`numeric_grad` on that objective but batched: a single
    parameter in layer i only shifts layer i's pre-activations, so every
    perturbation of a layer is evaluated at once from the cached prefix.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.int64)
    _, cache = net.forward(x, return_cache=True)
    base_pen = net.l2_penalty()
    rows = np.arange(len(targets))
    last = net.n_layers - 1

    def objective_from(i, s):
        # s: (P, batch, width_i) pre-activations of layer i; returns (P,) objectives
        for j in range(i, last):
            a = relu(s)
            w, b = net.weights[j + 1], net.biases[j + 1]
            s = a @ w if b is None else a @ w + b
        lsm = log_softmax(s)
        return -lsm[:, rows, targets].mean(axis=1)

    out = []
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        a = cache.inputs[i]
        s = a @ w if b is None else a @ w + b
        n_in, n_out = w.shape
        r, c = np.divmod(np.arange(w.size), n_out)
        diffs = []
        for sign in (1.0, -1.0):
            S = np.repeat(s[None], w.size, axis=0)
            S[np.arange(w.size), :, c] += sign * h * a[:, r].T
            pen = base_pen
            if net.l2:
                pen = base_pen + 0.5 * net.l2 * ((w.ravel() + sign * h) ** 2 - w.ravel() ** 2)
            diffs.append(objective_from(i, S) + pen)
        out.append((diffs[0] - diffs[1]) / (2 * h))
        if b is not None:
            diffs = []
            for sign in (1.0, -1.0):
                S = np.repeat(s[None], n_out, axis=0)
                S[np.arange(n_out), :, np.arange(n_out)] += sign * h
                diffs.append(objective_from(i, S) + base_pen)
            out.append((diffs[0] - diffs[1]) / (2 * h))
    return np.concatenate(out)


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)
