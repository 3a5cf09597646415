"""Layer kernels with hand-written backward passes.

Every layer keeps its parameters in ``params``, accumulated gradients in
``grads`` (same keys and shapes), and non-trainable state in ``buffers``.
``forward`` caches whatever ``backward`` needs; ``backward`` takes the
gradient of the loss w.r.t. the layer output and returns it w.r.t. the
layer input, adding parameter gradients into ``grads``.
"""

from __future__ import annotations

import numpy as np

from rangegen.errors import ConfigurationError, UsageError

# Self-normalizing ELU constants (Klambauer et al. values, truncated).
SELU_SCALE = 1.05070098
SELU_ALPHA = 1.67326324

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.9


def selu(x: np.ndarray) -> np.ndarray:
    """Scaled exponential linear unit, elementwise."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, SELU_SCALE * x, SELU_SCALE * SELU_ALPHA * np.expm1(x))


def selu_deriv(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, SELU_SCALE, SELU_SCALE * SELU_ALPHA * np.exp(np.minimum(x, 0.0)))


def logistic(t: np.ndarray) -> np.ndarray:
    """Numerically stable logistic sigmoid, elementwise."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


class Layer:
    """Common parameter/gradient bookkeeping."""

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def _register(self, name: str, value: np.ndarray) -> None:
        self.params[name] = np.asarray(value, dtype=float)
        self.grads[name] = np.zeros_like(self.params[name])

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0


class Dense(Layer):
    """Affine map y = x W^T + b with weight shape (out, in)."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 zero_init: bool = False) -> None:
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        if zero_init:
            w = np.zeros((out_dim, in_dim))
        else:
            # LeCun normal keeps SELU activations in the self-normalizing regime.
            w = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(out_dim, in_dim))
        self._register("w", w)
        self._register("b", np.zeros(out_dim))
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ConfigurationError(
                f"dense layer expects (N, {self.in_dim}) input, got {x.shape}")
        self._x = x
        return x @ self.params["w"].T + self.params["b"]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        x = self._x
        self.grads["w"] += dout.T @ x
        self.grads["b"] += dout.sum(axis=0)
        return dout @ self.params["w"]


class Selu(Layer):
    """SELU activation with cached pre-activation."""

    def __init__(self) -> None:
        super().__init__()
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return selu(x)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout * selu_deriv(self._x)


class Logistic(Layer):
    """Logistic sigmoid activation with cached output."""

    def __init__(self) -> None:
        super().__init__()
        self._out: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._out = logistic(x)
        return self._out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout * self._out * (1.0 - self._out)


class _NormCore:
    """Shared normalization math for plain and condition-modulated batch norm.

    Train mode normalizes by batch statistics and refreshes the running
    exponential moving averages; eval mode is a per-sample affine map using
    the stored running statistics. Variances get an epsilon floor.
    """

    def __init__(self, dim: int, buffers: dict[str, np.ndarray]) -> None:
        self.dim = dim
        buffers["running_mean"] = np.zeros(dim)
        buffers["running_var"] = np.ones(dim)
        self._buffers = buffers
        self._xhat: np.ndarray | None = None
        self._inv_std: np.ndarray | None = None
        self._train_mode = False

    def normalize(self, h: np.ndarray, train: bool) -> np.ndarray:
        if h.ndim != 2 or h.shape[1] != self.dim:
            raise ConfigurationError(
                f"batch norm expects (N, {self.dim}) input, got {h.shape}")
        self._train_mode = train
        if train:
            if h.shape[0] < 2:
                raise UsageError("batch statistics need at least 2 samples")
            mean = h.mean(axis=0)
            var = h.var(axis=0)
            rm = self._buffers["running_mean"]
            rv = self._buffers["running_var"]
            rm[...] = BN_MOMENTUM * rm + (1.0 - BN_MOMENTUM) * mean
            rv[...] = BN_MOMENTUM * rv + (1.0 - BN_MOMENTUM) * var
        else:
            mean = self._buffers["running_mean"]
            var = self._buffers["running_var"]
        self._inv_std = 1.0 / np.sqrt(var + BN_EPSILON)
        self._xhat = (h - mean) * self._inv_std
        return self._xhat

    def backward(self, dxhat: np.ndarray) -> np.ndarray:
        if not self._train_mode:
            return dxhat * self._inv_std
        # Train mode couples every sample through the batch mean/variance.
        n = dxhat.shape[0]
        sum_d = dxhat.sum(axis=0)
        sum_dx = (dxhat * self._xhat).sum(axis=0)
        return (self._inv_std / n) * (n * dxhat - sum_d - self._xhat * sum_dx)

    @property
    def xhat(self) -> np.ndarray:
        return self._xhat


class BatchNorm(Layer):
    """Batch normalization with learned per-feature scale and shift."""

    def __init__(self, dim: int) -> None:
        super().__init__()
        self._register("gamma", np.ones(dim))
        self._register("beta", np.zeros(dim))
        self._core = _NormCore(dim, self.buffers)

    def forward(self, h: np.ndarray, train: bool) -> np.ndarray:
        xhat = self._core.normalize(np.asarray(h, dtype=float), train)
        return self.params["gamma"] * xhat + self.params["beta"]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        self.grads["gamma"] += (dout * self._core.xhat).sum(axis=0)
        self.grads["beta"] += dout.sum(axis=0)
        return self._core.backward(dout * self.params["gamma"])


class CondBatchNorm(Layer):
    """Batch normalization whose scale and shift are affine in a condition vector.

    gamma(c) = Wg c + 1 and beta(c) = Wb c, so zero-initialized weights make
    the layer behave exactly like parameterless batch normalization. The
    condition is shared by the whole batch and is not differentiated through.
    """

    def __init__(self, dim: int, cond_dim: int) -> None:
        super().__init__()
        self.cond_dim = cond_dim
        self._register("wg", np.zeros((dim, cond_dim)))
        self._register("wb", np.zeros((dim, cond_dim)))
        self._core = _NormCore(dim, self.buffers)
        self._cond: np.ndarray | None = None
        self._gamma: np.ndarray | None = None

    def forward(self, h: np.ndarray, cond: np.ndarray, train: bool) -> np.ndarray:
        cond = np.asarray(cond, dtype=float).ravel()
        if cond.shape != (self.cond_dim,):
            raise ConfigurationError(
                f"condition vector must have length {self.cond_dim}, got {cond.shape}")
        self._cond = cond
        self._gamma = self.params["wg"] @ cond + 1.0
        beta = self.params["wb"] @ cond
        xhat = self._core.normalize(np.asarray(h, dtype=float), train)
        return self._gamma * xhat + beta

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dgamma = (dout * self._core.xhat).sum(axis=0)
        dbeta = dout.sum(axis=0)
        self.grads["wg"] += np.outer(dgamma, self._cond)
        self.grads["wb"] += np.outer(dbeta, self._cond)
        return self._core.backward(dout * self._gamma)
