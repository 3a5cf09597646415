"""The three dense networks: condition-modulated generator, discriminator,
and residual label estimator.

All hidden activations are SELU. The generator injects its condition through
conditional batch normalization after every hidden linear layer and squashes
outputs with a logistic sigmoid; the discriminator is unconditional; the
estimator carries pre-activation, pre-normalization residual connections
between successive equal-width blocks and a linear output head. Output
layers start at zero so fresh networks are exactly neutral (probability 0.5,
predictions 0).
"""

from __future__ import annotations

import hashlib

import numpy as np

from rangegen.errors import ConfigurationError
from rangegen.losses import RangeCondition
from rangegen.netcore.checkpoint import array_from_doc, array_to_doc
from rangegen.netcore.layers import BatchNorm, CondBatchNorm, Dense, Layer, Logistic, Selu


class _Network:
    """Ordered layer registry with flat parameter/buffer access."""

    def __init__(self) -> None:
        self._named_layers: list[tuple[str, Layer]] = []

    def _add(self, name: str, layer: Layer) -> Layer:
        self._named_layers.append((name, layer))
        return layer

    def trainable(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{ln}.{k}", layer.params[k])
                for ln, layer in self._named_layers for k in layer.params]

    def trainable_arrays(self) -> list[np.ndarray]:
        return [arr for _, arr in self.trainable()]

    def grad_arrays(self) -> list[np.ndarray]:
        return [layer.grads[k]
                for _, layer in self._named_layers for k in layer.grads]

    def buffer_items(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{ln}.{k}", layer.buffers[k])
                for ln, layer in self._named_layers for k in layer.buffers]

    def zero_grads(self) -> None:
        for _, layer in self._named_layers:
            layer.zero_grads()

    def _config(self) -> dict:
        raise NotImplementedError

    def to_doc(self) -> dict:
        return {
            "config": self._config(),
            "params": {name: array_to_doc(a) for name, a in self.trainable()},
            "buffers": {name: array_to_doc(a) for name, a in self.buffer_items()},
        }

    def load_doc(self, doc: dict) -> None:
        for name, arr in self.trainable():
            if name not in doc["params"]:
                raise ConfigurationError(f"checkpoint missing parameter {name}")
            loaded = array_from_doc(doc["params"][name])
            if loaded.shape != arr.shape:
                raise ConfigurationError(
                    f"checkpoint parameter {name} has shape {loaded.shape}, "
                    f"expected {arr.shape}")
            arr[...] = loaded
        for name, arr in self.buffer_items():
            if name not in doc["buffers"]:
                raise ConfigurationError(f"checkpoint missing buffer {name}")
            arr[...] = array_from_doc(doc["buffers"][name])


def param_hash(net: _Network) -> str:
    """SHA-256 over the network's named trainable parameters."""
    h = hashlib.sha256()
    for name, arr in net.trainable():
        h.update(name.encode())
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


class Generator(_Network):
    """Maps (noise, range condition) to designs in (0, 1)^output_dim."""

    def __init__(self, noise_dim: int, cond_dim: int, output_dim: int,
                 hidden: tuple[int, ...], rng: np.random.Generator) -> None:
        super().__init__()
        self.noise_dim = noise_dim
        self.cond_dim = cond_dim
        self.output_dim = output_dim
        self.hidden = tuple(int(w) for w in hidden)
        self._blocks = []
        in_dim = noise_dim
        for i, width in enumerate(self.hidden):
            dense = self._add(f"h{i}.dense", Dense(in_dim, width, rng))
            cbn = self._add(f"h{i}.cbn", CondBatchNorm(width, cond_dim))
            act = Selu()
            self._blocks.append((dense, cbn, act))
            in_dim = width
        self._out = self._add("out.dense", Dense(in_dim, output_dim, rng, zero_init=True))
        self._out_act = Logistic()

    def _config(self) -> dict:
        return {"kind": "generator", "noise_dim": self.noise_dim,
                "cond_dim": self.cond_dim, "output_dim": self.output_dim,
                "hidden": list(self.hidden)}

    def forward(self, z: np.ndarray, cond: RangeCondition, train: bool) -> np.ndarray:
        cond.validate()
        c = cond.encode()
        if c.shape != (self.cond_dim,):
            raise ConfigurationError(
                f"condition encodes to {c.shape}, generator expects ({self.cond_dim},)")
        # Center the condition features so modulation leverage is symmetric
        # across the label space instead of vanishing near the origin.
        c = c - 0.5
        h = np.asarray(z, dtype=float)
        for dense, cbn, act in self._blocks:
            h = act.forward(cbn.forward(dense.forward(h), c, train))
        return self._out_act.forward(self._out.forward(h))

    def backward(self, dx: np.ndarray) -> np.ndarray:
        dh = self._out.backward(self._out_act.backward(dx))
        for dense, cbn, act in reversed(self._blocks):
            dh = dense.backward(cbn.backward(act.backward(dh)))
        return dh


class Discriminator(_Network):
    """Maps designs to real-vs-generated probabilities; no condition input."""

    def __init__(self, input_dim: int, hidden: tuple[int, ...],
                 rng: np.random.Generator) -> None:
        super().__init__()
        self.input_dim = input_dim
        self.hidden = tuple(int(w) for w in hidden)
        self._blocks = []
        in_dim = input_dim
        for i, width in enumerate(self.hidden):
            dense = self._add(f"h{i}.dense", Dense(in_dim, width, rng))
            self._blocks.append((dense, Selu()))
            in_dim = width
        self._out = self._add("out.dense", Dense(in_dim, 1, rng, zero_init=True))
        self._out_act = Logistic()

    def _config(self) -> dict:
        return {"kind": "discriminator", "input_dim": self.input_dim,
                "hidden": list(self.hidden)}

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        h = np.asarray(x, dtype=float)
        for dense, act in self._blocks:
            h = act.forward(dense.forward(h))
        return self._out_act.forward(self._out.forward(h)).ravel()

    def backward(self, dp: np.ndarray) -> np.ndarray:
        dh = self._out.backward(self._out_act.backward(dp.reshape(-1, 1)))
        for dense, act in reversed(self._blocks):
            dh = dense.backward(act.backward(dh))
        return dh


class Estimator(_Network):
    """Predicts normalized labels from designs; used frozen to steer training.

    Residual connections add each block's pre-normalization, pre-activation
    output into the next block's, so every hidden width must match when
    residuals are on.
    """

    def __init__(self, input_dim: int, output_dim: int, hidden: tuple[int, ...],
                 rng: np.random.Generator, residual: bool = True) -> None:
        super().__init__()
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.hidden = tuple(int(w) for w in hidden)
        self.residual = residual
        if residual and len(set(self.hidden)) > 1:
            raise ConfigurationError(
                f"residual estimator needs equal hidden widths, got {self.hidden}")
        self._blocks = []
        in_dim = input_dim
        for i, width in enumerate(self.hidden):
            dense = self._add(f"h{i}.dense", Dense(in_dim, width, rng))
            bn = self._add(f"h{i}.bn", BatchNorm(width))
            self._blocks.append((dense, bn, Selu()))
            in_dim = width
        self._out = self._add("out.dense", Dense(in_dim, output_dim, rng, zero_init=True))

    def _config(self) -> dict:
        return {"kind": "estimator", "input_dim": self.input_dim,
                "output_dim": self.output_dim, "hidden": list(self.hidden),
                "residual": self.residual}

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        h = np.asarray(x, dtype=float)
        prev_u = None
        for dense, bn, act in self._blocks:
            u = dense.forward(h)
            if self.residual and prev_u is not None:
                u = u + prev_u
            h = act.forward(bn.forward(u, train))
            prev_u = u
        return self._out.forward(h)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dh = self._out.backward(np.asarray(dy, dtype=float))
        du_carry = None
        for i in reversed(range(len(self._blocks))):
            dense, bn, act = self._blocks[i]
            du = bn.backward(act.backward(dh))
            if du_carry is not None:
                du = du + du_carry
            du_carry = du if (self.residual and i > 0) else None
            dh = dense.backward(du)
        return dh


_KINDS = {"generator": Generator, "discriminator": Discriminator,
          "estimator": Estimator}


def network_from_doc(doc: dict) -> Generator | Discriminator | Estimator:
    """Rebuild a network from its checkpoint document."""
    cfg = dict(doc["config"])
    kind = cfg.pop("kind", None)
    if kind not in _KINDS:
        raise ConfigurationError(f"unknown network kind {kind!r}")
    cfg["hidden"] = tuple(cfg["hidden"])
    net = _KINDS[kind](rng=np.random.default_rng(0), **cfg)
    net.load_doc(doc)
    return net
