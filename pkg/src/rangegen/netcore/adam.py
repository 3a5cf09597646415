"""Adam optimizer with a multiplicative step-decay learning-rate schedule."""

from __future__ import annotations

import numpy as np

from rangegen.errors import TrainingFault


def effective_learning_rate(base_lr: float, decay_factor: float,
                            decay_interval: int, t: int) -> float:
    """Learning rate in effect at step counter ``t`` (post-increment)."""
    return base_lr * decay_factor ** (t // decay_interval)


class Adam:
    """Standard Adam with bias correction over a fixed list of parameter arrays.

    The moment buffers are positionally aligned with ``params``; ``step``
    updates the arrays in place. The step counter increments before the
    update, so the decayed rate kicks in exactly at multiples of
    ``decay_interval``.
    """

    def __init__(self, params: list[np.ndarray], base_lr: float,
                 decay_factor: float = 1.0, decay_interval: int = 1,
                 beta1: float = 0.9, beta2: float = 0.999,
                 epsilon: float = 1e-8) -> None:
        self.params = params
        self.base_lr = base_lr
        self.decay_factor = decay_factor
        self.decay_interval = int(decay_interval)
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    @property
    def effective_lr(self) -> float:
        return effective_learning_rate(
            self.base_lr, self.decay_factor, self.decay_interval, self.t)

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise TrainingFault(
                f"expected {len(self.params)} gradient arrays, got {len(grads)}")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise TrainingFault("non-finite gradient; step aborted")
        self.t += 1
        lr = self.effective_lr
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m[...] = self.beta1 * m + (1.0 - self.beta1) * g
            v[...] = self.beta2 * v + (1.0 - self.beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.epsilon)

    def state_doc(self) -> dict:
        """Serializable snapshot of buffers, counters, and hyperparameters."""
        from rangegen.netcore.checkpoint import array_to_doc
        return {
            "t": self.t,
            "base_lr": self.base_lr,
            "decay_factor": self.decay_factor,
            "decay_interval": self.decay_interval,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "m": [array_to_doc(a) for a in self.m],
            "v": [array_to_doc(a) for a in self.v],
        }

    def load_state_doc(self, doc: dict) -> None:
        from rangegen.netcore.checkpoint import array_from_doc
        self.t = int(doc["t"])
        self.base_lr = float(doc["base_lr"])
        self.decay_factor = float(doc["decay_factor"])
        self.decay_interval = int(doc["decay_interval"])
        self.beta1 = float(doc["beta1"])
        self.beta2 = float(doc["beta2"])
        self.epsilon = float(doc["epsilon"])
        self.m = [array_from_doc(d) for d in doc["m"]]
        self.v = [array_from_doc(d) for d in doc["v"]]
