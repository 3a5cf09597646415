"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

# Below this scale the FD quotient is dominated by float64 cancellation noise,
# so the denominator is floored rather than comparing raw ratios.
_REL_FLOOR = 1e-6


def grad_check(loss_and_grads: Callable[[], tuple[float, Sequence[np.ndarray]]],
               params: Sequence[np.ndarray], eps: float = 1e-5) -> float:
    """Worst relative error between analytic and central-difference gradients.

    ``loss_and_grads`` must recompute the scalar loss and its gradients from
    the current contents of ``params`` (the live arrays, perturbed in place),
    deterministically. Returns max over every parameter entry of
    |analytic - fd| / max(|analytic| + |fd|, floor).
    """
    _, analytic = loss_and_grads()
    analytic = [np.array(g, dtype=float, copy=True) for g in analytic]
    worst = 0.0
    for p, g in zip(params, analytic):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + eps
            lp, _ = loss_and_grads()
            flat_p[i] = orig - eps
            lm, _ = loss_and_grads()
            flat_p[i] = orig
            fd = (lp - lm) / (2.0 * eps)
            denom = max(abs(fd) + abs(flat_g[i]), _REL_FLOOR)
            worst = max(worst, abs(fd - flat_g[i]) / denom)
    return worst
