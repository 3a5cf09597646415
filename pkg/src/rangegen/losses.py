"""Training objectives: adversarial terms, range loss, and uniformity loss.

Each loss comes in a plain form and a ``*_with_grad`` form returning the
gradient w.r.t. the predicted labels (or probabilities). Gradients are exact
for the implemented formulas; the uniformity slice points must be frozen by
the caller when finite-difference checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rangegen.errors import UsageError
from rangegen.netcore.layers import logistic

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class RangeCondition:
    """Per-label [lower, upper] bounds in normalized label space."""

    lb: tuple[float, ...]
    ub: tuple[float, ...]

    def __post_init__(self) -> None:
        lb = tuple(float(v) for v in np.atleast_1d(self.lb))
        ub = tuple(float(v) for v in np.atleast_1d(self.ub))
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)
        if len(lb) != len(ub) or not lb:
            raise UsageError("condition needs matching non-empty lb/ub")

    @property
    def n_labels(self) -> int:
        return len(self.lb)

    def validate(self) -> None:
        for lo, hi in zip(self.lb, self.ub):
            if not (0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0):
                raise UsageError(f"condition bounds [{lo}, {hi}] outside [0, 1]")
            if lo > hi:
                raise UsageError(f"condition lower bound {lo} exceeds upper {hi}")

    def encode(self) -> np.ndarray:
        """Conditioning vector [lb1, ub1, lb2, ub2, ...]."""
        out = np.empty(2 * self.n_labels)
        out[0::2] = self.lb
        out[1::2] = self.ub
        return out

    def satisfied(self, labels: np.ndarray) -> np.ndarray:
        """Boolean mask of samples inside every labelled range (bounds inclusive)."""
        y = np.asarray(labels, dtype=float)
        if y.ndim == 1:
            y = y.reshape(-1, self.n_labels)
        lb = np.asarray(self.lb)
        ub = np.asarray(self.ub)
        return np.all((y - lb) * (y - ub) <= 0.0, axis=1)


@dataclass(frozen=True)
class LossWeights:
    """Sharpness and weighting hyperparameters of the combined objective."""

    phi: float = 20.0
    lambda_range: float = 2.0
    lambda_unif: float = 1.0
    slice_count: int = 5


def satisfaction_probability(y_pred, lb: float, ub: float, phi: float):
    """Smooth probability that a predicted label falls inside [lb, ub].

    Difference of two logistic sigmoids anchored at the bounds:
    sigma(phi (y - lb)) - sigma(phi (y - ub)). Peaks at the range midpoint
    and decays to zero far outside.
    """
    y = np.asarray(y_pred, dtype=float)
    p = logistic(phi * (y - lb)) - logistic(phi * (y - ub))
    return float(p) if np.isscalar(y_pred) else p


def _satisfaction_probability_deriv(y: np.ndarray, lb: float, ub: float,
                                    phi: float) -> np.ndarray:
    s1 = logistic(phi * (y - lb))
    s2 = logistic(phi * (y - ub))
    return phi * (s1 * (1.0 - s1) - s2 * (1.0 - s2))


def violates(y: np.ndarray, lb: float, ub: float) -> np.ndarray:
    """Indicator of the range-loss penalty: (y-ub)(y-lb) >= 0."""
    y = np.asarray(y, dtype=float)
    return (y - ub) * (y - lb) >= 0.0


def range_loss_with_grad(y_preds: np.ndarray, lb: float, ub: float,
                         phi: float) -> tuple[float, np.ndarray]:
    """Mean negative log satisfaction probability over the violating samples.

    Samples strictly inside (lb, ub) contribute neither loss nor gradient;
    the denominator counts violators only. Probabilities are clamped at
    PROB_CLAMP before the log, with zero gradient in the clamped regime.
    """
    y = np.asarray(y_preds, dtype=float).ravel()
    if y.size == 0:
        raise UsageError("range loss needs a non-empty batch")
    mask = violates(y, lb, ub)
    n_viol = int(mask.sum())
    grad = np.zeros_like(y)
    if n_viol == 0:
        return 0.0, grad
    yv = y[mask]
    p = satisfaction_probability(yv, lb, ub, phi)
    clamped = p < PROB_CLAMP
    p_safe = np.maximum(p, PROB_CLAMP)
    loss = float(-np.log(p_safe).sum() / n_viol)
    dp = _satisfaction_probability_deriv(yv, lb, ub, phi)
    gv = np.where(clamped, 0.0, -dp / (p_safe * n_viol))
    grad[mask] = gv
    return loss, grad


def range_loss(y_preds: np.ndarray, lb: float, ub: float, phi: float) -> float:
    return range_loss_with_grad(y_preds, lb, ub, phi)[0]


def draw_slice_points(rng: np.random.Generator, lb: float, ub: float,
                      count: int) -> np.ndarray:
    """Slice positions drawn uniformly inside the condition range."""
    return rng.uniform(lb, ub, size=count)


def uniformity_loss_with_grad(y_preds: np.ndarray, lb: float, ub: float,
                              slice_points: np.ndarray) -> tuple[float, np.ndarray]:
    """Deviation of within-range label means from a uniform distribution's means.

    Each slice point splits [lb, ub] in two; a uniform distribution would put
    each segment's mean at the segment midpoint, so the loss is the absolute
    gap between the two, summed over both segments and averaged over slices.
    Only samples already satisfying the condition participate; empty segments
    contribute nothing.
    """
    if lb >= ub:
        raise UsageError("uniformity loss needs lb < ub")
    y = np.asarray(y_preds, dtype=float).ravel()
    if y.size == 0:
        raise UsageError("uniformity loss needs a non-empty batch")
    slice_points = np.asarray(slice_points, dtype=float).ravel()
    k = slice_points.size
    grad = np.zeros_like(y)
    inside = (y - lb) * (y - ub) <= 0.0
    if not inside.any() or k == 0:
        return 0.0, grad
    ys = y[inside]
    grad_s = np.zeros_like(ys)
    total = 0.0
    for eps in slice_points:
        for seg_lo, seg_hi in ((eps, ub), (lb, eps)):
            seg = (ys - seg_lo) * (ys - seg_hi) <= 0.0
            n_seg = int(seg.sum())
            if n_seg == 0:
                continue
            gap = ys[seg].mean() - 0.5 * (seg_lo + seg_hi)
            total += abs(gap)
            grad_s[seg] += np.sign(gap) / n_seg
    total /= k
    grad_s /= k
    grad[inside] = grad_s
    return float(total), grad


def uniformity_loss(y_preds: np.ndarray, lb: float, ub: float, k: int = 5,
                    rng: np.random.Generator | None = None,
                    slice_points: np.ndarray | None = None) -> float:
    """Uniformity loss with slices drawn from ``rng`` unless given explicitly."""
    if slice_points is None:
        if rng is None:
            raise UsageError("uniformity loss needs rng or explicit slice points")
        slice_points = draw_slice_points(rng, lb, ub, k)
    return uniformity_loss_with_grad(y_preds, lb, ub, slice_points)[0]


def _clamped_probs(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float).ravel()
    clamped = (p < PROB_CLAMP) | (p > 1.0 - PROB_CLAMP)
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP), clamped


def gan_losses(d_real: np.ndarray, d_fake: np.ndarray) -> tuple[float, float]:
    """(discriminator loss, non-saturating generator adversarial loss)."""
    pr, _ = _clamped_probs(d_real)
    pf, _ = _clamped_probs(d_fake)
    d_loss = float(-np.log(pr).mean() - np.log(1.0 - pf).mean())
    g_adv = float(-np.log(pf).mean())
    return d_loss, g_adv


def discriminator_loss_grads(d_real: np.ndarray,
                             d_fake: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Discriminator loss and its gradients w.r.t. both probability batches."""
    pr, cr = _clamped_probs(d_real)
    pf, cf = _clamped_probs(d_fake)
    loss = float(-np.log(pr).mean() - np.log(1.0 - pf).mean())
    d_dr = np.where(cr, 0.0, -1.0 / (pr * pr.size))
    d_df = np.where(cf, 0.0, 1.0 / ((1.0 - pf) * pf.size))
    return loss, d_dr, d_df


def generator_adversarial_grad(d_fake: np.ndarray) -> tuple[float, np.ndarray]:
    """Non-saturating generator loss -mean log D(G(z)) and its gradient."""
    pf, cf = _clamped_probs(d_fake)
    loss = float(-np.log(pf).mean())
    grad = np.where(cf, 0.0, -1.0 / (pf * pf.size))
    return loss, grad


def generator_total_loss(adv: float, range_l: float, unif_l: float,
                         weights: LossWeights) -> float:
    """Combined generator objective: adversarial + weighted penalty terms."""
    return adv + weights.lambda_range * range_l + weights.lambda_unif * unif_l


def _as_label_matrix(y_preds: np.ndarray, n_labels: int) -> np.ndarray:
    y = np.asarray(y_preds, dtype=float)
    return y.reshape(-1, n_labels) if y.ndim == 1 else y


def multi_range_loss_with_grad(y_preds: np.ndarray, cond: RangeCondition,
                               phi: float) -> tuple[float, np.ndarray]:
    """Sum of per-label range losses; gradient has the batch's (N, L) shape."""
    y = _as_label_matrix(y_preds, cond.n_labels)
    total = 0.0
    grad = np.zeros_like(y)
    for j in range(cond.n_labels):
        loss_j, grad_j = range_loss_with_grad(y[:, j], cond.lb[j], cond.ub[j], phi)
        total += loss_j
        grad[:, j] = grad_j
    return total, grad


def multi_uniformity_loss_with_grad(y_preds: np.ndarray, cond: RangeCondition,
                                    slice_points: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of per-label uniformity losses over samples satisfying all constraints.

    ``slice_points`` has shape (L, K): one row of slice positions per label.
    """
    y = _as_label_matrix(y_preds, cond.n_labels)
    slice_points = np.atleast_2d(np.asarray(slice_points, dtype=float))
    ok = cond.satisfied(y)
    total = 0.0
    grad = np.zeros_like(y)
    if not ok.any():
        return 0.0, grad
    for j in range(cond.n_labels):
        loss_j, grad_j = uniformity_loss_with_grad(
            y[ok, j], cond.lb[j], cond.ub[j], slice_points[j])
        total += loss_j
        grad[ok, j] = grad_j
    return total, grad
