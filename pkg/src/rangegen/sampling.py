"""Condition sampling, label normalization, and uniform-label batch selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rangegen.errors import ConfigurationError, UsageError
from rangegen.losses import RangeCondition

MIN_CONDITION_WIDTH = 0.05


@dataclass(frozen=True)
class LabelNormalizer:
    """Affine map taking each raw label's [raw_min, raw_max] onto [0, 1].

    Values outside the fitted interval map outside [0, 1] and are left
    unclipped so downstream metrics see them honestly.
    """

    raw_min: tuple[float, ...]
    raw_max: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in np.atleast_1d(self.raw_min))
        hi = tuple(float(v) for v in np.atleast_1d(self.raw_max))
        object.__setattr__(self, "raw_min", lo)
        object.__setattr__(self, "raw_max", hi)
        if len(lo) != len(hi):
            raise ConfigurationError("normalizer bounds must pair up")
        for a, b in zip(lo, hi):
            if not a < b:
                raise ConfigurationError(
                    f"degenerate label range [{a}, {b}] cannot be normalized")

    @classmethod
    def fit(cls, raw_labels: np.ndarray) -> "LabelNormalizer":
        raw = np.atleast_2d(np.asarray(raw_labels, dtype=float))
        return cls(tuple(raw.min(axis=0)), tuple(raw.max(axis=0)))

    @property
    def n_labels(self) -> int:
        return len(self.raw_min)

    def _bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.raw_min), np.asarray(self.raw_max)

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        lo, hi = self._bounds()
        return (np.asarray(raw, dtype=float) - lo) / (hi - lo)

    def denormalize(self, norm: np.ndarray) -> np.ndarray:
        lo, hi = self._bounds()
        return np.asarray(norm, dtype=float) * (hi - lo) + lo


def sample_condition(rng: np.random.Generator, n_labels: int,
                     min_width: float = MIN_CONDITION_WIDTH) -> RangeCondition:
    """One training condition: per label, lb ~ U(0, 1-w) then ub ~ U(lb+w, 1).

    Assumes labels normalized to [0, 1]; the construction guarantees a range
    of width at least ``min_width``.
    """
    lbs = []
    ubs = []
    for _ in range(n_labels):
        lb = rng.uniform(0.0, 1.0 - min_width)
        ub = rng.uniform(lb + min_width, 1.0)
        lbs.append(lb)
        ubs.append(ub)
    return RangeCondition(tuple(lbs), tuple(ubs))


class NearestLabelIndex:
    """Pre-sorted lookup of the dataset row whose label is nearest a query.

    Distance ties (duplicate label values, or a query exactly midway between
    two values) resolve to the lowest original row index.
    """

    def __init__(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            raise UsageError("nearest-label index needs a non-empty dataset")
        self._n = values.size
        order = np.argsort(values, kind="stable")
        self._sorted = values[order]
        # Stable sort puts equal values in ascending row order, so the first
        # position of each run carries the lowest original index for that value.
        first_of_run = np.r_[True, self._sorted[1:] != self._sorted[:-1]]
        run_start = np.maximum.accumulate(
            np.where(first_of_run, np.arange(self._n), 0))
        self._min_index = order[run_start]

    def query(self, u: np.ndarray) -> np.ndarray:
        """Original row indices of the nearest labels for each query value."""
        u = np.asarray(u, dtype=float).ravel()
        j = np.searchsorted(self._sorted, u)
        left = np.clip(j - 1, 0, self._n - 1)
        right = np.clip(j, 0, self._n - 1)
        d_left = np.where(j == 0, np.inf, np.abs(u - self._sorted[left]))
        d_right = np.where(j == self._n, np.inf, np.abs(self._sorted[right] - u))
        il = self._min_index[left]
        ir = self._min_index[right]
        out = np.where(d_left < d_right, il, ir)
        tie = d_left == d_right
        if tie.any():
            out[tie] = np.minimum(il[tie], ir[tie])
        return out


def uniform_label_batch(labels: np.ndarray, batch_size: int,
                        rng: np.random.Generator,
                        index: NearestLabelIndex | None = None) -> np.ndarray:
    """Row indices of a batch whose labels spread uniformly over [0, 1].

    Draws one uniform target per slot and picks the dataset row with the
    nearest normalized label, sampling with replacement. Pass a prebuilt
    ``NearestLabelIndex`` to skip re-sorting.
    """
    if index is None:
        index = NearestLabelIndex(labels)
    u = rng.uniform(0.0, 1.0, size=batch_size)
    return index.query(u)
