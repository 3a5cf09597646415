"""Evaluation protocol: satisfaction, quadratic entropy, condition sweeps,
dataset baselines, ablation pairing, and report/histogram files."""

from __future__ import annotations

import csv
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from rangegen.domain import Dataset, exact_evaluate
from rangegen.errors import DatasetParseError, UsageError
from rangegen.losses import RangeCondition
from rangegen.models import Estimator, Generator
from rangegen.sampling import LabelNormalizer


def satisfaction(labels: np.ndarray, cond: RangeCondition) -> float:
    """Fraction of samples whose labels fall inside every constrained range."""
    mask = cond.satisfied(labels)
    if mask.size == 0:
        raise UsageError("satisfaction needs a non-empty batch")
    return float(mask.mean())


def quadratic_entropy(labels: np.ndarray) -> float:
    """Mean squared distance over all ordered label pairs (including i = j).

    Uses the moment identity (1/N^2) sum_ij (y_i - y_j)^2
    = 2 (mean(y^2) - mean(y)^2).
    """
    y = np.asarray(labels, dtype=float).ravel()
    if y.size == 0:
        raise UsageError("quadratic entropy needs a non-empty batch")
    # the moment identity can go epsilon-negative for identical labels
    return max(0.0, float(2.0 * ((y * y).mean() - y.mean() ** 2)))


def sweep_centers(range_size: float, n_conditions: int) -> np.ndarray:
    """Condition centers spanned uniformly so every window fits inside [0, 1]."""
    if not 0.0 < range_size <= 1.0:
        raise UsageError(f"range size must be in (0, 1], got {range_size}")
    half = range_size / 2.0
    if n_conditions == 1:
        return np.array([0.5])
    return np.linspace(half, 1.0 - half, n_conditions)


def _sweep_conditions(range_size: float, n_conditions: int,
                      n_labels: int) -> list[RangeCondition]:
    # Multi-label sweeps take the cross product of per-axis centers.
    centers = sweep_centers(range_size, n_conditions)
    half = range_size / 2.0
    conditions = []
    for combo in product(centers, repeat=n_labels):
        lbs = tuple(c - half for c in combo)
        ubs = tuple(c + half for c in combo)
        conditions.append(RangeCondition(lbs, ubs))
    return conditions


@dataclass
class SweepReport:
    """Per-condition satisfaction and entropy rows from one sweep."""

    label_names: tuple[str, ...]
    labeler: str
    range_size: float
    n_samples: int
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def mean_satisfaction(self) -> float:
        return float(np.mean([r["satisfaction"] for r in self.rows]))

    def mean_entropy(self) -> float:
        return float(np.mean([r["quadratic_entropy"] for r in self.rows]))

    def header(self) -> list[str]:
        cols = []
        for name in self.label_names:
            cols += [f"center_{name}", f"lb_{name}", f"ub_{name}"]
        cols += ["range_size", "labeler", "n_samples", "n_satisfying",
                 "satisfaction", "quadratic_entropy"]
        return cols

    def csv_rows(self) -> list[list[str]]:
        out = []
        for r in self.rows:
            row = []
            for j in range(len(self.label_names)):
                row += [repr(float(r["centers"][j])), repr(float(r["lbs"][j])),
                        repr(float(r["ubs"][j]))]
            row += [repr(float(self.range_size)), self.labeler,
                    str(self.n_samples), str(r["n_satisfying"]),
                    repr(float(r["satisfaction"])),
                    repr(float(r["quadratic_entropy"]))]
            out.append(row)
        return out


def _entropy_of_satisfying(y: np.ndarray, mask: np.ndarray) -> tuple[float, int]:
    n_sat = int(mask.sum())
    if n_sat == 0:
        return 0.0, 0
    ent = float(np.mean([quadratic_entropy(y[mask, j]) for j in range(y.shape[1])]))
    return ent, n_sat


def _evaluate_conditions(conditions: Sequence[RangeCondition],
                         label_batch_for: Callable[[RangeCondition], np.ndarray],
                         report: SweepReport) -> SweepReport:
    for cond in conditions:
        y = label_batch_for(cond)
        mask = cond.satisfied(y)
        ent, n_sat = _entropy_of_satisfying(y, mask)
        report.rows.append({
            "centers": tuple((lo + hi) / 2.0 for lo, hi in zip(cond.lb, cond.ub)),
            "lbs": cond.lb,
            "ubs": cond.ub,
            "satisfaction": float(mask.mean()),
            "quadratic_entropy": ent,
            "n_satisfying": n_sat,
        })
    return report


def estimator_labeler(est: Estimator) -> Callable[[np.ndarray], np.ndarray]:
    """Labels a design batch with the (frozen) estimator in eval mode."""
    def labeler(x: np.ndarray) -> np.ndarray:
        return est.forward(x, train=False)
    return labeler


def exact_labeler(normalizer: LabelNormalizer,
                  label_indices: Sequence[int]) -> Callable[[np.ndarray], np.ndarray]:
    """Labels a design batch with the closed-form evaluator, normalized."""
    idx = list(label_indices)

    def labeler(x: np.ndarray) -> np.ndarray:
        return normalizer.normalize(exact_evaluate(x))[:, idx]
    return labeler


def condition_sweep(gen: Generator, labeler: Callable[[np.ndarray], np.ndarray],
                    label_names: Sequence[str], range_size: float,
                    n_conditions: int, n_samples: int,
                    rng: np.random.Generator,
                    labeler_name: str = "estimator") -> SweepReport:
    """Generate and label ``n_samples`` designs per swept condition.

    For one constrained label the sweep walks ``n_conditions`` window centers
    across [0, 1]; for two it evaluates the full center grid (n_conditions
    per axis). Entropy is measured over satisfying samples only.
    """
    n_labels = gen.cond_dim // 2
    if len(label_names) != n_labels:
        raise UsageError("label names must match the generator's condition size")
    report = SweepReport(tuple(label_names), labeler_name, range_size, n_samples)

    def batch(cond: RangeCondition) -> np.ndarray:
        z = rng.standard_normal((n_samples, gen.noise_dim))
        return labeler(gen.forward(z, cond, train=False))

    return _evaluate_conditions(
        _sweep_conditions(range_size, n_conditions, n_labels), batch, report)


def data_baseline(ds: Dataset, label_indices: Sequence[int],
                  label_names: Sequence[str], range_size: float,
                  n_conditions: int) -> SweepReport:
    """Satisfaction a random draw from the dataset would achieve per condition."""
    labels = ds.labels_normalized()[:, list(label_indices)]
    report = SweepReport(tuple(label_names), "data", range_size, ds.n_rows)
    return _evaluate_conditions(
        _sweep_conditions(range_size, n_conditions, len(label_names)),
        lambda cond: labels, report)


def uniformity_ablation(gen_with: Generator, gen_without: Generator,
                        labeler: Callable[[np.ndarray], np.ndarray],
                        label_names: Sequence[str], range_sizes: Sequence[float],
                        n_conditions: int, n_samples: int,
                        seed: int) -> dict[float, dict]:
    """Paired entropy sweeps for generators trained with and without the
    uniformity term; the same sweep noise is replayed for both."""
    out: dict[float, dict] = {}
    for r in range_sizes:
        with_report = condition_sweep(
            gen_with, labeler, label_names, r, n_conditions, n_samples,
            np.random.default_rng([seed, int(round(r * 1000))]), "with_uniformity")
        without_report = condition_sweep(
            gen_without, labeler, label_names, r, n_conditions, n_samples,
            np.random.default_rng([seed, int(round(r * 1000))]), "without_uniformity")
        ew, ewo = with_report.mean_entropy(), without_report.mean_entropy()
        out[float(r)] = {
            "with": with_report,
            "without": without_report,
            "entropy_gap": ew - ewo,
            "entropy_ratio": ew / ewo if ewo > 0 else float("inf"),
        }
    return out


def write_sweep_csv(path: str | Path, reports: Sequence[SweepReport],
                    meta: dict | None = None) -> None:
    """Write one or more sweep reports (same label set) into a single CSV.

    Leading '#'-prefixed lines carry run metadata; the header matches the
    report fields.
    """
    reports = list(reports)
    if not reports:
        raise UsageError("need at least one report to write")
    header = reports[0].header()
    for rep in reports[1:]:
        if rep.header() != header:
            raise UsageError("cannot mix reports with different label sets")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for key in sorted((meta or {})):
            fh.write(f"# {key} = {(meta or {})[key]}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rep in reports:
            writer.writerows(rep.csv_rows())


def read_sweep_csv(path: str | Path) -> tuple[dict, list[dict]]:
    """Load a sweep CSV back into (meta, row dicts); inverse of write_sweep_csv."""
    meta: dict[str, str] = {}
    rows: list[dict] = []
    with Path(path).open("r", newline="", encoding="utf-8") as fh:
        header: list[str] | None = None
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = value.strip()
                continue
            cells = line.split(",")
            if header is None:
                header = cells
                continue
            if len(cells) != len(header):
                raise DatasetParseError(
                    f"row {lineno}: expected {len(header)} columns, got {len(cells)}")
            row: dict = {}
            for name, cell in zip(header, cells):
                if name == "labeler":
                    row[name] = cell
                elif name in ("n_samples", "n_satisfying"):
                    row[name] = int(cell)
                else:
                    row[name] = float(cell)
            rows.append(row)
    if header is None:
        raise DatasetParseError(f"{path}: no header row found")
    return meta, rows


def label_histogram(values: np.ndarray, bins: int = 10,
                    lo: float = 0.0, hi: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """(edges, counts) of a fixed-range histogram; values outside are dropped."""
    v = np.asarray(values, dtype=float).ravel()
    v = v[(v >= lo) & (v <= hi)]
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    return edges, counts


def bin_ratio(counts: np.ndarray) -> float:
    """Max/min bin-count ratio with empty bins floored at one."""
    counts = np.asarray(counts, dtype=float)
    return float(counts.max() / max(counts.min(), 1.0))


def write_histogram_csv(path: str | Path, names: Sequence[str],
                        histograms: Sequence[tuple[np.ndarray, np.ndarray]],
                        meta: dict | None = None) -> None:
    """Per-label bin edges, counts, and densities as delimited text."""
    if len(names) != len(histograms):
        raise UsageError("one histogram per label name required")
    edges = histograms[0][0]
    for e, _ in histograms[1:]:
        if not np.array_equal(e, edges):
            raise UsageError("histograms must share bin edges")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    widths = np.diff(edges)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for key in sorted((meta or {})):
            fh.write(f"# {key} = {(meta or {})[key]}\n")
        writer = csv.writer(fh, lineterminator="\n")
        header = ["bin_lo", "bin_hi"]
        for name in names:
            header += [f"count_{name}", f"density_{name}"]
        writer.writerow(header)
        for b in range(len(widths)):
            row = [repr(float(edges[b])), repr(float(edges[b + 1]))]
            for _, counts in histograms:
                total = counts.sum()
                density = counts[b] / (total * widths[b]) if total else 0.0
                row += [str(int(counts[b])), repr(float(density))]
            writer.writerow(row)
