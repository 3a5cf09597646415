"""Training orchestration: estimator pretraining, adversarial training with
range/uniformity penalties, and the label-aware self-augmentation round."""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from rangegen.domain import DESIGN_DIM, Dataset, exact_evaluate
from rangegen.errors import ConfigurationError, TrainingFault, UsageError
from rangegen.losses import (
    LossWeights,
    RangeCondition,
    discriminator_loss_grads,
    draw_slice_points,
    generator_adversarial_grad,
    generator_total_loss,
    multi_range_loss_with_grad,
    multi_uniformity_loss_with_grad,
)
from rangegen.metrics import (
    SweepReport,
    bin_ratio,
    condition_sweep,
    exact_labeler,
    label_histogram,
    satisfaction,
)
from rangegen.models import (
    Discriminator,
    Estimator,
    Generator,
    network_from_doc,
    param_hash,
)
from rangegen.netcore.adam import Adam
from rangegen.netcore.checkpoint import load_document, save_document
from rangegen.sampling import (
    LabelNormalizer,
    NearestLabelIndex,
    sample_condition,
    uniform_label_batch,
)

LABEL_INDEX = {"aspect": 0, "area": 1}

# Sub-stream tags so every consumer of the run seed gets an independent,
# reproducible generator.
_STREAM_SPLIT = 11
_STREAM_EST_INIT = 12
_STREAM_EST_BATCH = 13
_STREAM_GEN_INIT = 21
_STREAM_DISC_INIT = 22
_STREAM_GAN_LOOP = 23
_STREAM_SWEEP = 31
_STREAM_AUGMENT = 32


@dataclass(frozen=True)
class TrainConfig:
    """Every knob of a run; desk defaults finish well inside ten CPU-minutes."""

    labels: tuple[str, ...] = ("aspect",)
    seed: int = 0
    gan_steps: int = 10000
    batch_size: int = 32
    gan_lr: float = 1e-4
    gan_lr_decay: float = 0.8
    gan_lr_decay_interval: int = 5000
    estimator_steps: int = 5000
    estimator_batch: int = 256
    estimator_lr: float = 1e-4
    estimator_lr_decay: float = 0.6
    estimator_lr_decay_interval: int = 2500
    phi: float = 20.0
    lambda_range: float = 2.0
    lambda_unif: float = 1.0
    slice_count: int = 5
    noise_dim: int = 16
    gen_hidden: tuple[int, ...] = (64, 64, 64)
    disc_hidden: tuple[int, ...] = (64, 64, 64)
    est_hidden: tuple[int, ...] = (64, 64, 64, 64)
    est_residual: bool = True
    holdout_frac: float = 0.1
    log_every: int = 100
    sat_check_every: int = 1000
    sat_check_samples: int = 256
    n_pool: int = 2000
    augment_bins: int = 10
    sweep_conditions: int = 50
    sweep_samples: int = 500

    @property
    def label_indices(self) -> tuple[int, ...]:
        return tuple(LABEL_INDEX[name] for name in self.labels)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(self.phi, self.lambda_range, self.lambda_unif,
                           self.slice_count)

    def validate(self) -> None:
        if not self.labels or len(set(self.labels)) != len(self.labels):
            raise ConfigurationError(f"labels must be unique and non-empty: {self.labels}")
        for name in self.labels:
            if name not in LABEL_INDEX:
                raise ConfigurationError(
                    f"unknown label {name!r}; choose from {sorted(LABEL_INDEX)}")
        positive = ("gan_steps", "batch_size", "estimator_steps", "estimator_batch",
                    "gan_lr_decay_interval", "estimator_lr_decay_interval",
                    "slice_count", "noise_dim", "log_every", "sat_check_every",
                    "sat_check_samples", "augment_bins", "sweep_conditions",
                    "sweep_samples")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.batch_size < 2 or self.estimator_batch < 2:
            raise ConfigurationError("batch sizes must be at least 2 for batch norm")
        if not 0.0 < self.holdout_frac < 1.0:
            raise ConfigurationError("holdout_frac must be in (0, 1)")
        if self.lambda_range < 0 or self.lambda_unif < 0:
            raise ConfigurationError("loss weights must be non-negative")
        if self.n_pool < 0:
            raise ConfigurationError("n_pool must be non-negative")


_TUPLE_STR_FIELDS = {"labels"}
_TUPLE_INT_FIELDS = {"gen_hidden", "disc_hidden", "est_hidden"}


def config_to_text(cfg: TrainConfig) -> str:
    """Flat key = value rendering covering every config field."""
    lines = []
    for f in fields(TrainConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            text = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            text = "true" if v else "false"
        elif isinstance(v, float):
            text = repr(v)
        else:
            text = str(v)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str, base: TrainConfig | None = None) -> TrainConfig:
    """Parse a flat key = value document; unknown keys are rejected by name."""
    cfg = base or TrainConfig()
    defaults = {f.name: getattr(TrainConfig(), f.name) for f in fields(TrainConfig)}
    updates: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigurationError(f"config line {lineno}: expected 'key = value'")
        if key not in defaults:
            raise ConfigurationError(f"config line {lineno}: unknown key {key!r}")
        try:
            updates[key] = _parse_config_value(key, value, defaults[key])
        except ValueError as exc:
            raise ConfigurationError(f"config line {lineno}: {exc}") from exc
    out = replace(cfg, **updates)
    out.validate()
    return out


def _parse_config_value(key: str, value: str, default):
    if key in _TUPLE_STR_FIELDS:
        return tuple(s.strip() for s in value.split(",") if s.strip())
    if key in _TUPLE_INT_FIELDS:
        return tuple(int(s) for s in value.split(",") if s.strip())
    if isinstance(default, bool):
        if value.lower() not in ("true", "false"):
            raise ValueError(f"expected true/false, got {value!r}")
        return value.lower() == "true"
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def load_config(path: str | Path, base: TrainConfig | None = None) -> TrainConfig:
    return config_from_text(Path(path).read_text(encoding="utf-8"), base)


def train_estimator(ds: Dataset, cfg: TrainConfig) -> tuple[Estimator, dict]:
    """Pretrain the label estimator with mean-squared loss on normalized labels.

    Batches are drawn with the uniform-label sampler (round-robin over the
    configured labels) so sparse label regions still get gradient signal.
    Returns the trained network plus a held-out MAE report.
    """
    cfg.validate()
    idx = list(cfg.label_indices)
    y_all = ds.labels_normalized()[:, idx]
    perm = np.random.default_rng([cfg.seed, _STREAM_SPLIT]).permutation(ds.n_rows)
    n_hold = max(1, int(round(cfg.holdout_frac * ds.n_rows)))
    hold_rows, train_rows = perm[:n_hold], perm[n_hold:]
    if train_rows.size < cfg.estimator_batch:
        raise UsageError("dataset too small for the configured estimator batch")
    x_tr, y_tr = ds.designs[train_rows], y_all[train_rows]
    label_index = [NearestLabelIndex(y_tr[:, j]) for j in range(len(idx))]

    est = Estimator(DESIGN_DIM, len(idx), cfg.est_hidden,
                    np.random.default_rng([cfg.seed, _STREAM_EST_INIT]),
                    residual=cfg.est_residual)
    adam = Adam(est.trainable_arrays(), cfg.estimator_lr,
                cfg.estimator_lr_decay, cfg.estimator_lr_decay_interval)
    rng = np.random.default_rng([cfg.seed, _STREAM_EST_BATCH])
    for step in range(1, cfg.estimator_steps + 1):
        j = (step - 1) % len(idx)
        rows = uniform_label_batch(y_tr[:, j], cfg.estimator_batch, rng,
                                   index=label_index[j])
        pred = est.forward(x_tr[rows], train=True)
        diff = pred - y_tr[rows]
        loss = float((diff * diff).mean())
        if not np.isfinite(loss):
            raise TrainingFault(f"estimator loss non-finite at step {step}")
        est.zero_grads()
        est.backward(2.0 * diff / diff.size)
        adam.step(est.grad_arrays())

    pred_hold = est.forward(ds.designs[hold_rows], train=False)
    mae = np.abs(pred_hold - y_all[hold_rows]).mean(axis=0)
    report = {
        "holdout_mae": {name: float(mae[j]) for j, name in enumerate(cfg.labels)},
        "holdout_rows": int(n_hold),
        "steps": cfg.estimator_steps,
    }
    return est, report


def train_rangegan(ds: Dataset, est: Estimator,
                   cfg: TrainConfig) -> tuple[Generator, Discriminator, list[dict]]:
    """Adversarial training with the combined objective.

    Every step samples one condition for the whole batch, draws a
    label-uniform real batch, updates the discriminator on real vs generated,
    then updates the generator on adversarial + range + uniformity terms
    with gradients flowing through the refreshed discriminator and the
    frozen estimator.
    """
    cfg.validate()
    idx = list(cfg.label_indices)
    n_labels = len(idx)
    if est.output_dim != n_labels:
        raise ConfigurationError(
            f"estimator predicts {est.output_dim} labels, config trains {n_labels}")
    y_norm = ds.labels_normalized()[:, idx]
    label_index = [NearestLabelIndex(y_norm[:, j]) for j in range(n_labels)]
    weights = cfg.loss_weights

    gen = Generator(cfg.noise_dim, 2 * n_labels, DESIGN_DIM, cfg.gen_hidden,
                    np.random.default_rng([cfg.seed, _STREAM_GEN_INIT]))
    disc = Discriminator(DESIGN_DIM, cfg.disc_hidden,
                         np.random.default_rng([cfg.seed, _STREAM_DISC_INIT]))
    adam_g = Adam(gen.trainable_arrays(), cfg.gan_lr, cfg.gan_lr_decay,
                  cfg.gan_lr_decay_interval)
    adam_d = Adam(disc.trainable_arrays(), cfg.gan_lr, cfg.gan_lr_decay,
                  cfg.gan_lr_decay_interval)
    rng = np.random.default_rng([cfg.seed, _STREAM_GAN_LOOP])
    est_hash = param_hash(est)
    batch = cfg.batch_size
    log_rows: list[dict] = []

    for step in range(1, cfg.gan_steps + 1):
        cond = sample_condition(rng, n_labels)
        j = (step - 1) % n_labels
        rows = uniform_label_batch(y_norm[:, j], batch, rng, index=label_index[j])
        x_real = ds.designs[rows]
        z = rng.standard_normal((batch, cfg.noise_dim))
        x_fake = gen.forward(z, cond, train=True)

        # Discriminator update; one concatenated pass keeps a single cache.
        disc.zero_grads()
        p_all = disc.forward(np.vstack([x_real, x_fake]), train=True)
        d_loss, d_dreal, d_dfake = discriminator_loss_grads(p_all[:batch], p_all[batch:])
        disc.backward(np.concatenate([d_dreal, d_dfake]))
        adam_d.step(disc.grad_arrays())

        # Generator update through the refreshed discriminator.
        p_fake = disc.forward(x_fake, train=True)
        g_adv, dp_fake = generator_adversarial_grad(p_fake)
        dx_adv = disc.backward(dp_fake)

        y_pred = est.forward(x_fake, train=False)
        range_l, dy_range = multi_range_loss_with_grad(y_pred, cond, weights.phi)
        slices = np.vstack([draw_slice_points(rng, cond.lb[l], cond.ub[l],
                                              weights.slice_count)
                            for l in range(n_labels)])
        unif_l, dy_unif = multi_uniformity_loss_with_grad(y_pred, cond, slices)
        g_total = generator_total_loss(g_adv, range_l, unif_l, weights)
        if not (np.isfinite(d_loss) and np.isfinite(g_total)):
            raise TrainingFault(
                f"non-finite loss at step {step}: d={d_loss} adv={g_adv} "
                f"range={range_l} unif={unif_l}")

        est.zero_grads()
        dx_est = est.backward(weights.lambda_range * dy_range
                              + weights.lambda_unif * dy_unif)
        gen.zero_grads()
        gen.backward(dx_adv + dx_est)
        adam_g.step(gen.grad_arrays())

        sat_due = step % cfg.sat_check_every == 0
        sat_text = ""
        if sat_due:
            z_eval = rng.standard_normal((cfg.sat_check_samples, cfg.noise_dim))
            x_eval = gen.forward(z_eval, cond, train=False)
            sat_text = repr(satisfaction(est.forward(x_eval, train=False), cond))
        if step == 1 or step == cfg.gan_steps or step % cfg.log_every == 0 or sat_due:
            log_rows.append({
                "step": step,
                "d_loss": d_loss,
                "g_adv": g_adv,
                "range_loss": range_l,
                "unif_loss": unif_l,
                "g_total": g_total,
                "lr_gen": adam_g.effective_lr,
                "lr_disc": adam_d.effective_lr,
                "sat_pred": sat_text,
            })

    if param_hash(est) != est_hash:
        raise TrainingFault("estimator parameters changed during adversarial training")
    return gen, disc, log_rows


_LOG_COLUMNS = ("step", "d_loss", "g_adv", "range_loss", "unif_loss",
                "g_total", "lr_gen", "lr_disc", "sat_pred")


def write_training_log(path: str | Path, rows: list[dict],
                       meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for key in sorted(meta or {}):
            fh.write(f"# {key} = {meta[key]}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_LOG_COLUMNS)
        for row in rows:
            out = []
            for col in _LOG_COLUMNS:
                v = row[col]
                out.append(repr(v) if isinstance(v, float) else str(v))
            writer.writerow(out)


def _bin_ids(values: np.ndarray, bins: int) -> np.ndarray:
    """Bin index per value over [0, 1]; -1 marks out-of-range values."""
    v = np.asarray(values, dtype=float)
    ids = np.floor(v * bins).astype(int)
    ids[v == 1.0] = bins - 1
    ids[(v < 0.0) | (v > 1.0)] = -1
    return ids


def fill_bins(existing_bin_ids: np.ndarray, pool_bin_ids: np.ndarray,
              bins: int, usable: np.ndarray | None = None) -> list[int]:
    """Pool positions that raise every deficient bin toward the fullest one.

    Walks bins in order and takes pool rows (in pool order) until each bin
    matches the maximum existing count or the pool runs dry for that bin.
    """
    existing = existing_bin_ids[existing_bin_ids >= 0]
    counts = np.bincount(existing, minlength=bins)
    target = int(counts.max()) if counts.size else 0
    if usable is None:
        usable = np.ones(pool_bin_ids.shape[0], dtype=bool)
    selected: list[int] = []
    for b in range(bins):
        deficit = target - int(counts[b])
        if deficit <= 0:
            continue
        candidates = np.flatnonzero((pool_bin_ids == b) & usable)[:deficit]
        selected.extend(int(c) for c in candidates)
        usable[candidates] = False
    return selected


def _pool_conditions(n_labels: int, windows: int = 20,
                     width: float = 0.1) -> list[RangeCondition]:
    """Narrow windows swept across each label to diversify pool labels."""
    centers = np.linspace(width / 2.0, 1.0 - width / 2.0, windows)
    conditions = []
    for target in range(n_labels):
        for c in centers:
            lbs = [0.0] * n_labels
            ubs = [1.0] * n_labels
            lbs[target] = float(c - width / 2.0)
            ubs[target] = float(c + width / 2.0)
            conditions.append(RangeCondition(tuple(lbs), tuple(ubs)))
    return conditions


def self_augment(gen: Generator, ds: Dataset, label_indices: tuple[int, ...],
                 n_pool: int, rng: np.random.Generator,
                 bins: int = 10) -> tuple[Dataset, dict]:
    """Generate, exactly evaluate, and add designs to under-populated label bins.

    Pool designs come from narrow conditions swept across the label space;
    each one is labelled by the exact evaluator. Rows whose labels would
    breach the dataset's stored percentile cuts are discarded, then each
    configured label's 10-bin histogram is topped up toward its fullest bin,
    label by label, without reusing pool rows.
    """
    idx = list(label_indices)
    stats: dict = {"pool_size": 0, "added": 0,
                   "bin_counts_before": {}, "bin_counts_after": {}}
    all_norm = ds.labels_normalized()[:, idx]
    for j, li in enumerate(idx):
        ids = _bin_ids(all_norm[:, j], bins)
        stats["bin_counts_before"][li] = np.bincount(
            ids[ids >= 0], minlength=bins).tolist()
    if n_pool <= 0:
        stats["bin_counts_after"] = dict(stats["bin_counts_before"])
        return ds, stats

    conditions = _pool_conditions(len(idx))
    per_cond = [n_pool // len(conditions)] * len(conditions)
    for k in range(n_pool % len(conditions)):
        per_cond[k] += 1
    pool_designs = []
    for cond, count in zip(conditions, per_cond):
        if count == 0:
            continue
        z = rng.standard_normal((count, gen.noise_dim))
        pool_designs.append(gen.forward(z, cond, train=False))
    pool_designs = np.vstack(pool_designs)
    pool_raw = exact_evaluate(pool_designs)
    within_cuts = np.all(pool_raw <= np.asarray(ds.percentile_cuts), axis=1)
    pool_designs, pool_raw = pool_designs[within_cuts], pool_raw[within_cuts]
    pool_norm = ds.normalizer.normalize(pool_raw)[:, idx]
    stats["pool_size"] = int(pool_designs.shape[0])

    usable = np.ones(pool_designs.shape[0], dtype=bool)
    added_rows: list[int] = []
    for j, li in enumerate(idx):
        existing = np.concatenate([all_norm[:, j], pool_norm[added_rows, j]])
        picked = fill_bins(_bin_ids(existing, bins),
                           _bin_ids(pool_norm[:, j], bins), bins, usable)
        added_rows.extend(picked)

    out = ds
    if added_rows:
        order = sorted(added_rows)
        out = ds.add_rows(pool_designs[order], pool_raw[order])
    stats["added"] = len(added_rows)
    out_norm = out.labels_normalized()[:, idx]
    for j, li in enumerate(idx):
        ids = _bin_ids(out_norm[:, j], bins)
        stats["bin_counts_after"][li] = np.bincount(
            ids[ids >= 0], minlength=bins).tolist()
    return out, stats


@dataclass
class AugmentationRound:
    """Everything produced by one augment-retrain cycle."""

    dataset: Dataset
    estimator: Estimator
    generator: Generator
    discriminator: Discriminator
    estimator_report: dict
    log_rows: list[dict]
    before: SweepReport
    after: SweepReport
    augment_stats: dict

    def ratio_before(self, label_idx: int) -> float:
        return bin_ratio(np.asarray(self.augment_stats["bin_counts_before"][label_idx]))

    def ratio_after(self, label_idx: int) -> float:
        return bin_ratio(np.asarray(self.augment_stats["bin_counts_after"][label_idx]))


def augmentation_round(ds: Dataset, base_gen: Generator, cfg: TrainConfig,
                       range_size: float = 0.1) -> AugmentationRound:
    """Self-augment with the trained generator, then retrain from scratch.

    Emits paired exact-labeler sweeps (same sweep noise before and after) so
    the satisfaction comparison isolates the effect of augmentation.
    """
    cfg.validate()
    labeler = exact_labeler(ds.normalizer, cfg.label_indices)
    before = condition_sweep(
        base_gen, labeler, cfg.labels, range_size, cfg.sweep_conditions,
        cfg.sweep_samples, np.random.default_rng([cfg.seed, _STREAM_SWEEP]), "exact")
    aug_ds, stats = self_augment(
        base_gen, ds, cfg.label_indices, cfg.n_pool,
        np.random.default_rng([cfg.seed, _STREAM_AUGMENT]), cfg.augment_bins)
    est, est_report = train_estimator(aug_ds, cfg)
    gen, disc, log_rows = train_rangegan(aug_ds, est, cfg)
    after = condition_sweep(
        gen, labeler, cfg.labels, range_size, cfg.sweep_conditions,
        cfg.sweep_samples, np.random.default_rng([cfg.seed, _STREAM_SWEEP]), "exact")
    return AugmentationRound(aug_ds, est, gen, disc, est_report, log_rows,
                             before, after, stats)


@dataclass
class TrainedBundle:
    """A full training artifact: config, label metadata, and the three networks."""

    config: TrainConfig
    normalizer: LabelNormalizer
    estimator: Estimator
    generator: Generator
    discriminator: Discriminator
    estimator_report: dict
    dataset_seed: int
    dataset_rows: int


def run_training(ds: Dataset, cfg: TrainConfig) -> tuple[TrainedBundle, list[dict]]:
    """Estimator pretraining followed by adversarial training."""
    est, est_report = train_estimator(ds, cfg)
    gen, disc, log_rows = train_rangegan(ds, est, cfg)
    bundle = TrainedBundle(cfg, ds.normalizer, est, gen, disc, est_report,
                           ds.seed, ds.n_rows)
    return bundle, log_rows


def save_bundle(bundle: TrainedBundle, path: str | Path) -> None:
    manifest = {
        "labels": list(bundle.config.labels),
        "label_indices": list(bundle.config.label_indices),
        "noise_dim": bundle.config.noise_dim,
        "cond_dim": bundle.generator.cond_dim,
        "n_labels": bundle.config.n_labels,
        "normalizer": {"raw_min": list(bundle.normalizer.raw_min),
                       "raw_max": list(bundle.normalizer.raw_max)},
        "dataset_seed": bundle.dataset_seed,
        "dataset_rows": bundle.dataset_rows,
        "estimator_report": bundle.estimator_report,
    }
    save_document(Path(path), {
        "manifest": manifest,
        "config": config_to_text(bundle.config),
        "networks": {
            "generator": bundle.generator.to_doc(),
            "discriminator": bundle.discriminator.to_doc(),
            "estimator": bundle.estimator.to_doc(),
        },
    })


def load_bundle(path: str | Path) -> TrainedBundle:
    doc = load_document(path)
    cfg = config_from_text(doc["config"])
    manifest = doc["manifest"]
    normalizer = LabelNormalizer(tuple(manifest["normalizer"]["raw_min"]),
                                 tuple(manifest["normalizer"]["raw_max"]))
    gen = network_from_doc(doc["networks"]["generator"])
    disc = network_from_doc(doc["networks"]["discriminator"])
    est = network_from_doc(doc["networks"]["estimator"])
    if gen.cond_dim != 2 * cfg.n_labels:
        raise ConfigurationError("checkpoint generator does not match its config")
    return TrainedBundle(cfg, normalizer, est, gen, disc,
                         manifest.get("estimator_report", {}),
                         int(manifest["dataset_seed"]),
                         int(manifest["dataset_rows"]))


def dataset_bin_summary(ds: Dataset, bins: int = 10) -> dict[str, dict]:
    """10-bin histogram and sparsity ratio per label, for reporting."""
    from rangegen.domain import LABEL_NAMES
    out = {}
    norm = ds.labels_normalized()
    for j, name in enumerate(LABEL_NAMES):
        _, counts = label_histogram(norm[:, j], bins=bins)
        out[name] = {"counts": counts.tolist(), "ratio": bin_ratio(counts)}
    return out
