"""Command-line front end.

Subcommands wire the package into reproducible runs: gen-data, train,
augment, evaluate, generate, render. Exit codes: 0 success, 2 usage error,
3 configuration error, 4 I/O or file-format error, 5 numerical fault.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from rangegen import domain, metrics, trainer
from rangegen.errors import (
    ConfigurationError,
    DatasetParseError,
    TrainingFault,
    UsageError,
)
from rangegen.losses import RangeCondition
from rangegen.sampling import MIN_CONDITION_WIDTH

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_NUMERIC = 5

# Sweep sub-streams for CLI-driven evaluations (kept clear of trainer's tags).
_STREAM_CLI_SWEEP = 41
_STREAM_CLI_GENERATE = 42

_LABEL_SETS = {"aspect": ("aspect",), "area": ("area",),
               "both": ("aspect", "area")}


def _cmd_gen_data(args: argparse.Namespace) -> int:
    ds = domain.generate_dataset(args.n, args.seed)
    domain.save_dataset(ds, args.out)
    summary = trainer.dataset_bin_summary(ds)
    print(f"wrote {ds.n_rows} rows to {args.out} (seed {args.seed}, "
          f"trimmed from {args.n})")
    for name, info in summary.items():
        print(f"  {name}: bins {info['counts']} (max/min ratio {info['ratio']:.1f})")
    if args.hist_out:
        norm = ds.labels_normalized()
        hists = [metrics.label_histogram(norm[:, j])
                 for j in range(len(domain.LABEL_NAMES))]
        metrics.write_histogram_csv(args.hist_out, domain.LABEL_NAMES, hists,
                                    meta={"seed": args.seed, "n_rows": ds.n_rows})
        print(f"wrote label histogram to {args.hist_out}")
    return EXIT_OK


def _resolve_config(args: argparse.Namespace,
                    base: trainer.TrainConfig | None = None) -> trainer.TrainConfig:
    cfg = base or trainer.TrainConfig()
    if getattr(args, "config", None):
        cfg = trainer.load_config(args.config, base=cfg)
    overrides = {}
    if getattr(args, "labels", None):
        overrides["labels"] = _LABEL_SETS[args.labels]
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _write_estimator_sweeps(bundle: trainer.TrainedBundle, out_dir: Path,
                            cfg: trainer.TrainConfig) -> None:
    labeler = metrics.estimator_labeler(bundle.estimator)
    reports = []
    for r in (0.1, 0.2):
        rng = np.random.default_rng([cfg.seed, _STREAM_CLI_SWEEP, int(r * 100)])
        rep = metrics.condition_sweep(
            bundle.generator, labeler, cfg.labels, r, cfg.sweep_conditions,
            cfg.sweep_samples, rng, "estimator")
        reports.append(rep)
        print(f"  sweep range_size={r}: mean predicted satisfaction "
              f"{rep.mean_satisfaction():.4f}")
    metrics.write_sweep_csv(out_dir / "sweep_estimator.csv", reports,
                            meta={"seed": cfg.seed,
                                  "n_conditions": cfg.sweep_conditions,
                                  "n_samples": cfg.sweep_samples})


def _cmd_train(args: argparse.Namespace) -> int:
    ds = domain.load_dataset(args.data)
    cfg = _resolve_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.txt").write_text(trainer.config_to_text(cfg),
                                        encoding="utf-8")
    print(f"training labels={cfg.labels} seed={cfg.seed} on {ds.n_rows} rows")
    bundle, log_rows = trainer.run_training(ds, cfg)
    for name, mae in bundle.estimator_report["holdout_mae"].items():
        print(f"  estimator holdout MAE [{name}]: {mae:.4f}")
    trainer.save_bundle(bundle, out_dir / "checkpoint.json")
    trainer.write_training_log(out_dir / "training_log.csv", log_rows,
                               meta={"seed": cfg.seed})
    _write_estimator_sweeps(bundle, out_dir, cfg)
    print(f"wrote checkpoint, log, and sweep summary to {out_dir}")
    return EXIT_OK


def _check_bundle_matches_dataset(bundle: trainer.TrainedBundle,
                                  ds: domain.Dataset) -> None:
    if (bundle.normalizer.raw_min != ds.normalizer.raw_min
            or bundle.normalizer.raw_max != ds.normalizer.raw_max):
        raise ConfigurationError(
            "checkpoint normalization bounds do not match the dataset; "
            "the model was trained against a different dataset")
    if bundle.generator.output_dim != domain.DESIGN_DIM:
        raise ConfigurationError(
            f"checkpoint generator emits {bundle.generator.output_dim}-d designs, "
            f"dataset uses {domain.DESIGN_DIM}-d")


def _cmd_augment(args: argparse.Namespace) -> int:
    ds = domain.load_dataset(args.data)
    bundle = trainer.load_bundle(args.gan)
    _check_bundle_matches_dataset(bundle, ds)
    cfg = _resolve_config(args, base=bundle.config)
    if args.pool is not None:
        cfg = replace(cfg, n_pool=args.pool)
        cfg.validate()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    print(f"augmenting with pool={cfg.n_pool} labels={cfg.labels} seed={cfg.seed}")
    outcome = trainer.augmentation_round(ds, bundle.generator, cfg)

    domain.save_dataset(outcome.dataset, out_dir / "augmented_dataset.csv")
    new_bundle = trainer.TrainedBundle(
        cfg, ds.normalizer, outcome.estimator, outcome.generator,
        outcome.discriminator, outcome.estimator_report, ds.seed,
        outcome.dataset.n_rows)
    trainer.save_bundle(new_bundle, out_dir / "checkpoint.json")
    trainer.write_training_log(out_dir / "training_log.csv", outcome.log_rows,
                               meta={"seed": cfg.seed})

    outcome.before.labeler = "exact[before]"
    outcome.after.labeler = "exact[after]"
    metrics.write_sweep_csv(out_dir / "before_after.csv",
                            [outcome.before, outcome.after],
                            meta={"seed": cfg.seed, "pool": cfg.n_pool})
    _write_bin_table(out_dir / "augment_bins.csv", cfg, outcome.augment_stats)

    print(f"  added {outcome.augment_stats['added']} rows "
          f"(pool kept {outcome.augment_stats['pool_size']})")
    for j, name in enumerate(cfg.labels):
        li = cfg.label_indices[j]
        print(f"  {name}: bin ratio {outcome.ratio_before(li):.1f} -> "
              f"{outcome.ratio_after(li):.1f}")
    print(f"  exact satisfaction (range 0.1): "
          f"before {outcome.before.mean_satisfaction():.4f} -> "
          f"after {outcome.after.mean_satisfaction():.4f}")
    print(f"wrote augmented dataset and retrained checkpoint to {out_dir}")
    return EXIT_OK


def _write_bin_table(path: Path, cfg: trainer.TrainConfig, stats: dict) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label", "bin", "count_before", "count_after"])
        for j, name in enumerate(cfg.labels):
            li = cfg.label_indices[j]
            before = stats["bin_counts_before"][li]
            after = stats["bin_counts_after"][li]
            for b, (cb, ca) in enumerate(zip(before, after)):
                writer.writerow([name, str(b), str(cb), str(ca)])


def _cmd_evaluate(args: argparse.Namespace) -> int:
    if not 0.0 < args.range_size <= 1.0:
        raise UsageError(f"range size must be in (0, 1], got {args.range_size}")
    bundle = trainer.load_bundle(args.gan)
    cfg = bundle.config
    if args.labeler == "estimator":
        labeler = metrics.estimator_labeler(bundle.estimator)
    else:
        labeler = metrics.exact_labeler(bundle.normalizer, cfg.label_indices)
    rng = np.random.default_rng([args.seed, _STREAM_CLI_SWEEP])
    report = metrics.condition_sweep(
        bundle.generator, labeler, cfg.labels, args.range_size,
        args.n_conditions, args.n_samples, rng, args.labeler)
    reports = [report]
    if args.data:
        ds = domain.load_dataset(args.data)
        _check_bundle_matches_dataset(bundle, ds)
        reports.append(metrics.data_baseline(
            ds, cfg.label_indices, cfg.labels, args.range_size, args.n_conditions))
    metrics.write_sweep_csv(args.out, reports,
                            meta={"seed": args.seed,
                                  "range_size": args.range_size,
                                  "labeler": args.labeler,
                                  "n_conditions": args.n_conditions,
                                  "n_samples": args.n_samples})
    print(f"mean satisfaction ({args.labeler}): {report.mean_satisfaction():.4f}")
    print(f"mean quadratic entropy of satisfying samples: "
          f"{report.mean_entropy():.6f}")
    if args.data:
        print(f"data baseline mean satisfaction: "
              f"{reports[1].mean_satisfaction():.4f}")
    print(f"wrote sweep report to {args.out}")
    return EXIT_OK


def _parse_bounds(text: str, n_labels: int, what: str) -> tuple[float, ...]:
    try:
        values = tuple(float(s) for s in text.split(","))
    except ValueError as exc:
        raise UsageError(f"cannot parse {what} {text!r}: {exc}") from exc
    if len(values) != n_labels:
        raise UsageError(
            f"{what} needs {n_labels} comma-separated values, got {len(values)}")
    return values


def _cmd_generate(args: argparse.Namespace) -> int:
    bundle = trainer.load_bundle(args.gan)
    cfg = bundle.config
    lbs = _parse_bounds(args.lb, cfg.n_labels, "--lb")
    ubs = _parse_bounds(args.ub, cfg.n_labels, "--ub")
    if args.raw:
        lo = np.asarray(bundle.normalizer.raw_min)[list(cfg.label_indices)]
        hi = np.asarray(bundle.normalizer.raw_max)[list(cfg.label_indices)]
        lbs = tuple((np.asarray(lbs) - lo) / (hi - lo))
        ubs = tuple((np.asarray(ubs) - lo) / (hi - lo))
    cond = RangeCondition(lbs, ubs)
    cond.validate()
    for lo_v, hi_v in zip(cond.lb, cond.ub):
        if hi_v - lo_v < MIN_CONDITION_WIDTH:
            raise UsageError(
                f"range [{lo_v}, {hi_v}] narrower than the minimum width "
                f"{MIN_CONDITION_WIDTH}")
    if args.n <= 0:
        raise UsageError("--n must be positive")

    rng = np.random.default_rng([args.seed, _STREAM_CLI_GENERATE])
    z = rng.standard_normal((args.n, bundle.generator.noise_dim))
    designs = bundle.generator.forward(z, cond, train=False)
    labels_raw = domain.exact_evaluate(designs)
    labels_norm = bundle.normalizer.normalize(labels_raw)[:, list(cfg.label_indices)]
    satisfied = cond.satisfied(labels_norm)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# seed = {args.seed}\n")
        fh.write(f"# lb = {','.join(repr(v) for v in cond.lb)}\n")
        fh.write(f"# ub = {','.join(repr(v) for v in cond.ub)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        header = [f"d{i}" for i in range(domain.DESIGN_DIM)]
        for name in cfg.labels:
            header += [f"{name}_raw", f"{name}_norm"]
        header.append("satisfied")
        writer.writerow(header)
        for i in range(args.n):
            row = [repr(float(v)) for v in designs[i]]
            for j, li in enumerate(cfg.label_indices):
                row += [repr(float(labels_raw[i, li])),
                        repr(float(labels_norm[i, j]))]
            row.append(str(int(satisfied[i])))
            writer.writerow(row)
    frac = float(satisfied.mean())
    print(f"wrote {args.n} designs to {args.out}; "
          f"exact-label satisfied fraction {frac:.4f}")
    return EXIT_OK


def _read_designs_csv(path: str | Path) -> np.ndarray:
    """Designs (d0..d5 columns) from any CSV this package emits."""
    designs = []
    with Path(path).open("r", newline="", encoding="utf-8") as fh:
        header: list[str] | None = None
        cols: list[int] = []
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            if header is None:
                header = cells
                try:
                    cols = [header.index(f"d{i}")
                            for i in range(domain.DESIGN_DIM)]
                except ValueError:
                    raise DatasetParseError(
                        f"{path}: header lacks d0..d{domain.DESIGN_DIM - 1} columns")
                continue
            try:
                designs.append([float(cells[c]) for c in cols])
            except (ValueError, IndexError) as exc:
                raise DatasetParseError(f"row {lineno}: {exc}") from exc
    if header is None or not designs:
        raise DatasetParseError(f"{path}: no design rows found")
    return np.asarray(designs, dtype=float)


def _cmd_render(args: argparse.Namespace) -> int:
    designs = _read_designs_csv(args.designs)
    if args.limit > 0:
        designs = designs[:args.limit]
    domain.write_design_sheet(designs, args.out, columns=args.columns)
    print(f"rendered {designs.shape[0]} silhouettes to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rangegen",
        description="Range-constrained generative design synthesis.",
        epilog="Exit codes: 0 ok, 2 usage, 3 configuration, 4 I/O, 5 numerical.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the biased silhouette dataset")
    p.add_argument("--n", type=int, default=4000, help="rows before trimming")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset CSV path")
    p.add_argument("--hist-out", default=None, help="optional label histogram CSV")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="pretrain the estimator, then train the GAN")
    p.add_argument("--data", required=True, help="dataset CSV path")
    p.add_argument("--labels", choices=sorted(_LABEL_SETS), default="aspect")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("augment", help="self-augment the dataset and retrain")
    p.add_argument("--gan", required=True, help="trained checkpoint.json")
    p.add_argument("--data", required=True, help="dataset CSV path")
    p.add_argument("--pool", type=int, default=None, help="override pool size")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("evaluate", help="condition sweep over a trained model")
    p.add_argument("--gan", required=True, help="trained checkpoint.json")
    p.add_argument("--labeler", choices=("estimator", "exact"), default="estimator")
    p.add_argument("--range-size", type=float, default=0.1)
    p.add_argument("--n-conditions", type=int, default=50)
    p.add_argument("--n-samples", type=int, default=500)
    p.add_argument("--data", default=None,
                   help="dataset CSV for baseline overlay rows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="sweep report CSV path")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("generate", help="sample designs for one range condition")
    p.add_argument("--gan", required=True, help="trained checkpoint.json")
    p.add_argument("--lb", required=True, help="lower bound(s), comma-separated")
    p.add_argument("--ub", required=True, help="upper bound(s), comma-separated")
    p.add_argument("--raw", action="store_true",
                   help="bounds given in raw label units")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("render", help="render designs to an SVG sheet")
    p.add_argument("--designs", required=True, help="CSV with d0..d5 columns")
    p.add_argument("--columns", type=int, default=5)
    p.add_argument("--limit", type=int, default=0, help="0 renders all rows")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetParseError, OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TrainingFault as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
