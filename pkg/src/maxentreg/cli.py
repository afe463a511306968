"""Command-line experiment harness.

Subcommands: ``train``, ``curve``, ``verify-cpp``, ``compare-ls``,
``corrupt-sweep``, ``gen-data``. Reports are JSON (written to --out or
stdout); curves and per-epoch traces are CSV. Every training report
embeds a config echo sufficient to re-execute the run bit-for-bit
(see ``rerun_train_report``).

Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, replace

import numpy as np

from maxentreg import __version__
from maxentreg.classifier import TrainConfig, TrainResult, train
from maxentreg.convergence import cpp_for_lambda, curve_points, lambda_for_cpp
from maxentreg.data import (
    LabeledDataset,
    SyntheticSpec,
    corrupt_labels,
    generate_synthetic,
    load_csv,
    parse_synthetic_spec,
    save_csv,
    split,
)
from maxentreg.exceptions import NumericalError, TrainingDiverged

CURVE_HEADER = ["lambda", "cpp", "class_count"]
TRACE_HEADER = [
    "epoch",
    "lambda",
    "lr",
    "train_ce",
    "train_entropy",
    "train_loss",
    "train_accuracy",
    "eval_accuracy",
]

# well-separated spec used by verify-cpp when no dataset is given: the
# training CE must be able to approach its theoretical floor there
VERIFY_DATASET = "synthetic:classes=20,per_class=100,dim=32,spacing=6.0,noise=1.0"


def _parse_schedule(text: str) -> list[tuple[int, float]]:
    pairs = []
    for item in text.split(","):
        epoch, sep, value = item.partition(":")
        if not sep:
            raise ValueError(f"bad schedule entry {item!r}, expected EPOCH:WEIGHT")
        pairs.append((int(epoch), float(value)))
    return pairs


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def _parse_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",")]


def _write_json(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2)
    if out is None:
        print(text)
    else:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")


def _write_csv(rows: list[list], header: list[str], out: str | None) -> None:
    if out is None:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    else:
        with open(out, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)


def resolve_datasets(
    source: str,
    *,
    seed: int = 0,
    classes: int | None = None,
    label_column: int = -1,
    delimiter: str = ",",
    has_header: bool = True,
    train_fraction: float = 0.8,
    corruption_rate: float = 0.0,
) -> tuple[LabeledDataset, LabeledDataset | None, dict]:
    """Load or generate a dataset, split it, corrupt the training labels.

    Returns (train, eval_or_None, echo); the echo dict plus a TrainConfig
    reproduces the run exactly.
    """
    if source == "synthetic" or source.startswith("synthetic:"):
        spec = parse_synthetic_spec(source, default_seed=seed)
        if classes is not None and classes != spec.class_count:
            if "classes=" in source:
                raise ValueError(
                    f"--classes {classes} conflicts with the dataset spec {source!r}"
                )
            spec = replace(spec, class_count=classes)
        ds = generate_synthetic(spec)
    else:
        ds = load_csv(
            source,
            label_column=label_column,
            delimiter=delimiter,
            has_header=has_header,
            class_count=classes,
        )
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError(f"train_fraction must be in (0, 1], got {train_fraction}")
    if train_fraction < 1.0:
        parts = split(ds, train_fraction, seed=seed)
        train_ds, eval_ds, stratified = parts.train, parts.eval, parts.stratified
    else:
        train_ds, eval_ds, stratified = ds, None, None
    if corruption_rate > 0.0:
        train_ds = corrupt_labels(train_ds, corruption_rate, seed=seed)
    echo = {
        "source": ds.source,
        "provenance": ds.provenance,
        "classes": ds.class_count,
        "n_total": ds.n_samples,
        "feature_dim": ds.feature_dim,
        "train_fraction": train_fraction,
        "n_train": train_ds.n_samples,
        "n_eval": eval_ds.n_samples if eval_ds is not None else 0,
        "stratified": stratified,
        "corruption_rate": corruption_rate,
        "oracle_accuracy": ds.oracle_accuracy,
        "label_column": label_column,
        "delimiter": delimiter,
        "has_header": has_header,
        "seed": seed,
    }
    return train_ds, eval_ds, echo


def _resolve_hidden(hidden_dim: int | None, class_count: int) -> int | None:
    if hidden_dim is None:
        return 4 * class_count  # fittable default; 0 selects the linear model
    return None if hidden_dim == 0 else hidden_dim


def _config_from_args(args, class_count: int, **overrides) -> TrainConfig:
    schedule = _parse_schedule(args.lambda_schedule) if args.lambda_schedule else None
    settings = dict(
        loss_kind=args.loss,
        lam=args.lam,
        lambda_schedule=schedule,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        momentum=args.momentum,
        weight_decay=args.weight_decay,
        hidden_dim=_resolve_hidden(args.hidden_dim, class_count),
        seed=args.seed,
    )
    settings.update(overrides)
    return TrainConfig(**settings)


def _epoch_rows(result: TrainResult) -> list[dict]:
    return [asdict(m) for m in result.epoch_metrics]


def _summary(result: TrainResult, config: TrainConfig, class_count: int) -> dict:
    theoretical = None
    if config.loss_kind == "mer" and config.lambda_schedule is None and config.lam > 0:
        theoretical = cpp_for_lambda(config.lam, class_count)
    return {
        "final_train_ce": result.train_ce,
        "final_train_entropy": result.train_entropy,
        "train_accuracy": result.train_accuracy,
        "eval_accuracy": result.eval_accuracy,
        "experimental_cpp": result.experimental_cpp,
        "theoretical_cpp": theoretical,
        "ce_convention": "final-epoch train mean",
    }


def _run_report(command: str, seed: int, config: TrainConfig, data_echo: dict) -> dict:
    return {
        "command": command,
        "artifact_version": __version__,
        "seed": seed,
        "config": asdict(config),
        "dataset": data_echo,
    }


def _datasets_from_args(args, *, seed: int | None = None, train_fraction: float | None = None):
    return resolve_datasets(
        args.dataset,
        seed=args.seed if seed is None else seed,
        classes=args.classes,
        label_column=args.label_column,
        delimiter=args.delimiter,
        has_header=not args.no_header,
        train_fraction=args.train_fraction if train_fraction is None else train_fraction,
        corruption_rate=args.corruption_rate,
    )


def cmd_train(args) -> int:
    started = time.perf_counter()
    train_ds, eval_ds, echo = _datasets_from_args(args)
    config = _config_from_args(args, train_ds.class_count)
    report = _run_report("train", args.seed, config, echo)
    try:
        result = train(config, train_ds, eval_ds)
    except TrainingDiverged as err:
        report["diverged"] = str(err)
        report["epochs"] = [asdict(m) for m in err.epoch_metrics]
        report["wall_clock_seconds"] = time.perf_counter() - started
        _write_json(report, args.out)
        print(f"error: {err}", file=sys.stderr)
        return 3
    report["epochs"] = _epoch_rows(result)
    report["summary"] = _summary(result, config, train_ds.class_count)
    report["wall_clock_seconds"] = time.perf_counter() - started
    _write_json(report, args.out)
    if args.trace:
        rows = [
            [
                m.epoch,
                m.lam,
                m.learning_rate,
                repr(m.train_ce),
                repr(m.train_entropy),
                repr(m.train_loss),
                m.train_accuracy,
                "" if m.eval_accuracy is None else m.eval_accuracy,
            ]
            for m in result.epoch_metrics
        ]
        _write_csv(rows, TRACE_HEADER, args.trace)
    return 0


def rerun_train_report(report: dict) -> dict:
    """Re-execute a train report from its config echo; used to check the
    determinism contract."""
    cfg = dict(report["config"])
    if cfg.get("lambda_schedule") is not None:
        cfg["lambda_schedule"] = [(int(e), float(v)) for e, v in cfg["lambda_schedule"]]
    config = TrainConfig(**cfg)
    ds = report["dataset"]
    train_ds, eval_ds, echo = resolve_datasets(
        ds["source"],
        seed=ds["seed"],
        classes=None,
        label_column=ds["label_column"],
        delimiter=ds["delimiter"],
        has_header=ds["has_header"],
        train_fraction=ds["train_fraction"],
        corruption_rate=ds["corruption_rate"],
    )
    result = train(config, train_ds, eval_ds)
    fresh = _run_report(report["command"], report["seed"], config, echo)
    fresh["epochs"] = _epoch_rows(result)
    fresh["summary"] = _summary(result, config, train_ds.class_count)
    return fresh


def cmd_curve(args) -> int:
    if args.lambdas:
        lambdas = _parse_floats(args.lambdas)
    elif args.lambda_range:
        low, high, count = args.lambda_range
        if low <= 0 or high <= low:
            raise ValueError("--lambda-range needs 0 < MIN < MAX")
        lambdas = list(np.geomspace(low, high, int(count)))
    else:
        raise ValueError("curve needs --lambdas or --lambda-range")
    if any(l <= 0 for l in lambdas):
        raise ValueError("curve weights must be positive")
    rows = []
    for c in _parse_ints(args.classes):
        for point in curve_points(sorted(lambdas), c):
            rows.append([repr(point.lam), repr(point.cpp), point.class_count])
    _write_csv(rows, CURVE_HEADER, args.out)
    return 0


def cmd_verify_cpp(args) -> int:
    started = time.perf_counter()
    lambdas = _parse_floats(args.lambdas)
    if any(l <= 0 for l in lambdas):
        raise ValueError("verify-cpp weights must be positive")
    runs = []
    echo = None
    config_echo = None
    for lam in lambdas:
        for i in range(args.runs):
            seed = args.seed + i
            train_ds, eval_ds, echo = _datasets_from_args(args, seed=seed)
            config = _config_from_args(
                args, train_ds.class_count, loss_kind="mer", lam=lam,
                lambda_schedule=None, seed=seed,
            )
            config_echo = asdict(config)
            result = train(config, train_ds, eval_ds)
            theoretical = cpp_for_lambda(lam, train_ds.class_count)
            runs.append(
                {
                    "lambda": lam,
                    "seed": seed,
                    "final_train_ce": result.train_ce,
                    "experimental_cpp": result.experimental_cpp,
                    "theoretical_cpp": theoretical,
                    "gap": theoretical - result.experimental_cpp,
                }
            )
    report = {
        "command": "verify-cpp",
        "artifact_version": __version__,
        "seed": args.seed,
        "config": config_echo,
        "dataset": echo,
        "runs": runs,
        "wall_clock_seconds": time.perf_counter() - started,
    }
    _write_json(report, args.out)
    return 0


def cmd_compare_ls(args) -> int:
    started = time.perf_counter()
    cpps = _parse_floats(args.cpps)
    probe_ds, _, _ = _datasets_from_args(args)
    class_count = probe_ds.class_count
    for cpp in cpps:
        if not 1.0 / class_count < cpp < 1.0:
            raise ValueError(f"target cpp {cpp} outside (1/{class_count}, 1)")
    pairs = []
    echo = None
    for cpp in cpps:
        if args.exact_ls_inverse:
            ls_lambda = (1.0 - cpp) * class_count / (class_count - 1)
        else:
            ls_lambda = 1.0 - cpp
        mer_lambda = lambda_for_cpp(cpp, class_count)
        entry = {
            "target_cpp": cpp,
            "ls_lambda": ls_lambda,
            "mer_lambda": mer_lambda,
            "runs": [],
            "mer_entropy_wins": 0,
        }
        for i in range(args.runs):
            seed = args.seed + i
            train_ds, eval_ds, echo = _datasets_from_args(args, seed=seed)
            run_row = {"seed": seed}
            for kind, lam in (("ls", ls_lambda), ("mer", mer_lambda)):
                config = _config_from_args(
                    args, class_count, loss_kind=kind, lam=lam,
                    lambda_schedule=None, seed=seed,
                )
                result = train(config, train_ds, eval_ds)
                run_row[kind] = {
                    "train_entropy": result.train_entropy,
                    "train_ce": result.train_ce,
                    "train_accuracy": result.train_accuracy,
                    "eval_accuracy": result.eval_accuracy,
                }
            run_row["mer_entropy_leq_ls"] = (
                run_row["mer"]["train_entropy"] <= run_row["ls"]["train_entropy"]
            )
            entry["mer_entropy_wins"] += int(run_row["mer_entropy_leq_ls"])
            entry["runs"].append(run_row)
        pairs.append(entry)
    report = {
        "command": "compare-ls",
        "artifact_version": __version__,
        "seed": args.seed,
        "classes": class_count,
        "exact_ls_inverse": bool(args.exact_ls_inverse),
        "dataset": echo,
        "pairs": pairs,
        "wall_clock_seconds": time.perf_counter() - started,
    }
    _write_json(report, args.out)
    return 0


def cmd_corrupt_sweep(args) -> int:
    started = time.perf_counter()
    rates = _parse_floats(args.rates)
    lambdas = _parse_floats(args.lambdas)
    if any(not 0.0 <= r <= 1.0 for r in rates):
        raise ValueError("corruption rates must lie in [0, 1]")
    if any(l < 0 for l in lambdas):
        raise ValueError("sweep weights must be >= 0 (0 disables the regularizer)")
    cells = []
    echo = None
    for rate in rates:
        for lam in lambdas:
            cell = {"rate": rate, "lambda": lam, "runs": []}
            for i in range(args.runs):
                seed = args.seed + i
                train_ds, eval_ds, echo = _datasets_from_args(
                    args, seed=seed
                )
                if rate > 0.0:
                    train_ds = corrupt_labels(train_ds, rate, seed=seed)
                config = _config_from_args(
                    args, train_ds.class_count, loss_kind="mer", lam=lam,
                    lambda_schedule=None, seed=seed,
                )
                result = train(config, train_ds, eval_ds)
                cell["runs"].append(
                    {
                        "seed": seed,
                        "eval_accuracy": result.eval_accuracy,
                        "train_accuracy": result.train_accuracy,
                        "train_entropy": result.train_entropy,
                    }
                )
            cell["mean_eval_accuracy"] = float(
                np.mean([r["eval_accuracy"] for r in cell["runs"]])
            )
            cells.append(cell)
    report = {
        "command": "corrupt-sweep",
        "artifact_version": __version__,
        "seed": args.seed,
        "rates": rates,
        "lambdas": lambdas,
        "dataset": echo,
        "cells": cells,
        "wall_clock_seconds": time.perf_counter() - started,
    }
    _write_json(report, args.out)
    return 0


def cmd_gen_data(args) -> int:
    spec = SyntheticSpec(
        class_count=args.classes if args.classes is not None else 20,
        per_class=args.per_class,
        feature_dim=args.dim,
        spacing=args.spacing,
        noise=args.noise,
        imbalance_ratio=args.imbalance_decay,
        seed=args.seed,
    )
    ds = generate_synthetic(spec)
    save_csv(ds, args.out, header=not args.no_header)
    print(
        json.dumps(
            {
                "written": args.out,
                "source": ds.source,
                "n_samples": ds.n_samples,
                "classes": ds.class_count,
                "feature_dim": ds.feature_dim,
                "oracle_accuracy": ds.oracle_accuracy,
            },
            indent=2,
        )
    )
    return 0


def _add_dataset_options(parser: argparse.ArgumentParser, train_fraction: float) -> None:
    parser.add_argument(
        "--dataset",
        default="synthetic",
        help="CSV path or a synthetic spec string like "
        "'synthetic:classes=20,per_class=100,dim=32,spacing=3.0,noise=1.0,seed=0'",
    )
    parser.add_argument("--classes", type=int, default=None, help="class count override")
    parser.add_argument("--label-column", type=int, default=-1)
    parser.add_argument("--delimiter", default=",")
    parser.add_argument("--no-header", action="store_true", help="CSV has no header row")
    parser.add_argument("--train-fraction", type=float, default=train_fraction)
    parser.add_argument("--corruption-rate", type=float, default=0.0)


def _add_train_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--loss", choices=["ce", "mer", "ls"], default="mer")
    parser.add_argument("--lambda", dest="lam", type=float, default=0.0,
                        help="regularization weight (0 with --loss mer equals plain CE)")
    parser.add_argument("--lambda-schedule", default=None,
                        help="piecewise schedule 'EPOCH:WEIGHT,...', e.g. '0:1.0,30:0.5,50:0.2,70:0.1'")
    parser.add_argument("--epochs", type=int, default=100)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--lr", type=float, default=1e-2)
    parser.add_argument("--momentum", type=float, default=0.9)
    parser.add_argument("--weight-decay", type=float, default=1e-4)
    parser.add_argument("--hidden-dim", type=int, default=None,
                        help="hidden width; 0 = linear model; default 4x classes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxentreg",
        description="Entropy-regularized softmax classification experiments",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output path (default: stdout)")

    p = sub.add_parser("train", help="train one model and write a JSON report")
    common(p)
    _add_dataset_options(p, train_fraction=0.8)
    _add_train_options(p)
    p.add_argument("--trace", default=None, help="also write a per-epoch CSV trace")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("curve", help="CSV of the weight-vs-converged-probability curve")
    common(p)
    p.add_argument("--classes", required=True, help="comma-separated class counts")
    p.add_argument("--lambdas", default=None, help="comma-separated weights")
    p.add_argument("--lambda-range", nargs=3, type=float, default=None,
                   metavar=("MIN", "MAX", "POINTS"), help="log-spaced weight grid")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("verify-cpp",
                       help="train at fixed weights and compare experimental vs theoretical converged probability")
    common(p)
    _add_dataset_options(p, train_fraction=1.0)
    _add_train_options(p)
    p.add_argument("--lambdas", required=True, help="comma-separated fixed weights")
    p.add_argument("--runs", type=int, default=3, help="seeds per weight (seed, seed+1, ...)")
    p.set_defaults(func=cmd_verify_cpp, dataset_default=VERIFY_DATASET)

    p = sub.add_parser("compare-ls",
                       help="paired label-smoothing vs entropy-regularization runs at matched target probabilities")
    common(p)
    _add_dataset_options(p, train_fraction=0.8)
    _add_train_options(p)
    p.add_argument("--cpps", required=True, help="comma-separated target converged probabilities")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--exact-ls-inverse", action="store_true",
                   help="derive the smoothing weight from the exact inverse (1-cpp)*C/(C-1) instead of 1-cpp")
    p.set_defaults(func=cmd_compare_ls)

    p = sub.add_parser("corrupt-sweep",
                       help="full-factorial corruption-rate x weight sweep of eval accuracy")
    common(p)
    _add_dataset_options(p, train_fraction=0.8)
    _add_train_options(p)
    p.add_argument("--rates", required=True, help="comma-separated corruption rates")
    p.add_argument("--lambdas", required=True, help="comma-separated weights (include 0 for the unregularized baseline)")
    p.add_argument("--runs", type=int, default=5)
    p.set_defaults(func=cmd_corrupt_sweep)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset CSV")
    common(p)
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--spacing", type=float, default=3.0)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--imbalance-decay", type=float, default=None,
                   help="geometric class-size decay ratio in (0, 1]")
    p.add_argument("--no-header", action="store_true")
    p.set_defaults(func=cmd_gen_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:  # argparse exits 2 on usage errors
        return int(err.code or 0)
    if getattr(args, "dataset", None) == "synthetic" and args.subcommand == "verify-cpp":
        args.dataset = args.dataset_default
    try:
        return args.func(args)
    except TrainingDiverged as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except NumericalError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
