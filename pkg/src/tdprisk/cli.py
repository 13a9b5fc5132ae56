"""Command-line orchestration: batch analyses with machine-readable reports.

Subcommands mirror the analysis pipeline: ``validate`` and ``synth`` handle
data, ``fit``/``predict`` train and apply a model, and ``eval-split``,
``eval-cv``, ``bootstrap``, ``importance`` run the resampling protocols.
JSON reports embed a run manifest (command, resolved configuration, seed,
tool version, input digests, duration) so any report is reproducible from
its own header. Exit codes: 0 success, 1 data/model error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
import time

import numpy as np

from . import __version__
from .data import load_csv, select_features, synthesize_dataset, write_csv, SynthConfig
from .errors import TdpRiskError
from .evaluation import (
    GROUPINGS,
    GROUPING_BY_OBSERVATION,
    SplitSpec,
    accuracy,
    bootstrap_accuracy,
    k_fold_cv,
    normalize_importance,
    percentile_ci,
    permutation_importance,
    train_test_split,
)
from .trainer import FittedModel, TrainConfig, fit, predict

HISTOGRAM_BINS = 20


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("true", "1", "yes", "on"):
        return True
    if value in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _read_input(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    try:
        with open(path, "rb") as handle:
            return handle.read()
    except OSError as exc:
        raise TdpRiskError(f"cannot read {path!r}: {exc}") from exc


def _write_output(path: str | None, payload: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(payload)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(payload)
    except OSError as exc:
        raise TdpRiskError(f"cannot write {path!r}: {exc}") from exc


def _digest(raw: bytes) -> str:
    return "sha256:" + hashlib.sha256(raw).hexdigest()


def _load_dataset(args, digests: dict[str, str]):
    raw = _read_input(args.data)
    digests["data"] = _digest(raw)
    dataset = load_csv(io.BytesIO(raw))
    features = getattr(args, "features", "all")
    if features != "all":
        names = [n.strip() for n in features.split(",") if n.strip()]
        dataset = select_features(dataset, names)
    return dataset


def _train_config(args) -> TrainConfig:
    try:
        return TrainConfig(ridge=args.ridge, standardize=args.standardize)
    except ValueError as exc:
        raise TdpRiskError(str(exc)) from exc


def _manifest(command: str, config: dict, seed: int | None, digests: dict[str, str]) -> dict:
    return {
        "command": command,
        "config": config,
        "master_seed": seed,
        "version": __version__,
        "input_digests": digests,
        "duration_seconds": None,
    }


def _report_json(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _cmd_validate(args):
    digests: dict[str, str] = {}
    dataset = _load_dataset(args, digests)
    counts = dataset.class_counts()
    doc = {
        "manifest": _manifest("validate", {"data": args.data, "features": args.features},
                              None, digests),
        "observations": dataset.n,
        "features": dataset.p,
        "feature_names": list(dataset.feature_names),
        "drugs": len({obs.drug_id for obs in dataset.observations}),
        "class_counts": {c.letter: counts[c] for c in counts},
    }
    return doc, args.out


def _cmd_synth(args):
    config = SynthConfig(
        class_separation=args.separation,
        replicate_noise=args.noise,
        seed=args.seed,
    )
    dataset = synthesize_dataset(config)
    sink = io.BytesIO()
    write_csv(dataset, sink)
    return sink.getvalue().decode("utf-8"), args.out


def _cmd_fit(args):
    digests: dict[str, str] = {}
    dataset = _load_dataset(args, digests)
    model = fit(dataset, _train_config(args))
    doc = {
        "manifest": _manifest(
            "fit",
            {
                "data": args.data,
                "features": args.features,
                "ridge": args.ridge,
                "standardize": args.standardize,
            },
            None,
            digests,
        ),
    }
    doc.update(json.loads(model.to_json()))
    return doc, args.out


def _cmd_predict(args):
    digests: dict[str, str] = {}
    model_raw = _read_input(args.model)
    digests["model"] = _digest(model_raw)
    model = FittedModel.from_json(model_raw.decode("utf-8"))
    data_raw = _read_input(args.data)
    digests["data"] = _digest(data_raw)
    dataset = load_csv(io.BytesIO(data_raw))
    dataset = select_features(dataset, model.feature_names)
    lines = ["drug,replicate,p_low,p_medium,p_high,predicted_risk"]
    for obs in dataset.observations:
        probs, label = predict(model, obs.features)
        lines.append(
            ",".join(
                (
                    obs.drug_id,
                    str(obs.replicate),
                    repr(probs.p_low),
                    repr(probs.p_medium),
                    repr(probs.p_high),
                    label.letter,
                )
            )
        )
    return "\n".join(lines) + "\n", args.out


def _cmd_eval_split(args):
    digests: dict[str, str] = {}
    dataset = _load_dataset(args, digests)
    spec = SplitSpec(
        train_fraction=args.train_frac, seed=args.seed, grouping=args.grouping
    )
    train, test = train_test_split(dataset, spec)
    model = fit(train, _train_config(args))
    truth = [obs.label for obs in test.observations]
    preds = [predict(model, obs.features)[1] for obs in test.observations]
    doc = {
        "manifest": _manifest(
            "eval-split",
            {
                "data": args.data,
                "features": args.features,
                "train_frac": args.train_frac,
                "seed": args.seed,
                "grouping": args.grouping,
                "ridge": args.ridge,
                "standardize": args.standardize,
            },
            args.seed,
            digests,
        ),
        "train_size": train.n,
        "test_size": test.n,
        "accuracy": accuracy(truth, preds),
    }
    return doc, args.out


def _cmd_eval_cv(args):
    digests: dict[str, str] = {}
    dataset = _load_dataset(args, digests)
    report = k_fold_cv(
        dataset,
        k=args.k,
        seed=args.seed,
        grouping=args.grouping,
        train_config=_train_config(args),
        threads=args.threads,
    )
    doc = {
        "manifest": _manifest(
            "eval-cv",
            {
                "data": args.data,
                "features": args.features,
                "k": args.k,
                "seed": args.seed,
                "grouping": args.grouping,
                "ridge": args.ridge,
                "standardize": args.standardize,
                "threads": args.threads,
            },
            args.seed,
            digests,
        ),
        "k": report.k,
        "fold_assignments": list(report.fold_assignments),
        "per_fold_accuracy": list(report.per_fold_accuracy),
        "mean_accuracy": report.mean_accuracy,
    }
    return doc, args.out


def _cmd_bootstrap(args):
    digests: dict[str, str] = {}
    dataset = _load_dataset(args, digests)
    dist = bootstrap_accuracy(
        dataset,
        k=args.k,
        total_replicates=args.replicates,
        master_seed=args.seed,
        train_config=_train_config(args),
        grouping=args.grouping,
        threads=args.threads,
    )
    ci_low, ci_high = percentile_ci(dist, level=args.level)
    counts, _ = np.histogram(
        np.asarray(dist.accuracies), bins=HISTOGRAM_BINS, range=(0.0, 1.0)
    )
    doc = {
        "manifest": _manifest(
            "bootstrap",
            {
                "data": args.data,
                "features": args.features,
                "k": args.k,
                "seed": args.seed,
                "replicates": args.replicates,
                "level": args.level,
                "grouping": args.grouping,
                "ridge": args.ridge,
                "standardize": args.standardize,
                "threads": args.threads,
            },
            args.seed,
            digests,
        ),
        "k": args.k,
        "total_replicates": args.replicates,
        "completed_replicates": len(dist.accuracies),
        "level": args.level,
        "ci_low": ci_low,
        "ci_high": ci_high,
        "histogram_bin_count": HISTOGRAM_BINS,
        "histogram_counts": [int(c) for c in counts],
        "accuracies": list(dist.accuracies),
        "skipped": [
            {"replicate": s.replicate, "fold": s.fold, "reason": s.reason}
            for s in dist.skipped
        ],
    }
    return doc, args.out


def _cmd_importance(args):
    digests: dict[str, str] = {}
    dataset = _load_dataset(args, digests)
    table = permutation_importance(
        dataset,
        k=args.k,
        seed=args.seed,
        repeats=args.repeats,
        train_config=_train_config(args),
        grouping=args.grouping,
        threads=args.threads,
    )
    table = normalize_importance(table)
    ranked = sorted(table.entries, key=lambda e: -e.raw_importance)
    doc = {
        "manifest": _manifest(
            "importance",
            {
                "data": args.data,
                "features": args.features,
                "k": args.k,
                "seed": args.seed,
                "repeats": args.repeats,
                "grouping": args.grouping,
                "ridge": args.ridge,
                "standardize": args.standardize,
                "threads": args.threads,
            },
            args.seed,
            digests,
        ),
        "baseline_accuracy": table.baseline_accuracy,
        "importances": [
            {
                "feature": e.feature_name,
                "raw_importance": e.raw_importance,
                "normalized_importance": e.normalized_importance,
                "clipped": e.clipped,
            }
            for e in ranked
        ],
    }
    return doc, args.out


def _add_data_flags(parser, features=True):
    parser.add_argument("--data", required=True, help="input CSV path, or - for stdin")
    if features:
        parser.add_argument(
            "--features",
            default="all",
            help="comma-separated predictor columns to use, or 'all'",
        )


def _add_train_flags(parser):
    parser.add_argument("--ridge", type=float, default=1e-4,
                        help="ridge penalty on non-intercept coefficients")
    parser.add_argument("--standardize", type=_parse_bool, default=True,
                        metavar="BOOL", help="z-score features on training data")


def _add_resampling_flags(parser):
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--grouping", choices=GROUPINGS,
                        default=GROUPING_BY_OBSERVATION,
                        help="resample rows or whole drugs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tdprisk",
        description="Three-class drug TdP-risk modeling and evaluation toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a CSV against the dataset schema")
    _add_data_flags(p)
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("synth", help="write a synthetic fixture CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--separation", type=float, default=0.35,
                   help="class separation of the latent feature means")
    p.add_argument("--noise", type=float, default=0.5,
                   help="replicate-level noise around each drug mean")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("fit", help="fit a model and write it as JSON")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--out", help="model JSON path (default stdout)")
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("predict", help="per-row probabilities and classes as CSV")
    _add_data_flags(p, features=False)
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(handler=_cmd_predict)

    p = sub.add_parser("eval-split", help="train/test split accuracy")
    _add_data_flags(p)
    _add_train_flags(p)
    _add_resampling_flags(p)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(handler=_cmd_eval_split)

    p = sub.add_parser("eval-cv", help="k-fold cross-validation accuracy")
    _add_data_flags(p)
    _add_train_flags(p)
    _add_resampling_flags(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(handler=_cmd_eval_cv)

    p = sub.add_parser("bootstrap", help="bootstrap accuracy distribution and CI")
    _add_data_flags(p)
    _add_train_flags(p)
    _add_resampling_flags(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(handler=_cmd_bootstrap)

    p = sub.add_parser("importance", help="permutation predictor importance")
    _add_data_flags(p)
    _add_train_flags(p)
    _add_resampling_flags(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(handler=_cmd_importance)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        payload, out = args.handler(args)
    except TdpRiskError as exc:
        print(f"tdprisk {args.command}: error: {exc}", file=sys.stderr)
        return 1
    if isinstance(payload, dict):
        if "manifest" in payload:
            payload["manifest"]["duration_seconds"] = time.perf_counter() - started
        text = _report_json(payload)
    else:
        text = payload
    _write_output(out, text)
    return 0


def entry_point():
    sys.exit(main())
