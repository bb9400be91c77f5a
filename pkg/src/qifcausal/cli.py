"""Command-line entry point: ``qif-causal <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .datasets import (
    DataSource,
    PairLabel,
    generate_synthetic_anm,
    infer_kind,
    load_challenge,
    load_challenge_dir,
    load_tuebingen,
    write_challenge,
)
from .errors import DatasetError, InvalidConfig, QIFError
from .evaluation import ExperimentSpec, format_report, report_json, run_experiment
from .features import FEATURE_NAMES, ExtractionConfig, VariablePair, extract_features, feature_matrix, read_features_csv, write_features_csv
from .gbdt import BoostedModel, TrainConfig, fit, predict, predict_proba

logger = logging.getLogger("qifcausal")


def _meta_path(features_csv) -> Path:
    return Path(str(features_csv) + ".meta.json")


def _load_input(path: Path, fmt: str):
    if fmt == "tuebingen":
        return load_tuebingen(path)
    source = DataSource.SYNTHETIC if fmt == "synthetic" else DataSource.CHALLENGE
    if path.is_dir():
        return load_challenge_dir(path, source=source)
    # a pairs CSV with its targets next to it: foo_pairs.csv -> foo_target(s).csv
    for name in (path.name.replace("pairs", "targets"), path.name.replace("pairs", "target")):
        cand = path.with_name(name)
        if cand != path and cand.is_file():
            return load_challenge(path, cand, source=source)
    raise DatasetError(f"{path}: cannot locate the targets file")


def cmd_features(args) -> int:
    cfg = ExtractionConfig(n_bins=args.bins, kde_grid=args.kde_grid,
                           numeric_estimator="binning" if args.force_binning else "kde")
    ds = _load_input(Path(args.input), args.format)
    X = feature_matrix(ds.pairs, cfg)
    write_features_csv(args.out, ds.ids, X, ds.labels)
    _meta_path(args.out).write_text(json.dumps({"extraction": cfg.to_dict(), "source": ds.source.value,
                                                "n_pairs": len(ds), "skipped": ds.skipped}, indent=2, sort_keys=True) + "\n",
                                    encoding="utf-8")
    print(f"wrote {len(ds)} feature rows to {args.out} ({ds.skipped} pairs skipped)")
    return 0


def cmd_train(args) -> int:
    ids, X, labels = read_features_csv(args.features)
    if labels is None:
        raise InvalidConfig(f"{args.features} has no label column")
    labels = [PairLabel(lab) for lab in labels]
    if args.task == "2class":
        keep = [i for i, lab in enumerate(labels) if lab in (PairLabel.CAUSAL, PairLabel.ANTICAUSAL)]
        X, labels = X[keep], [labels[i] for i in keep]
    elif len(set(labels)) < 3:
        raise InvalidConfig("4class task needs confounded/independent rows in the feature file")
    cfg = TrainConfig(n_trees=args.trees, max_depth=args.depth, learning_rate=args.lr, seed=args.seed)
    model = fit(X, labels, cfg, FEATURE_NAMES)
    meta = _meta_path(args.features)
    if meta.is_file():
        model.extra["extraction"] = json.loads(meta.read_text(encoding="utf-8"))["extraction"]
    model.extra["task"] = args.task
    Path(args.model_out).write_text(model.to_json(), encoding="utf-8")
    train_acc = float(np.mean([p == t for p, t in zip(predict(model, X), labels)]))
    print(f"trained on {len(labels)} pairs, training accuracy {train_acc:.4f}; model written to {args.model_out}")
    return 0


def cmd_evaluate(args) -> int:
    spec = ExperimentSpec.from_file(args.spec)
    report = run_experiment(spec)
    Path(args.report_out).write_text(report_json(report), encoding="utf-8")
    sys.stdout.write(format_report(report))
    return 0


def read_pair_file(path) -> np.ndarray:
    """Two numeric columns separated by whitespace or commas; a header line is skipped."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            toks = line.replace(",", " ").split()
            if not toks:
                continue
            try:
                rows.append([float(t) for t in toks])
            except ValueError:
                if rows:
                    raise DatasetError(f"{path}:{line_no}: unparsable numeric cell") from None
                continue
    if not rows or any(len(r) != 2 for r in rows):
        raise DatasetError(f"{path}: expected exactly two numeric columns")
    return np.array(rows, dtype=float)


def cmd_predict(args) -> int:
    model = BoostedModel.from_json(Path(args.model).read_text(encoding="utf-8"))
    cfg = ExtractionConfig.from_dict(model.extra.get("extraction", {}))
    data = read_pair_file(args.pair)
    pair = VariablePair(data[:, 0], data[:, 1], infer_kind(data[:, 0]), infer_kind(data[:, 1]), Path(args.pair).stem)
    fv = extract_features(pair, cfg)
    proba = predict_proba(model, fv.values)
    label = predict(model, fv.values)
    out = {
        "schema_version": 1,
        "pair": str(args.pair),
        "label": getattr(label, "value", label),
        "probabilities": {getattr(c, "value", c): float(p) for c, p in zip(model.classes, proba)},
        "features": fv.as_dict(),
    }
    Path(args.out).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{pair.id}: {out['label']}")
    return 0


def cmd_synth(args) -> int:
    ds = generate_synthetic_anm(args.pairs, args.samples, args.seed, args.classes)
    paths = write_challenge(ds, args.out)
    manifest = {"generator": "anm", "pairs": args.pairs, "samples": args.samples,
                "classes": args.classes, "seed": args.seed, "files": {k: p.name for k, p in paths.items()}}
    (Path(args.out) / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(ds)} synthetic pairs to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qif-causal", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="extract QIF features of every pair in a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["challenge", "tuebingen", "synthetic"], required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--kde-grid", type=int, default=32)
    p.add_argument("--force-binning", action="store_true", help="bin numeric/numeric pairs instead of using the KDE grid")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="fit a boosted-tree classifier on a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--task", choices=["2class", "4class"], default="2class")
    p.add_argument("--trees", type=int, default=200)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run an experiment described by a JSON spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--report-out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify one pair file with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--pair", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="generate synthetic additive-noise pairs in challenge CSV format")
    p.add_argument("--pairs", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--classes", type=int, choices=[2, 4], default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (QIFError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
