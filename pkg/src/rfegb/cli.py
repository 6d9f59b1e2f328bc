"""Command-line entry point: ``rfegb {prep,train,rfe,compare}``."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from rfegb import __version__
from rfegb.baselines import (
    BaselineError,
    GnbClassifier,
    KnnClassifier,
    LdaClassifier,
    TreeClassifier,
)
from rfegb.boosting import (
    BoostingError,
    fit_gbm,
    predict_label,
    predict_proba,
    save_model,
    staged_train_loss,
)
from rfegb.config import ConfigError, RunConfig
from rfegb.dataset import (
    Dataset,
    DataError,
    LoadResult,
    apply_scaling,
    fit_scaling,
    read_csv,
    train_test_split,
    write_csv,
)
from rfegb.metrics import MetricError, evaluate, write_roc_csv
from rfegb.selection import SelectionError, rfecv, write_curve_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

ALGORITHMS = ("LDA", "KNN", "DT", "NB", "RFE-GB")
REPORT_VERSION = 1

# Published holdout results for the same five algorithms, for side-by-side
# display only.  Accuracy as a fraction; kappa is not attributable per model.
PUBLISHED = {
    "LDA": {"accuracy": 0.6487, "precision": 0.67, "recall": 0.61, "f1": 0.64,
            "mse": 0.35129, "rmse": 0.59269, "auc": 0.71},
    "KNN": {"accuracy": 0.6874, "precision": 0.70, "recall": 0.66, "f1": 0.68,
            "mse": 0.31257, "rmse": 0.55908, "auc": 0.74},
    "DT": {"accuracy": 0.6358, "precision": 0.65, "recall": 0.62, "f1": 0.63,
           "mse": 0.36414, "rmse": 0.60344, "auc": 0.64},
    "NB": {"accuracy": 0.583, "precision": 0.74, "recall": 0.27, "f1": 0.40,
           "mse": 0.41693, "rmse": 0.6457, "auc": 0.69},
    "RFE-GB": {"accuracy": 0.8978, "precision": 0.86, "recall": 0.84, "f1": 0.83,
               "mse": 0.19243, "rmse": 0.43866, "auc": 0.84},
}

TABLE_COLUMNS = {
    "accuracy": "Accuracy", "precision": "Precision", "recall": "Recall", "f1": "F1",
    "kappa": "Kappa", "mse": "MSE", "rmse": "RMSE", "auc": "AUC",
}


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)


def _write_json(obj, path: Path) -> None:
    path.write_text(_dumps(obj) + "\n", encoding="utf-8")


def content_hash(report: dict) -> str:
    """SHA-256 of the report with its ``timing`` and hash fields removed."""
    body = {k: v for k, v in report.items() if k not in ("timing", "content_hash")}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode("utf-8")).hexdigest()


def _load(cfg: RunConfig) -> LoadResult:
    if not cfg["data.input"]:
        raise ConfigError("no input file: set data.input or pass --input")
    return read_csv(
        cfg["data.input"],
        delimiter=cfg["data.delimiter"],
        age_unit=cfg["data.age_unit"],
        plausibility_filter=cfg["data.plausibility_filter"],
    )


def holdout(cfg: RunConfig, data: Dataset) -> tuple[Dataset, Dataset]:
    """Seeded split, then min-max scaling fitted on the training rows only."""
    strat = data.labels.tolist() if cfg["split.stratify"] else None
    split = train_test_split(data.n_rows, cfg["split.train_fraction"], cfg["seed"], strat)
    train, test = data.rows(split.train), data.rows(split.test)
    params = fit_scaling(train)
    return apply_scaling(train, params), apply_scaling(test, params)


def _select(cfg: RunConfig, train: Dataset):
    return rfecv(
        train,
        k=cfg["rfe.folds"],
        counts=cfg["rfe.counts"],
        seed=cfg["seed"],
        step=cfg["rfe.step"],
        config=cfg.selection(),
    )


def _names_to_cols(data: Dataset, names) -> list[int]:
    index = {n: i for i, n in enumerate(data.feature_names)}
    return sorted(index[n] for n in names)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- prep

def cmd_prep(cfg: RunConfig, output: Optional[str]) -> int:
    res = _load(cfg)
    data = res.dataset
    target = Path(output) if output else _out_dir(cfg) / "cleaned.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    write_csv(data, target)
    print(f"rows: {data.n_rows}")
    print(f"positives: {int(data.labels.sum())}")
    print(f"imputed: {res.n_imputed}")
    if cfg["data.plausibility_filter"]:
        print(f"filtered: {res.n_filtered}")
    print(f"{'column':<12} {'min':>10} {'max':>10} {'mode':>10}")
    for j, name in enumerate(data.feature_names):
        col = data.features[:, j]
        vals, counts = np.unique(col, return_counts=True)
        mode = vals[np.argmax(counts)]
        print(f"{name:<12} {col.min():>10g} {col.max():>10g} {mode:>10g}")
    print(f"written: {target}")
    return EXIT_OK


# ---------------------------------------------------------------- train

def cmd_train(cfg: RunConfig) -> int:
    data = _load(cfg).dataset
    gbm_cfg = cfg.gbm()
    train, test = holdout(cfg, data)
    names = list(train.feature_names)
    if cfg["train.select_features"]:
        names = _select(cfg, train).selected_features
    cols = _names_to_cols(train, names)
    train, test = train.columns(cols), test.columns(cols)
    model = fit_gbm(train, gbm_cfg)
    out = _out_dir(cfg)
    save_model(model, out / "model.json")
    losses = staged_train_loss(model, train)
    print(f"features: {', '.join(train.feature_names)}")
    print(f"stages: {len(model.stages)}")
    print(f"final training loss: {losses[-1]:.6f}")
    print(f"train accuracy: {np.mean(predict_label(model, train.features) == train.labels):.4f}")
    print(f"test accuracy: {np.mean(predict_label(model, test.features) == test.labels):.4f}")
    print(f"written: {out / 'model.json'}")
    return EXIT_OK


# ---------------------------------------------------------------- rfe

def cmd_rfe(cfg: RunConfig) -> int:
    data = _load(cfg).dataset
    scaled = apply_scaling(data, fit_scaling(data))
    result = _select(cfg, scaled)
    out = _out_dir(cfg)
    _write_json(result.to_dict(), out / "rfe.json")
    write_curve_csv(result, out / "rfe_curve.csv")
    for c, s in sorted(result.cv_scores.items()):
        print(f"{c:>3} features: cv accuracy {s:.4f}")
    print(f"selected count: {result.selected_count}")
    print(f"selected features: {', '.join(result.selected_features)}")
    return EXIT_OK


# ---------------------------------------------------------------- compare

def run_compare(cfg: RunConfig, baselines_use_selected: bool = False) -> dict:
    """Train every algorithm on one holdout split and score it on the rest.

    Returns the report dictionary; nothing is written.  ROC curves, the
    selection result and the fitted models ride along under the private keys
    ``_roc``, ``_rfe`` and ``_models``.
    """
    t_start = time.perf_counter()
    loaded = _load(cfg)
    data = loaded.dataset
    train, test = holdout(cfg, data)
    timing: dict[str, float] = {}

    t0 = time.perf_counter()
    selection = _select(cfg, train)
    timing["rfecv"] = time.perf_counter() - t0
    sel_cols = _names_to_cols(train, selection.selected_features)
    all_cols = list(range(train.n_features))
    base_cols = sel_cols if baselines_use_selected else all_cols

    classifiers = {
        "LDA": LdaClassifier(cfg["lda.shrinkage"]),
        "KNN": KnnClassifier(cfg["knn.k"]),
        "DT": TreeClassifier(cfg.dt()),
        "NB": GnbClassifier(cfg["nb.var_smoothing"]),
    }
    mode = cfg["metrics.error_mode"]
    echo = cfg.echo()
    results = []
    rocs = {}
    models = {}
    for name in ALGORITHMS:
        t0 = time.perf_counter()
        if name == "RFE-GB":
            cols = sel_cols
            tr, te = train.columns(cols), test.columns(cols)
            model = models[name] = fit_gbm(tr, cfg.gbm())
            scores = predict_proba(model, te.features)
            labels = (scores >= 0.5).astype(np.int64)
            probs = scores
        else:
            cols = base_cols
            tr, te = train.columns(cols), test.columns(cols)
            clf = models[name] = classifiers[name].fit(tr)
            scores, labels = clf.predict(te.features)
            probs = clf.probabilities(scores)
        report = evaluate(name, te.labels, scores, labels, probs, error_mode=mode,
                          seed=cfg["seed"], config_echo=echo)
        timing[name] = time.perf_counter() - t0
        entry = report.to_dict()
        entry["features"] = [train.feature_names[i] for i in cols]
        results.append(entry)
        rocs[name] = report.roc

    n_pos = int(data.labels.sum())
    report = {
        "version": REPORT_VERSION,
        "tool_version": __version__,
        "dataset": {
            "rows": data.n_rows,
            "features": list(data.feature_names),
            "positives": n_pos,
            "class_balance": n_pos / data.n_rows,
            "imputed": loaded.n_imputed,
            "filtered": loaded.n_filtered,
            "train_rows": train.n_rows,
            "test_rows": test.n_rows,
        },
        "config": cfg.as_dict(),
        "split": {
            "kind": "holdout",
            "train_fraction": cfg["split.train_fraction"],
            "stratified": cfg["split.stratify"],
            "seed": cfg["seed"],
        },
        "baselines_use_selected": baselines_use_selected,
        "results": results,
        "rfe": selection.to_dict(),
        "published": PUBLISHED,
    }
    report["content_hash"] = content_hash(report)
    timing["total"] = time.perf_counter() - t_start
    report["timing"] = timing
    report["_roc"] = rocs
    report["_rfe"] = selection
    report["_models"] = models
    return report


def format_table(report: dict) -> str:
    head = f"{'Algorithm':<10}" + "".join(f"{t:>11}" for t in TABLE_COLUMNS.values())
    lines = ["computed (holdout test partition)", head]
    for r in report["results"]:
        lines.append(f"{r['algorithm']:<10}" + "".join(f"{r[c]:>11.4f}" for c in TABLE_COLUMNS))
    lines += ["", "published reference values (MLP row not reproduced)", head]
    for name in ALGORITHMS:
        pub = report["published"][name]
        cells = "".join(f"{pub[c]:>11.4f}" if c in pub else f"{'-':>11}" for c in TABLE_COLUMNS)
        lines.append(f"{name:<10}" + cells)
    rfe_part = report["rfe"]
    lines += [
        "",
        f"feature criterion: {rfe_part['criterion']}",
        f"selected features ({rfe_part['selected_count']}): {', '.join(rfe_part['selected_features'])}",
    ]
    return "\n".join(lines)


def cmd_compare(cfg: RunConfig, baselines_use_selected: bool) -> int:
    report = run_compare(cfg, baselines_use_selected)
    rocs = report.pop("_roc")
    selection = report.pop("_rfe")
    report.pop("_models")
    out = _out_dir(cfg)
    _write_json(report, out / "report.json")
    for name, roc in rocs.items():
        write_roc_csv(roc, out / f"roc_{name}.csv")
    write_curve_csv(selection, out / "rfe_curve.csv")
    _write_json(report["rfe"], out / "rfe.json")
    table = format_table(report)
    (out / "table.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    print(f"report hash: {report['content_hash']}")
    return EXIT_OK


# ---------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfegb", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rfegb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("--input", help="input CSV (data.input)")
        p.add_argument("--seed", type=int, help="random seed (seed)")
        p.add_argument("--delimiter", help="input delimiter, ';' or ',' (data.delimiter)")
        return p

    p = common(sub.add_parser("prep", help="clean a CSV and print a column summary"))
    p.add_argument("--output", help="cleaned CSV path (default <output.dir>/cleaned.csv)")
    for name, text in (("train", "fit and save a boosted model"),
                       ("rfe", "run cross-validated recursive feature elimination"),
                       ("compare", "train and score every algorithm on one holdout split")):
        p = common(sub.add_parser(name, help=text))
        p.add_argument("--output-dir", help="output directory (output.dir)")
        if name == "compare":
            p.add_argument("--baselines-use-selected", action="store_true",
                           help="give the baselines the selected features instead of all")
    return parser


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        cfg.set(key, raw)
    if args.input:
        cfg.set("data.input", args.input)
    if args.seed is not None:
        cfg.set("seed", str(args.seed))
    if args.delimiter:
        cfg.set("data.delimiter", args.delimiter)
    if getattr(args, "output_dir", None):
        cfg.set("output.dir", args.output_dir)
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "prep":
            return cmd_prep(cfg, args.output)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "rfe":
            return cmd_rfe(cfg)
        return cmd_compare(cfg, args.baselines_use_selected or cfg["compare.baselines_use_selected"])
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BoostingError, BaselineError, SelectionError, MetricError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
