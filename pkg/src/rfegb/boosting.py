"""Binary gradient boosting with logistic loss and Newton leaf values."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rfegb.dataset import Dataset
from rfegb.tree import (
    BinnedFeatures,
    Node,
    TreeConfig,
    grow_tree,
    iter_splits,
    predict_tree_batch,
    tree_from_dict,
    tree_importances,
    tree_to_dict,
)

FORMAT_VERSION = 1
# Newton denominators below this give a zero leaf step
HESSIAN_FLOOR = 1e-12
# probabilities are kept inside [PROBA_EPS, 1 - PROBA_EPS]; 1 - 2**-53 is the
# largest double below one
PROBA_EPS = 2.0**-53


class BoostingError(ValueError):
    pass


@dataclass(frozen=True)
class GbmConfig:
    n_stages: int = 100
    learning_rate: float = 0.1
    tree: TreeConfig = field(default_factory=TreeConfig)
    seed: int = 0

    def __post_init__(self):
        if self.n_stages < 1:
            raise ValueError("n_stages must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate out of range (0, 1]")


@dataclass(frozen=True, eq=False)
class GbmModel:
    initial_score: float
    stages: tuple[tuple[Node, float], ...]
    n_features: int
    feature_names: tuple[str, ...]

    @property
    def learning_rate(self) -> float:
        return self.stages[0][1] if self.stages else 0.0


def sigmoid(F) -> np.ndarray:
    """Logistic function, evaluated on the branch that cannot overflow."""
    F = np.asarray(F, dtype=np.float64)
    out = np.empty_like(F)
    pos = F >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-F[pos]))
    e = np.exp(F[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def log_loss(y, F) -> np.ndarray:
    """Per-sample binomial deviance ``log(1 + e^F) - y F``."""
    F = np.asarray(F, dtype=np.float64)
    return np.logaddexp(0.0, F) - np.asarray(y, dtype=np.float64) * F


def residuals(y, F) -> np.ndarray:
    """Negative gradient of ``log_loss`` with respect to ``F``."""
    return np.asarray(y, dtype=np.float64) - sigmoid(F)


def fit_gbm(train: Dataset, config: GbmConfig = GbmConfig()) -> GbmModel:
    if train.n_rows == 0:
        raise BoostingError("cannot fit on an empty dataset")
    y = train.labels.astype(np.float64)
    p = y.mean()
    if p == 0.0 or p == 1.0:
        raise BoostingError(
            "all labels identical: initial log-odds is infinite; use a constant model instead"
        )
    F0 = float(np.log(p / (1.0 - p)))
    binned = BinnedFeatures(train.features)
    ones = np.ones(train.n_rows)
    rows = np.arange(train.n_rows)
    F = np.full(train.n_rows, F0)
    rate = config.learning_rate
    stages = []
    for _ in range(config.n_stages):
        prob = sigmoid(F)
        r = y - prob
        grower, leaf_of = grow_tree(binned, r, ones, config.tree, gini=False, rows=rows)
        n_nodes = len(grower.feature)
        num = np.bincount(leaf_of, weights=r, minlength=n_nodes)
        den = np.bincount(leaf_of, weights=prob * (1.0 - prob), minlength=n_nodes)
        step = np.divide(num, den, out=np.zeros(n_nodes), where=den >= HESSIAN_FLOOR)
        counts = np.bincount(leaf_of, minlength=n_nodes)
        stages.append((grower.build(step, counts), rate))
        F = F + rate * step[leaf_of]
    return GbmModel(F0, tuple(stages), train.n_features, train.feature_names)


def _check_width(model: GbmModel, rows) -> np.ndarray:
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise BoostingError(
            f"expected rows with {model.n_features} columns, got shape {X.shape}"
        )
    return X


def staged_scores(model: GbmModel, rows):
    """Yield raw scores after 0, 1, ..., n_stages stages."""
    X = _check_width(model, rows)
    F = np.full(X.shape[0], model.initial_score)
    yield F
    for tree, rate in model.stages:
        F = F + rate * predict_tree_batch(tree, X)
        yield F


def decision_function(model: GbmModel, rows) -> np.ndarray:
    F = None
    for F in staged_scores(model, rows):
        pass
    return F


def predict_proba(model: GbmModel, rows) -> np.ndarray:
    return np.clip(sigmoid(decision_function(model, rows)), PROBA_EPS, 1.0 - PROBA_EPS)


def predict_label(model: GbmModel, rows, threshold: float = 0.5) -> np.ndarray:
    if not 0.0 < threshold < 1.0:
        raise BoostingError("threshold must lie in (0, 1)")
    return (predict_proba(model, rows) >= threshold).astype(np.int64)


def staged_train_loss(model: GbmModel, train: Dataset) -> np.ndarray:
    """Mean log-loss on ``train`` after each stage, starting from stage 0."""
    y = train.labels
    return np.array([log_loss(y, F).mean() for F in staged_scores(model, train.features)])


def gbm_importances(model: GbmModel) -> np.ndarray:
    total = np.zeros(model.n_features)
    for tree, _ in model.stages:
        total += tree_importances(tree, model.n_features)
    s = total.sum()
    if not any(True for tree, _ in model.stages for _ in iter_splits(tree)) or s <= 0:
        raise BoostingError("no splits; importances undefined")
    return total / s


def model_to_dict(model: GbmModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "feature_names": list(model.feature_names),
        "initial_score": model.initial_score,
        "learning_rate": model.learning_rate,
        "stages": [tree_to_dict(tree) for tree, _ in model.stages],
    }


def model_from_dict(d: dict) -> GbmModel:
    if d.get("format_version") != FORMAT_VERSION:
        raise BoostingError(f"unsupported model format_version {d.get('format_version')!r}")
    rate = float(d["learning_rate"])
    names = tuple(d["feature_names"])
    stages = tuple((tree_from_dict(t), rate) for t in d["stages"])
    return GbmModel(float(d["initial_score"]), stages, len(names), names)


def dumps_model(model: GbmModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))


def save_model(model: GbmModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model))
        fh.write("\n")


def load_model(path) -> GbmModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def select_columns(data: Dataset, names: Sequence[str]) -> Dataset:
    index = {n: i for i, n in enumerate(data.feature_names)}
    return data.columns([index[n] for n in names])
