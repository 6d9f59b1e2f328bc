"""Feature ranking, recursive elimination and cross-validated count selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from rfegb._random import permutation
from rfegb.boosting import GbmConfig, fit_gbm, gbm_importances, predict_label
from rfegb.dataset import Dataset, kfold

CRITERIA = ("gb-importance", "squared-weight")


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class MarginConfig:
    """Hinge-loss subgradient descent settings for the linear ranker."""

    regularization: float = 1e-4
    epochs: int = 20
    batch_size: int = 32
    initial_step: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.regularization < 0:
            raise ValueError("regularization must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be > 0")


@dataclass(frozen=True)
class SelectionConfig:
    criterion: str = "gb-importance"
    gbm: GbmConfig = field(default_factory=GbmConfig)
    margin: MarginConfig = field(default_factory=MarginConfig)

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}; expected one of {CRITERIA}")


@dataclass(frozen=True, eq=False)
class LinearMarginModel:
    w: np.ndarray
    b: float
    config: MarginConfig

    def decision_function(self, rows) -> np.ndarray:
        return np.asarray(rows, dtype=np.float64) @ self.w + self.b


def fit_linear_margin_model(train: Dataset, config: MarginConfig = MarginConfig()) -> LinearMarginModel:
    """L2-regularized hinge loss by seeded mini-batch subgradient descent.

    Labels map to -1/+1.  The step at update t is
    ``initial_step / (1 + initial_step * regularization * t)``; the bias is
    not regularized.
    """
    y01 = train.labels
    if y01.min() == y01.max():
        raise SelectionError("linear margin model needs both classes")
    X = train.features
    y = np.where(y01 == 1, 1.0, -1.0)
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    lam = config.regularization
    t = 0
    for epoch in range(config.epochs):
        order = np.asarray(permutation(n, config.seed + epoch), dtype=np.int64)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            step = config.initial_step / (1.0 + config.initial_step * lam * t)
            Xb, yb = X[idx], y[idx]
            viol = yb * (Xb @ w + b) < 1.0
            m = len(idx)
            w = (1.0 - step * lam) * w + step * (yb[viol] @ Xb[viol]) / m
            b = b + step * yb[viol].sum() / m
            t += 1
    return LinearMarginModel(w, float(b), config)


def weight_ranking(model: LinearMarginModel) -> np.ndarray:
    """Squared weight per feature; larger means more important."""
    return np.asarray(model.w, dtype=np.float64) ** 2


def rank_features(train: Dataset, config: SelectionConfig = SelectionConfig()) -> np.ndarray:
    if config.criterion == "squared-weight":
        return weight_ranking(fit_linear_margin_model(train, config.margin))
    return gbm_importances(fit_gbm(train, config.gbm))


@dataclass
class RfeResult:
    feature_names: tuple[str, ...]
    criterion: str
    ranking: list[int]
    cv_scores: dict[int, float] = field(default_factory=dict)
    selected_count: int = 0
    selected_features: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "ranking": [self.feature_names[i] for i in self.ranking],
            "cv_scores": {str(c): s for c, s in sorted(self.cv_scores.items())},
            "selected_count": self.selected_count,
            "selected_features": list(self.selected_features),
        }


class _FitCache:
    """Fitted rankers and boosted models keyed by surviving column indices."""

    def __init__(self, train: Dataset, config: SelectionConfig):
        self.train = train
        self.config = config
        self.criteria: dict[tuple[int, ...], np.ndarray] = {}
        self.models: dict[tuple[int, ...], object] = {}

    def model(self, cols: tuple[int, ...]):
        if cols not in self.models:
            self.models[cols] = fit_gbm(self.train.columns(cols), self.config.gbm)
        return self.models[cols]

    def criterion(self, cols: tuple[int, ...]) -> np.ndarray:
        if cols not in self.criteria:
            if self.config.criterion == "gb-importance":
                self.criteria[cols] = gbm_importances(self.model(cols))
            else:
                self.criteria[cols] = rank_features(self.train.columns(cols), self.config)
        return self.criteria[cols]


def _rfe(cache: _FitCache, step: int, target_count: int):
    d = cache.train.n_features
    if step < 1:
        raise SelectionError("step must be >= 1")
    if not 1 <= target_count <= d:
        raise SelectionError(f"target_count must lie in [1, {d}], got {target_count}")
    survivors = list(range(d))
    eliminated: list[int] = []
    last_scores: Optional[np.ndarray] = None
    while len(survivors) > target_count:
        scores = cache.criterion(tuple(survivors))
        # lowest criterion first; ties drop the lower column index first
        order = np.argsort(scores, kind="stable")
        n_drop = min(step, len(survivors) - target_count)
        drop = {survivors[i] for i in order[:n_drop]}
        eliminated.extend(survivors[i] for i in order[:n_drop])
        last_scores = {survivors[i]: scores[i] for i in range(len(survivors))}
        survivors = [f for f in survivors if f not in drop]
    if last_scores is not None:
        survivors = sorted(survivors, key=lambda f: (-last_scores[f], f))
    return eliminated + survivors


def rfe(
    train: Dataset,
    step: int = 1,
    target_count: int = 1,
    config: SelectionConfig = SelectionConfig(),
) -> RfeResult:
    """Recursive elimination down to ``target_count`` features.

    ``ranking`` lists eliminated columns in removal order, then the
    survivors by their last computed criterion, highest first.
    """
    ranking = _rfe(_FitCache(train, config), step, target_count)
    survivors = ranking[-target_count:]
    return RfeResult(
        train.feature_names,
        config.criterion,
        ranking,
        selected_count=target_count,
        selected_features=[train.feature_names[i] for i in survivors],
    )


def rfecv(
    data: Dataset,
    k: int = 10,
    counts: Optional[Sequence[int]] = None,
    seed: int = 0,
    step: int = 1,
    config: SelectionConfig = SelectionConfig(),
) -> RfeResult:
    """Pick the feature count with the best mean held-out accuracy.

    Elimination is rerun inside every fold's training part, and a boosted
    model on the fold's survivors is scored on its held-out part.  Equal
    mean scores resolve to the smaller count.
    """
    d = data.n_features
    counts = sorted(set(range(1, d + 1) if counts is None else counts))
    if not counts:
        raise SelectionError("no feature counts to evaluate")
    if counts[0] < 1 or counts[-1] > d:
        raise SelectionError(f"feature counts must lie in [1, {d}]")
    plan = kfold(data.n_rows, k, seed, stratify_labels=data.labels.tolist())

    totals = {c: 0.0 for c in counts}
    for i in range(k):
        part = plan.split(i)
        train, held = data.rows(part.train), data.rows(part.test)
        cache = _FitCache(train, config)
        for c in counts:
            cols = tuple(sorted(_rfe(cache, step, c)[-c:]))
            model = cache.model(cols)
            pred = predict_label(model, held.features[:, list(cols)])
            totals[c] += float(np.mean(pred == held.labels))
    cv_scores = {c: totals[c] / k for c in counts}

    best = max(cv_scores.values())
    selected = min(c for c in counts if cv_scores[c] == best)
    final = rfe(data, step, selected, config)
    final.cv_scores = cv_scores
    return final


def write_curve_csv(result: RfeResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("feature_count,cv_score\n")
        for c, s in sorted(result.cv_scores.items()):
            fh.write(f"{c},{s!r}\n")
