"""Comparison classifiers: LDA, Gaussian naive Bayes, k-NN and a Gini tree.

Every classifier yields a continuous class-1 score (for ROC) and a 0/1
label; unless noted otherwise, exact ties resolve to class 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rfegb.boosting import sigmoid
from rfegb.dataset import Dataset
from rfegb.tree import TreeConfig, fit_classification_tree, predict_tree_batch

GNB_VAR_SMOOTHING = 1e-9
LDA_SHRINKAGE = 1e-4
KNN_K = 5
# the DT baseline is grown out fully unless configured otherwise
DT_CONFIG = TreeConfig(max_depth=64, min_samples_split=2, min_samples_leaf=1)
# test rows per block of the k-NN distance computation
_KNN_BLOCK = 256


class BaselineError(ValueError):
    pass


def _two_classes(train: Dataset):
    y = train.labels
    n1 = int(y.sum())
    if n1 == 0 or n1 == y.size:
        raise BaselineError("training data must contain both classes")
    return y == 0, y == 1


def _rows(rows, width: int) -> np.ndarray:
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != width:
        raise BaselineError(f"expected rows with {width} columns, got shape {X.shape}")
    return X


@dataclass(frozen=True, eq=False)
class LdaModel:
    class_means: np.ndarray  # (2, d)
    pooled_covariance_inverse: np.ndarray  # (d, d)
    log_priors: np.ndarray  # (2,)


def fit_lda(train: Dataset, shrinkage: float = LDA_SHRINKAGE) -> LdaModel:
    """Two-class LDA with a trace-scaled ridge on the pooled covariance."""
    if shrinkage < 0:
        raise BaselineError("shrinkage must be >= 0")
    m0, m1 = _two_classes(train)
    X = train.features
    n, d = X.shape
    if n <= d:
        raise BaselineError(f"LDA needs more rows than features ({n} <= {d})")
    means = np.stack([X[m0].mean(axis=0), X[m1].mean(axis=0)])
    scatter = np.zeros((d, d))
    for c, mask in enumerate((m0, m1)):
        Z = X[mask] - means[c]
        scatter += Z.T @ Z
    cov = scatter / (n - 2) if n > 2 else scatter
    cov = cov + shrinkage * np.trace(cov) / d * np.eye(d)
    try:
        if np.linalg.cond(cov) > 1e14:
            raise np.linalg.LinAlgError
        inv = np.linalg.inv(cov)
    except np.linalg.LinAlgError:
        raise BaselineError("pooled covariance is not invertible after regularization") from None
    inv = (inv + inv.T) / 2.0
    priors = np.array([m0.sum(), m1.sum()], dtype=np.float64) / n
    return LdaModel(means, inv, np.log(priors))


def score_lda(model: LdaModel, rows) -> np.ndarray:
    """Discriminant difference delta_1(x) - delta_0(x); positive means class 1."""
    X = _rows(rows, model.class_means.shape[1])
    A = model.pooled_covariance_inverse
    out = np.zeros(X.shape[0])
    for c, sign in ((1, 1.0), (0, -1.0)):
        mu = model.class_means[c]
        a = A @ mu
        out += sign * (X @ a - 0.5 * mu @ a + model.log_priors[c])
    return out


def fit_predict_lda(train: Dataset, rows, shrinkage: float = LDA_SHRINKAGE):
    s = score_lda(fit_lda(train, shrinkage), rows)
    return s, (s > 0).astype(np.int64)


@dataclass(frozen=True, eq=False)
class GnbModel:
    means: np.ndarray  # (2, d)
    variances: np.ndarray  # (2, d), floored
    log_priors: np.ndarray


def fit_gnb(train: Dataset, var_smoothing: float = GNB_VAR_SMOOTHING) -> GnbModel:
    m0, m1 = _two_classes(train)
    X = train.features
    floor = var_smoothing * float(X.var(axis=0).max()) if X.shape[1] else 0.0
    if floor <= 0:
        # every column constant; any positive floor keeps the densities finite
        floor = var_smoothing
    means = np.stack([X[m0].mean(axis=0), X[m1].mean(axis=0)])
    variances = np.stack([X[m0].var(axis=0), X[m1].var(axis=0)]) + floor
    priors = np.array([m0.sum(), m1.sum()], dtype=np.float64) / X.shape[0]
    return GnbModel(means, variances, np.log(priors))


def score_gnb(model: GnbModel, rows) -> np.ndarray:
    """Log-posterior difference, class 1 minus class 0."""
    X = _rows(rows, model.means.shape[1])
    ll = []
    for c in (0, 1):
        var = model.variances[c]
        z = (X - model.means[c]) ** 2 / var
        ll.append(-0.5 * np.sum(np.log(2.0 * np.pi * var)) - 0.5 * z.sum(axis=1) + model.log_priors[c])
    return ll[1] - ll[0]


def fit_predict_gnb(train: Dataset, rows, var_smoothing: float = GNB_VAR_SMOOTHING):
    s = score_gnb(fit_gnb(train, var_smoothing), rows)
    return s, (s > 0).astype(np.int64)


@dataclass(frozen=True, eq=False)
class KnnModel:
    features: np.ndarray
    labels: np.ndarray
    k: int


def fit_knn(train: Dataset, k: int = KNN_K) -> KnnModel:
    if not 1 <= k <= train.n_rows:
        raise BaselineError(f"k must lie in [1, {train.n_rows}], got {k}")
    return KnnModel(train.features, train.labels, k)


def _squared_distances(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    # accumulate per column in a fixed order so equal distances compare equal
    D = np.zeros((A.shape[0], X.shape[0]))
    for f in range(X.shape[1]):
        diff = A[:, f, None] - X[None, :, f]
        D += diff * diff
    return D


def predict_knn(model: KnnModel, rows):
    """Class-1 fraction among the k nearest rows (Euclidean).

    Distance ties go to the lower training index; an even vote split goes
    to the label of the single nearest neighbour.
    """
    X = model.features
    Q = _rows(rows, X.shape[1])
    k = model.k
    n = X.shape[0]
    scores = np.empty(Q.shape[0])
    labels = np.empty(Q.shape[0], dtype=np.int64)
    for start in range(0, Q.shape[0], _KNN_BLOCK):
        block = Q[start:start + _KNN_BLOCK]
        D = _squared_distances(block, X)
        if k < n:
            kth = np.partition(D, k - 1, axis=1)[:, k - 1]
        else:
            kth = D.max(axis=1)
        for i in range(D.shape[0]):
            d = D[i]
            inside = np.flatnonzero(d <= kth[i])
            if len(inside) > k:
                # stable sort by distance keeps lower indices first among ties
                inside = inside[np.argsort(d[inside], kind="stable")][:k]
            votes = model.labels[inside]
            ones = int(votes.sum())
            scores[start + i] = ones / k
            if 2 * ones == k:
                nearest = inside[np.lexsort((inside, d[inside]))[0]]
                labels[start + i] = model.labels[nearest]
            else:
                labels[start + i] = int(2 * ones > k)
    return scores, labels


def fit_predict_dt(train: Dataset, rows, config: TreeConfig = DT_CONFIG):
    tree = fit_classification_tree(train.features, train.labels, config)
    s = predict_tree_batch(tree, _rows(rows, train.n_features))
    return s, (s >= 0.5).astype(np.int64)


class Classifier:
    """Shared contract used by the comparison runner."""

    name = ""
    # True when predict() scores are log-odds rather than probabilities
    log_odds = False

    def fit(self, train: Dataset) -> "Classifier":
        raise NotImplementedError

    def predict(self, rows) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def probabilities(self, scores: np.ndarray) -> np.ndarray:
        return sigmoid(scores) if self.log_odds else np.asarray(scores, dtype=np.float64)


class LdaClassifier(Classifier):
    name = "LDA"
    log_odds = True

    def __init__(self, shrinkage: float = LDA_SHRINKAGE):
        self.shrinkage = shrinkage

    def fit(self, train):
        self.model = fit_lda(train, self.shrinkage)
        return self

    def predict(self, rows):
        s = score_lda(self.model, rows)
        return s, (s > 0).astype(np.int64)


class KnnClassifier(Classifier):
    name = "KNN"

    def __init__(self, k: int = KNN_K):
        self.k = k

    def fit(self, train):
        self.model = fit_knn(train, self.k)
        return self

    def predict(self, rows):
        return predict_knn(self.model, rows)


class TreeClassifier(Classifier):
    name = "DT"

    def __init__(self, config: TreeConfig = DT_CONFIG):
        self.config = config

    def fit(self, train):
        self.tree = fit_classification_tree(train.features, train.labels, self.config)
        self.width = train.n_features
        return self

    def predict(self, rows):
        s = predict_tree_batch(self.tree, _rows(rows, self.width))
        return s, (s >= 0.5).astype(np.int64)


class GnbClassifier(Classifier):
    name = "NB"
    log_odds = True

    def __init__(self, var_smoothing: float = GNB_VAR_SMOOTHING):
        self.var_smoothing = var_smoothing

    def fit(self, train):
        self.model = fit_gnb(train, self.var_smoothing)
        return self

    def predict(self, rows):
        s = score_gnb(self.model, rows)
        return s, (s > 0).astype(np.int64)
