"""Loading, cleaning, scaling and partitioning of the cardiovascular table."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from rfegb._random import permutation

FEATURES = (
    "age",
    "gender",
    "height",
    "weight",
    "ap_hi",
    "ap_lo",
    "cholesterol",
    "gluc",
    "smoke",
    "alco",
    "active",
)
TARGET = "cardio"
MISSING_TOKENS = frozenset({"", "NA"})
AGE_UNITS = ("days", "years", "auto")
DAYS_PER_YEAR = 365.25
# auto age policy: a median above this is taken to be in days
AUTO_DAYS_MEDIAN = 200.0
# bounds for the opt-in plausibility filter, inclusive upper / exclusive lower
PLAUSIBLE_BP = {"ap_hi": (0.0, 300.0), "ap_lo": (0.0, 300.0)}


class DataError(ValueError):
    """Raised for unreadable, malformed or invalid input data."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Named numeric feature matrix with a binary label vector.

    Arrays are copied and made read-only on construction.
    """

    feature_names: tuple[str, ...]
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError(
                f"label count {y.shape[0] if y.ndim == 1 else y.shape} "
                f"does not match row count {X.shape[0]}"
            )
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != X.shape[1]:
            raise DataError(
                f"{len(names)} feature names for {X.shape[1]} columns"
            )
        if np.isnan(X).any():
            raise DataError("features contain NaN")
        if y.size and not np.isin(y, (0, 1)).all():
            raise DataError("non-binary target")
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y.astype(np.int64)))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def rows(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.feature_names, self.features[idx], self.labels[idx])

    def columns(self, indices: Sequence[int]) -> "Dataset":
        idx = [int(i) for i in indices]
        return Dataset(
            tuple(self.feature_names[i] for i in idx),
            self.features[:, idx],
            self.labels,
        )


@dataclass(frozen=True)
class LoadResult:
    dataset: Dataset
    n_imputed: int
    n_filtered: int


def impute_mode(column: Sequence[Optional[float]]) -> list[float]:
    """Replace missing entries (None or NaN) with the most frequent value.

    Ties go to the smallest value.
    """
    present = [
        v for v in column if v is not None and not (isinstance(v, float) and math.isnan(v))
    ]
    if not present:
        raise DataError("cannot impute a column with no observed values")
    counts: dict[float, int] = {}
    for v in present:
        counts[v] = counts.get(v, 0) + 1
    top = max(counts.values())
    mode = min(v for v, c in counts.items() if c == top)
    return [
        mode if v is None or (isinstance(v, float) and math.isnan(v)) else v
        for v in column
    ]


def _parse_cell(text: str, line: int, name: str) -> Optional[float]:
    cell = text.strip()
    if cell in MISSING_TOKENS:
        return None
    try:
        value = float(cell)
    except ValueError:
        raise DataError(
            f"line {line}: non-numeric value {cell!r} in column {name!r}"
        ) from None
    if math.isnan(value):
        return None
    return value


def read_csv(
    path,
    delimiter: str = ";",
    age_unit: str = "auto",
    plausibility_filter: bool = False,
) -> LoadResult:
    """Read a cardiovascular CSV into canonical column order.

    Columns are matched by header name, case-insensitively; ``id`` and any
    other extra column are dropped.  Missing cells (empty or ``NA``) are
    mode-imputed before age conversion.
    """
    if age_unit not in AGE_UNITS:
        raise DataError(f"unknown age unit {age_unit!r}; expected one of {AGE_UNITS}")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise DataError("empty dataset")
        lookup = {h.strip().lower(): i for i, h in enumerate(header)}
        if TARGET not in lookup:
            raise DataError(f"target column {TARGET!r} missing from header")
        missing = [f for f in FEATURES if f not in lookup]
        if missing:
            raise DataError(f"feature columns missing from header: {', '.join(missing)}")
        positions = [lookup[f] for f in FEATURES]
        target_pos = lookup[TARGET]
        width = len(header)

        cols: list[list[Optional[float]]] = [[] for _ in FEATURES]
        labels: list[int] = []
        for line, record in enumerate(reader, start=2):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != width:
                raise DataError(
                    f"line {line}: expected {width} columns, got {len(record)}"
                )
            target = _parse_cell(record[target_pos], line, TARGET)
            if target is None:
                raise DataError(f"line {line}: missing target")
            if target not in (0.0, 1.0):
                raise DataError(f"line {line}: non-binary target {record[target_pos].strip()!r}")
            labels.append(int(target))
            for j, pos in enumerate(positions):
                cols[j].append(_parse_cell(record[pos], line, FEATURES[j]))

    if not labels:
        raise DataError("empty dataset")

    n_imputed = 0
    filled = []
    for j, col in enumerate(cols):
        gaps = sum(v is None for v in col)
        if gaps:
            try:
                col = impute_mode(col)
            except DataError:
                raise DataError(f"column {FEATURES[j]!r} has no observed values") from None
            n_imputed += gaps
        filled.append(col)
    X = np.array(filled, dtype=np.float64).T
    y = np.array(labels, dtype=np.int64)

    age = X[:, 0]
    if age_unit == "days" or (age_unit == "auto" and np.median(age) > AUTO_DAYS_MEDIAN):
        X[:, 0] = np.floor(age / DAYS_PER_YEAR)

    n_filtered = 0
    if plausibility_filter:
        keep = np.ones(len(y), dtype=bool)
        for name, (lo, hi) in PLAUSIBLE_BP.items():
            v = X[:, FEATURES.index(name)]
            keep &= (v > lo) & (v <= hi)
        n_filtered = int((~keep).sum())
        X, y = X[keep], y[keep]
        if not len(y):
            raise DataError("empty dataset")

    return LoadResult(Dataset(FEATURES, X, y), n_imputed, n_filtered)


def load_csv(path, delimiter: str = ";", age_unit: str = "auto",
             plausibility_filter: bool = False) -> Dataset:
    return read_csv(path, delimiter, age_unit, plausibility_filter).dataset


def write_csv(data: Dataset, path, delimiter: str = ",") -> None:
    """Write ``data`` with a header row; the label goes last as ``cardio``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(list(data.feature_names) + [TARGET])
        for row, label in zip(data.features, data.labels):
            writer.writerow([_fmt(v) for v in row] + [int(label)])


def _fmt(v: float) -> str:
    # integral values print without a trailing .0; others round-trip via repr
    if v.is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(float(v))


@dataclass(frozen=True, eq=False)
class ScalingParams:
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.minimum, dtype=np.float64)
        hi = np.asarray(self.maximum, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DataError("scaling bounds must be equal-length vectors")
        if (lo > hi).any():
            raise DataError("scaling minimum exceeds maximum")
        object.__setattr__(self, "minimum", _frozen(lo))
        object.__setattr__(self, "maximum", _frozen(hi))

    def to_dict(self) -> dict:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}


def fit_scaling(train: Dataset) -> ScalingParams:
    if train.n_rows == 0:
        raise DataError("cannot fit scaling on an empty dataset")
    return ScalingParams(train.features.min(axis=0), train.features.max(axis=0))


def apply_scaling(data: Dataset, params: ScalingParams) -> Dataset:
    """Min-max map each column; constant columns become 0.0, no clipping."""
    if data.n_features != params.minimum.shape[0]:
        raise DataError(
            f"dataset has {data.n_features} columns, scaling expects "
            f"{params.minimum.shape[0]}"
        )
    span = params.maximum - params.minimum
    safe = np.where(span > 0, span, 1.0)
    scaled = (data.features - params.minimum) / safe
    scaled[:, span == 0] = 0.0
    return Dataset(data.feature_names, scaled, data.labels)


@dataclass(frozen=True)
class SplitIndices:
    train: list[int]
    test: list[int]


@dataclass(frozen=True)
class FoldPlan:
    folds: list[list[int]]

    def split(self, i: int) -> SplitIndices:
        """Training part = every fold except ``i``; test part = fold ``i``."""
        train = sorted(j for f, fold in enumerate(self.folds) if f != i for j in fold)
        return SplitIndices(train, sorted(self.folds[i]))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def train_test_split(
    n: int,
    train_fraction: float,
    seed: int,
    stratify_labels: Optional[Sequence[int]] = None,
) -> SplitIndices:
    """Seeded holdout split with ``round(n * train_fraction)`` training rows.

    The training size is clamped to [1, n-1] so both parts are non-empty.
    With ``stratify_labels`` each class contributes floor or ceil of its
    proportional share (largest remainder, ties to the smaller class id).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    n_train = min(max(_round_half_up(n * train_fraction), 1), n - 1)
    perm = permutation(n, seed)

    if stratify_labels is None:
        train = perm[:n_train]
    else:
        labels = list(stratify_labels)
        if len(labels) != n:
            raise ValueError("stratify_labels length differs from n")
        classes = sorted(set(labels))
        members = {c: [i for i in perm if labels[i] == c] for c in classes}
        exact = {c: len(members[c]) * n_train / n for c in classes}
        take = {c: math.floor(exact[c]) for c in classes}
        short = n_train - sum(take.values())
        by_remainder = sorted(classes, key=lambda c: (-(exact[c] - take[c]), c))
        for c in by_remainder[:short]:
            take[c] += 1
        train = [i for c in classes for i in members[c][: take[c]]]

    chosen = set(train)
    return SplitIndices(sorted(train), [i for i in range(n) if i not in chosen])


def kfold(
    n: int,
    k: int,
    seed: int,
    stratify_labels: Optional[Sequence[int]] = None,
) -> FoldPlan:
    """Seeded k-fold partition; fold sizes differ by at most one.

    Rows are shuffled, grouped by class when stratifying, then dealt to
    folds round-robin.
    """
    if k < 2 or k > n:
        raise ValueError(f"fold count must satisfy 2 <= k <= n (k={k}, n={n})")
    perm = permutation(n, seed)
    if stratify_labels is not None:
        labels = list(stratify_labels)
        if len(labels) != n:
            raise ValueError("stratify_labels length differs from n")
        perm = [i for c in sorted(set(labels)) for i in perm if labels[i] == c]
    folds: list[list[int]] = [[] for _ in range(k)]
    for pos, i in enumerate(perm):
        folds[pos % k].append(i)
    return FoldPlan([sorted(f) for f in folds])
