import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfegb._random import SplitMix64, permutation
from rfegb.dataset import (
    FEATURES,
    DataError,
    Dataset,
    ScalingParams,
    apply_scaling,
    fit_scaling,
    impute_mode,
    kfold,
    load_csv,
    read_csv,
    train_test_split,
    write_csv,
)

KAGGLE_HEADER = "id;age;gender;height;weight;ap_hi;ap_lo;cholesterol;gluc;smoke;alco;active;cardio"


@pytest.fixture
def write(tmp_path):
    def _write(text, name="data.csv"):
        p = tmp_path / name
        p.write_text(text)
        return p

    return _write


def test_kaggle_row_converts_age_to_years(write):
    p = write(KAGGLE_HEADER + "\n0;18393;2;168;62;110;80;1;1;0;0;1;0\n")
    d = load_csv(p, age_unit="days")
    assert d.feature_names == FEATURES
    row = dict(zip(d.feature_names, d.features[0]))
    assert row["age"] == 50.0
    assert (row["height"], row["weight"], row["ap_hi"]) == (168.0, 62.0, 110.0)
    assert d.labels.tolist() == [0]


def test_auto_age_policy_uses_median(write):
    days = write(KAGGLE_HEADER + "\n0;18393;2;168;62;110;80;1;1;0;0;1;0\n1;20228;1;156;85;140;90;3;1;0;0;1;1\n")
    assert load_csv(days).features[:, 0].tolist() == [50.0, 55.0]
    years = write(KAGGLE_HEADER + "\n0;50;2;168;62;110;80;1;1;0;0;1;0\n", "y.csv")
    assert load_csv(years).features[0, 0] == 50.0
    assert load_csv(years, age_unit="days").features[0, 0] == 0.0


def test_header_matching_is_by_name_and_case_insensitive(write):
    p = write(
        "CARDIO,Active,alco,smoke,gluc,cholesterol,ap_lo,ap_hi,weight,height,gender,age\n"
        "1,1,0,0,1,3,90,140,85,156,1,55\n"
    )
    d = load_csv(p, delimiter=",")
    assert d.features[0].tolist() == [55, 1, 156, 85, 140, 90, 3, 1, 0, 0, 1]
    assert d.labels.tolist() == [1]


def test_empty_file_and_header_only(write):
    with pytest.raises(DataError, match="empty dataset"):
        load_csv(write(""))
    with pytest.raises(DataError, match="empty dataset"):
        load_csv(write(KAGGLE_HEADER + "\n", "h.csv"))


def test_non_binary_target(write):
    p = write(KAGGLE_HEADER + "\n0;18393;2;168;62;110;80;1;1;0;0;1;2\n")
    with pytest.raises(DataError, match="non-binary target"):
        load_csv(p)


@pytest.mark.parametrize(
    "body, message",
    [
        ("0;18393;2;168;62;110;80;1;1;0;0;1\n", "line 2: expected 13 columns"),
        ("0;18393;2;abc;62;110;80;1;1;0;0;1;0\n", "line 2: non-numeric"),
        ("0;18393;2;168;62;110;80;1;1;0;0;1;\n", "missing target"),
    ],
)
def test_malformed_rows_name_the_line(write, body, message):
    with pytest.raises(DataError, match=message):
        load_csv(write(KAGGLE_HEADER + "\n" + body))


def test_missing_file_and_missing_target_column(tmp_path, write):
    with pytest.raises(DataError, match="file not found"):
        load_csv(tmp_path / "nope.csv")
    with pytest.raises(DataError, match="target column"):
        load_csv(write("age;gender\n1;2\n"))


def test_missing_cells_are_mode_imputed(write):
    rows = [
        "0;18393;2;168;62;110;80;1;1;0;0;1;0",
        "1;18393;1;;62;120;80;1;1;0;0;1;1",
        "2;18393;1;170;NA;120;80;1;1;0;0;1;1",
        "3;18393;1;170;70;120;80;1;1;0;0;;0",
    ]
    res = read_csv(write(KAGGLE_HEADER + "\n" + "\n".join(rows) + "\n"))
    assert res.n_imputed == 3
    X = res.dataset.features
    assert X[1, FEATURES.index("height")] == 170.0
    assert X[2, FEATURES.index("weight")] == 62.0  # tie 62/70 -> smaller
    assert X[3, FEATURES.index("active")] == 1.0


def test_plausibility_filter_is_opt_in(write):
    rows = ["0;18393;2;168;62;110;80;1;1;0;0;1;0", "1;18393;2;168;62;-150;80;1;1;0;0;1;1",
            "2;18393;2;168;62;16020;80;1;1;0;0;1;1"]
    p = write(KAGGLE_HEADER + "\n" + "\n".join(rows) + "\n")
    assert load_csv(p).n_rows == 3
    res = read_csv(p, plausibility_filter=True)
    assert res.dataset.n_rows == 1 and res.n_filtered == 2


def _mode_by_counting(values):
    counts = Counter(v for v in values if v is not None)
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


@pytest.mark.parametrize(
    "column, expected",
    [
        ([1, 2, 2, None], [1, 2, 2, 2]),
        ([5, None, 5], [5, 5, 5]),
        ([1, 1, 2, 2, None], [1, 1, 2, 2, 1]),
    ],
)
def test_impute_mode_examples(column, expected):
    assert impute_mode(column) == expected
    assert _mode_by_counting(column) == expected[column.index(None)]


def test_impute_mode_all_missing():
    with pytest.raises(DataError):
        impute_mode([None, float("nan")])


@given(st.lists(st.one_of(st.none(), st.integers(-3, 3)), min_size=1).filter(
    lambda c: any(v is not None for v in c)))
def test_impute_mode_keeps_observed_cells(column):
    out = impute_mode(column)
    mode = _mode_by_counting(column)
    for before, after in zip(column, out):
        assert after == (mode if before is None else before)


def test_fit_scaling_examples():
    d = Dataset(("a",), [[100], [150], [200]], [0, 1, 0])
    p = fit_scaling(d)
    assert (p.minimum.tolist(), p.maximum.tolist()) == ([100.0], [200.0])
    assert apply_scaling(d, p).features[:, 0].tolist() == [0.0, 0.5, 1.0]
    two = fit_scaling(Dataset(("a", "b"), [[0, 1], [10, 3]], [0, 1]))
    assert two.minimum.tolist() == [0, 1] and two.maximum.tolist() == [10, 3]


def test_constant_column_and_extrapolation():
    const = Dataset(("a",), [[7], [7]], [0, 1])
    p = fit_scaling(const)
    assert (p.minimum[0], p.maximum[0]) == (7, 7)
    assert apply_scaling(const, p).features[:, 0].tolist() == [0.0, 0.0]
    far = Dataset(("a",), [[250]], [0])
    assert apply_scaling(far, ScalingParams([100.0], [200.0])).features[0, 0] == 1.5


def test_scaling_width_mismatch():
    with pytest.raises(DataError):
        apply_scaling(Dataset(("a",), [[1]], [0]), ScalingParams([0.0, 0.0], [1.0, 1.0]))


@given(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3), min_size=1, max_size=30))
def test_training_view_scales_into_unit_interval(rows):
    d = Dataset(("a", "b", "c"), rows, [0] * len(rows))
    s = apply_scaling(d, fit_scaling(d)).features
    assert s.min() >= 0.0 and s.max() <= 1.0


@settings(max_examples=30)
@given(st.lists(st.lists(st.one_of(st.integers(-10**6, 10**6).map(float),
                                   st.floats(-1e6, 1e6, allow_nan=False)),
                         min_size=11, max_size=11), min_size=1, max_size=20),
       st.data())
def test_write_then_load_round_trips(tmp_path_factory, rows, data):
    labels = data.draw(st.lists(st.integers(0, 1), min_size=len(rows), max_size=len(rows)))
    d = Dataset(FEATURES, rows, labels)
    p = tmp_path_factory.mktemp("rt") / "clean.csv"
    write_csv(d, p)
    back = load_csv(p, delimiter=",", age_unit="years")
    again = tmp_path_factory.mktemp("rt") / "again.csv"
    write_csv(back, again)
    assert np.array_equal(back.features, d.features)
    assert np.array_equal(back.labels, d.labels)
    assert p.read_text() == again.read_text()


def test_dataset_invariants_and_immutability():
    with pytest.raises(DataError):
        Dataset(("a",), [[1], [2]], [0])
    with pytest.raises(DataError):
        Dataset(("a", "b"), [[1]], [0])
    with pytest.raises(DataError):
        Dataset(("a",), [[float("nan")]], [0])
    with pytest.raises(DataError, match="non-binary"):
        Dataset(("a",), [[1]], [3])
    d = Dataset(("a",), [[1.0]], [1])
    with pytest.raises(ValueError):
        d.features[0, 0] = 2.0


def test_splitmix64_reference_stream():
    rng = SplitMix64(0)
    assert rng.next_u64() == 0xE220A8397B1DCDAF
    assert rng.next_u64() == 0x6E789E6AA1B965F4


def test_permutation_is_deterministic_and_complete():
    p = permutation(50, 7)
    assert sorted(p) == list(range(50))
    assert p == permutation(50, 7)
    assert p != permutation(50, 8)


def test_train_test_split_examples():
    s = train_test_split(100, 0.7, seed=1)
    assert (len(s.train), len(s.test)) == (70, 30)
    small = train_test_split(2, 0.5, seed=3)
    assert len(small.train) == 1 and len(small.test) == 1
    assert train_test_split(100, 0.7, 5) == train_test_split(100, 0.7, 5)
    with pytest.raises(ValueError):
        train_test_split(10, 1.0, 0)
    with pytest.raises(ValueError):
        train_test_split(10, 0.0, 0)


def test_stratified_split_tracks_class_fractions():
    labels = [0] * 37 + [1] * 13
    s = train_test_split(50, 0.7, seed=11, stratify_labels=labels)
    assert len(s.train) == 35
    for c in (0, 1):
        members = [i for i in range(50) if labels[i] == c]
        frac = sum(labels[i] == c for i in s.train) / len(members)
        assert abs(frac - 0.7) <= 1 / len(members)


def test_kfold_examples():
    assert sorted(len(f) for f in kfold(10, 3, 0).folds) == [3, 3, 4]
    assert all(len(f) == 1 for f in kfold(10, 10, 0).folds)
    with pytest.raises(ValueError):
        kfold(5, 6, 0)
    with pytest.raises(ValueError):
        kfold(5, 1, 0)
    assert kfold(30, 4, 9).folds == kfold(30, 4, 9).folds


def test_stratified_kfold_balances_classes():
    labels = [1] * 20 + [0] * 80
    plan = kfold(100, 10, 4, stratify_labels=labels)
    assert all(sum(labels[i] for i in f) == 2 for f in plan.folds)
    part = plan.split(0)
    assert set(part.train).isdisjoint(part.test)
    assert sorted(part.train + part.test) == list(range(100))


def test_round_half_up_split_size():
    # 5 * 0.5 = 2.5 rounds up, not to even
    assert len(train_test_split(5, 0.5, 0).train) == 3
    assert math.floor(0.5 + 0.5) == 1
