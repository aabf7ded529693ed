import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbnn.data import Scaler, fingerprint, fit_scaler, load_csv, split, split_sizes
from sbnn.errors import ConfigurationError, IngestionError


def test_first_row_encoding(head_csv):
    ds = load_csv(head_csv)
    np.testing.assert_array_equal(ds.x[0], [19, 0, 27.9, 0, 1, 3])
    assert ds.y[0, 0] == 16884.924
    assert ds.feature_names == ["age", "sex", "bmi", "children", "smoker", "region"]
    assert ds.n == 10 and ds.x.shape == (10, 6)
    # row order preserved
    np.testing.assert_array_equal(ds.x[1], [18, 1, 33.77, 1, 0, 2])
    assert ds.y[-1, 0] == 28923.13692


def test_one_hot_region(head_csv):
    ds = load_csv(head_csv, one_hot_region=True)
    assert ds.x.shape == (10, 9)
    np.testing.assert_array_equal(ds.x[0], [19, 0, 27.9, 0, 1, 0, 0, 0, 1])
    assert ds.feature_names[-1] == "region_southwest"


def test_header_mismatch(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("age,sex,bmi,children,smoker,charges\n19,female,27.9,0,yes,1.0\n")
    with pytest.raises(IngestionError, match="expected header age,sex,bmi,children,smoker,region,charges, found"):
        load_csv(p)


def test_empty_file(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(IngestionError, match="no data rows"):
        load_csv(p)
    p.write_text("age,sex,bmi,children,smoker,region,charges\n")
    with pytest.raises(IngestionError, match="no data rows"):
        load_csv(p)


def test_missing_file(tmp_path):
    with pytest.raises(IngestionError, match="cannot open"):
        load_csv(tmp_path / "nope.csv")


@pytest.mark.parametrize("row, match", [
    ("19,female,27.9,0,maybe,southwest,1.0", "row 3, column 'smoker': unknown category"),
    ("19,female,27.9,0,yes,midwest,1.0", "row 3, column 'region': unknown category"),
    ("19,female,abc,0,yes,southwest,1.0", "row 3, column 'bmi': non-numeric"),
    ("19,female,27.9,0,yes,southwest", "row 3: expected 7 fields, got 6 \\(missing 'charges'\\)"),
    ("19,female,,0,yes,southwest,1.0", "row 3, column 'bmi': missing value"),
])
def test_bad_rows(tmp_path, row, match):
    p = tmp_path / "bad.csv"
    p.write_text("age,sex,bmi,children,smoker,region,charges\n18,male,33.77,1,no,southeast,1725.5523\n" + row + "\n")
    with pytest.raises(IngestionError, match=match):
        load_csv(p)


def test_generic_numeric_csv(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("a,target,b\n1,2,3\n4,5,6\n")
    ds = load_csv(p, target_column="target")
    np.testing.assert_array_equal(ds.x, [[1, 3], [4, 6]])
    np.testing.assert_array_equal(ds.y, [[2], [5]])
    assert ds.feature_names == ["a", "b"]
    with pytest.raises(IngestionError, match="target column 'charges'"):
        load_csv(p)


def test_split_sizes_canonical():
    assert split_sizes(1338) == (268, 214, 428, 428)
    assert split_sizes(10) == (2, 2, 3, 3)


def test_split_canonical_counts():
    s = split(1338, seed=0)
    assert (len(s.test), len(s.val), len(s.train_a), len(s.train_b)) == (268, 214, 428, 428)


def test_split_ten_rows():
    s = split(10, seed=4)
    assert (len(s.test), len(s.val), len(s.train_a), len(s.train_b)) == (2, 2, 3, 3)
    assert sorted(np.concatenate([s.test, s.val, s.train_a, s.train_b])) == list(range(10))


def test_split_deterministic():
    s1, s2 = split(100, 3), split(100, 3)
    for name in ("train_a", "train_b", "val", "test"):
        np.testing.assert_array_equal(getattr(s1, name), getattr(s2, name))
    assert not np.array_equal(split(100, 4).test, s1.test)


def test_split_too_small():
    with pytest.raises(ConfigurationError):
        split(3, 0)


@settings(max_examples=200)
@given(n=st.integers(4, 3000), seed=st.integers(0, 2**32 - 1))
def test_split_disjoint_exhaustive(n, seed):
    s = split(n, seed)
    parts = [s.test, s.val, s.train_a, s.train_b]
    allidx = np.concatenate(parts)
    assert len(allidx) == n and len(np.unique(allidx)) == n
    assert len(s.test) == int(np.floor(0.2 * n + 0.5))
    assert len(s.val) == int(np.floor(0.16 * n + 0.5))
    assert 0 <= len(s.train_a) - len(s.train_b) <= 1
    assert all(len(p) > 0 for p in parts)


def test_scaler_round_trip_and_centering(head_csv):
    ds = load_csv(head_csv)
    idx = np.arange(6)
    sc = fit_scaler(ds, idx)
    x, y = sc.apply(ds, idx)
    assert abs(np.mean(y)) <= 1e-12
    np.testing.assert_allclose(np.mean(x, axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(sc.invert_target(sc.transform_target(ds.y)), ds.y, rtol=1e-12, atol=1e-12)


def test_scaler_constant_column(head_csv, caplog):
    ds = load_csv(head_csv)
    idx = [1, 2, 4]  # all male, non-smokers
    with caplog.at_level(logging.WARNING):
        sc = fit_scaler(ds, idx)
    assert sc.feature_stds[1] == 1.0
    x, _ = sc.apply(ds, idx)
    np.testing.assert_array_equal(x[:, 1], 0.0)
    assert "constant" in caplog.text


def test_scaler_only_sees_training_rows():
    ds_x = np.arange(40.0).reshape(20, 2)
    from sbnn.data import Dataset

    ds = Dataset(ds_x, np.arange(20.0).reshape(-1, 1), ["a", "b"])
    s = split(20, 1)
    sc = fit_scaler(ds, s.train)
    assert sc.fitted_on == fingerprint(s.train)
    assert sc.fitted_on != fingerprint(np.concatenate([s.train, s.val]))
    assert sc.target_mean == pytest.approx(np.mean(ds.y[s.train]))


def test_scaler_empty():
    from sbnn.data import Dataset

    with pytest.raises(ConfigurationError):
        fit_scaler(Dataset(np.ones((3, 1)), np.ones((3, 1)), ["a"]), [])


def test_scaler_dict_round_trip(rng):
    sc = Scaler(rng.random(3), rng.random(3) + 1, 1.5, 2.5, "x")
    back = Scaler.from_dict(sc.to_dict())
    assert back.feature_means.tobytes() == sc.feature_means.tobytes()
    assert (back.target_mean, back.target_std, back.fitted_on) == (1.5, 2.5, "x")
