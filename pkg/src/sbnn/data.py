"""CSV ingestion, encoding, standardization and seeded splits."""

import csv
import hashlib
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, IngestionError

log = logging.getLogger(__name__)

INSURANCE_HEADER = ("age", "sex", "bmi", "children", "smoker", "region", "charges")
CATEGORIES = {
    "sex": {"female": 0.0, "male": 1.0},
    "smoker": {"no": 0.0, "yes": 1.0},
    "region": {"northeast": 0.0, "northwest": 1.0, "southeast": 2.0, "southwest": 3.0},
}
REGIONS = ("northeast", "northwest", "southeast", "southwest")

TEST_FRACTION = 0.20
VAL_FRACTION = 0.16


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    feature_names: list

    @property
    def n(self):
        return self.x.shape[0]

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return self.x[idx], self.y[idx]


def _read_rows(path):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc.strerror or exc}") from exc
    with fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    header = [c.strip() for c in rows[0]]
    if len(rows) == 1:
        raise IngestionError(f"{path}: no data rows")
    return header, rows[1:]


def _parse_float(token, lineno, column):
    try:
        value = float(token)
    except ValueError:
        raise IngestionError(f"row {lineno}, column {column!r}: non-numeric value {token!r}") from None
    if not math.isfinite(value):
        raise IngestionError(f"row {lineno}, column {column!r}: non-finite value {token!r}")
    return value


def load_csv(path, target_column="charges", one_hot_region=False):
    """Load the insurance CSV, or any all-numeric CSV with a named target column.

    The insurance layout (``age,sex,bmi,children,smoker,region,charges``)
    is recognised by its header: sex, smoker and region are label-encoded
    (region one-hot when `one_hot_region`). Any other header must be fully
    numeric. Row numbers in errors count the header as row 1.
    """
    header, rows = _read_rows(path)
    if set(header) & set(CATEGORIES):
        if tuple(header) != INSURANCE_HEADER:
            raise IngestionError(
                f"{path}: expected header {','.join(INSURANCE_HEADER)}, found {','.join(header)}"
            )
        return _encode_insurance(header, rows, one_hot_region, target_column)
    if target_column not in header:
        raise IngestionError(f"{path}: target column {target_column!r} not in header {','.join(header)}")
    t = header.index(target_column)
    names = [h for i, h in enumerate(header) if i != t]
    xs, ys = [], []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise IngestionError(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
        vals = [_parse_float(tok.strip(), lineno, header[i]) for i, tok in enumerate(row)]
        ys.append(vals[t])
        xs.append([v for i, v in enumerate(vals) if i != t])
    return Dataset(np.array(xs, dtype=np.float64), np.array(ys, dtype=np.float64).reshape(-1, 1), names)


def _encode_insurance(header, rows, one_hot_region, target_column):
    if target_column != "charges":
        raise IngestionError(f"the insurance layout has target 'charges', not {target_column!r}")
    xs, ys = [], []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            missing = header[len(row)] if len(row) < len(header) else None
            msg = f"row {lineno}: expected {len(header)} fields, got {len(row)}"
            raise IngestionError(msg + (f" (missing {missing!r})" if missing else ""))
        rec = {}
        for col, tok in zip(header, row):
            tok = tok.strip()
            if tok == "":
                raise IngestionError(f"row {lineno}, column {col!r}: missing value")
            if col in CATEGORIES:
                table = CATEGORIES[col]
                if tok.lower() not in table:
                    raise IngestionError(f"row {lineno}, column {col!r}: unknown category {tok!r}")
                rec[col] = table[tok.lower()]
            else:
                rec[col] = _parse_float(tok, lineno, col)
        feats = [rec["age"], rec["sex"], rec["bmi"], rec["children"], rec["smoker"]]
        if one_hot_region:
            feats += [1.0 if rec["region"] == i else 0.0 for i in range(len(REGIONS))]
        else:
            feats.append(rec["region"])
        xs.append(feats)
        ys.append(rec["charges"])
    names = ["age", "sex", "bmi", "children", "smoker"]
    names += [f"region_{r}" for r in REGIONS] if one_hot_region else ["region"]
    return Dataset(np.array(xs, dtype=np.float64), np.array(ys, dtype=np.float64).reshape(-1, 1), names)


# --------------------------------------------------------------------------


@dataclass
class SplitIndices:
    train_a: np.ndarray
    train_b: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int

    @property
    def train(self):
        return np.concatenate([self.train_a, self.train_b])


def _round_half_up(v):
    return int(math.floor(v + 0.5))


def split_sizes(n):
    """Return ``(test, val, a, b)`` sizes for `n` rows."""
    n_test = _round_half_up(TEST_FRACTION * n)
    n_val = _round_half_up(VAL_FRACTION * n)
    n_train = n - n_test - n_val
    return n_test, n_val, (n_train + 1) // 2, n_train // 2


def split(n, seed):
    """Seeded test / validation / A / B partition of ``range(n)``.

    A permutation is cut into test and validation blocks; the remaining
    training rows are dealt alternately to A and B, so A holds the extra
    row when the count is odd.
    """
    if n < 4:
        raise ConfigurationError(f"need at least 4 rows to split, got {n}")
    n_test, n_val, _, _ = split_sizes(n)
    perm = np.random.default_rng(seed).permutation(n)
    test = perm[:n_test]
    val = perm[n_test:n_test + n_val]
    train = perm[n_test + n_val:]
    return SplitIndices(train_a=train[0::2], train_b=train[1::2], val=val, test=test, seed=seed)


# --------------------------------------------------------------------------


def fingerprint(indices):
    return hashlib.sha256(np.sort(np.asarray(indices, dtype=np.int64)).tobytes()).hexdigest()[:16]


@dataclass
class Scaler:
    feature_means: np.ndarray
    feature_stds: np.ndarray
    target_mean: float
    target_std: float
    fitted_on: str = ""

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.feature_means) / self.feature_stds

    def transform_target(self, y):
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def invert_target(self, y):
        return np.asarray(y, dtype=np.float64) * self.target_std + self.target_mean

    def apply(self, dataset, idx):
        x, y = dataset.take(idx)
        return self.transform(x), self.transform_target(y)

    def to_dict(self):
        return {
            "feature_means": [float(v) for v in self.feature_means],
            "feature_stds": [float(v) for v in self.feature_stds],
            "target_mean": float(self.target_mean),
            "target_std": float(self.target_std),
            "fitted_on": self.fitted_on,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            np.array(doc["feature_means"], dtype=np.float64),
            np.array(doc["feature_stds"], dtype=np.float64),
            float(doc["target_mean"]),
            float(doc["target_std"]),
            doc.get("fitted_on", ""),
        )

    @classmethod
    def identity(cls, d):
        return cls(np.zeros(d), np.ones(d), 0.0, 1.0, "identity")


def fit_scaler(dataset, train_indices):
    """Z-score statistics from the given training rows only.

    Constant columns get a unit standard deviation (with a warning) so they
    map to zero.
    """
    idx = np.asarray(train_indices, dtype=np.intp)
    if idx.size == 0:
        raise ConfigurationError("cannot fit a scaler on zero rows")
    x, y = dataset.take(idx)
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    for j in np.flatnonzero(stds == 0):
        log.warning("feature %r is constant on the training rows; using std 1", dataset.feature_names[j])
    stds[stds == 0] = 1.0
    t_std = float(y.std())
    if t_std == 0:
        log.warning("target is constant on the training rows; using std 1")
        t_std = 1.0
    return Scaler(means, stds, float(y.mean()), t_std, fingerprint(idx))
