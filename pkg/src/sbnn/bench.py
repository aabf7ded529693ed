"""Experiment harness: hyperparameter sweeps, timing and Monte Carlo comparison."""

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .baseline import BaselineConfig, retrain_baseline, train_baseline
from .data import Scaler, fit_scaler, split
from .errors import ConfigurationError, TrainingError
from .model import mse_cost, predict
from .splitboost import TrainConfig, retrain, train

log = logging.getLogger(__name__)

DEFAULT_GAMMA_GRID = (0.001, 0.005, 0.01, 0.05, 0.1, 0.5)
DEFAULT_LAMBDA_GRID = (0.0001, 0.001, 0.01, 0.1, 1.0)
TRAINERS = ("splitboost", "baseline")


@dataclass
class Partitions:
    a: tuple
    b: tuple
    val: tuple
    test: tuple
    scaler: object

    @property
    def train(self):
        return np.vstack([self.a[0], self.b[0]]), np.vstack([self.a[1], self.b[1]])


def prepare(dataset, seed, standardize=True):
    """Split `dataset` with `seed` and scale every part with statistics of A and B."""
    idx = split(dataset.n, seed)
    if standardize:
        scaler = fit_scaler(dataset, idx.train)
    else:
        scaler = Scaler.identity(dataset.x.shape[1])
    return Partitions(
        a=scaler.apply(dataset, idx.train_a),
        b=scaler.apply(dataset, idx.train_b),
        val=scaler.apply(dataset, idx.val),
        test=scaler.apply(dataset, idx.test),
        scaler=scaler,
    )


def steady_mean(times):
    """Mean epoch time, ignoring the first (warm-up) epoch when there is more than one."""
    times = list(times)
    if not times:
        return math.nan
    return float(np.mean(times[1:] if len(times) > 1 else times))


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepSpec:
    parameter: str
    values: list
    trainer: str = "splitboost"
    base_config: object = None

    def __post_init__(self):
        if self.parameter not in ("gamma", "lambda"):
            raise ConfigurationError(f"unknown sweep parameter {self.parameter!r}")
        if self.trainer not in TRAINERS:
            raise ConfigurationError(f"unknown trainer {self.trainer!r}")
        if self.parameter == "lambda" and self.trainer == "splitboost":
            raise ConfigurationError("split-boost has no regularization parameter to sweep")
        self.values = [float(v) for v in self.values]
        if not self.values or any(not v > 0 for v in self.values):
            raise ConfigurationError("sweep values must be a non-empty list of positive numbers")
        if self.base_config is None:
            self.base_config = TrainConfig() if self.trainer == "splitboost" else BaselineConfig()


@dataclass
class SweepResult:
    spec: SweepSpec
    values: list
    final_j_val: list
    argmin: int

    @property
    def best_value(self):
        return self.values[self.argmin]

    def write_csv(self, path_or_file):
        _write_rows(path_or_file, ["value", "final_j_val"],
                    [[repr(v), repr(c)] for v, c in zip(self.values, self.final_j_val)])


def _write_rows(path_or_file, header, rows):
    if hasattr(path_or_file, "write"):
        writer = csv.writer(path_or_file)
        writer.writerow(header)
        writer.writerows(rows)
        return
    with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
        _write_rows(fh, header, rows)


def sweep_argmin(values, costs):
    """Index of the smallest finite cost; ties go to the smaller parameter value."""
    best = None
    for i, (v, c) in enumerate(zip(values, costs)):
        if not math.isfinite(c):
            continue
        if best is None or c < costs[best] or (c == costs[best] and v < values[best]):
            best = i
    if best is None:
        raise TrainingError("every sweep value diverged", epoch=0)
    return best


def run_sweep(spec, dataset, seed=None, standardize=True):
    """Train once per candidate value on a fixed split; report the last validation cost."""
    cfg = spec.base_config
    seed = cfg.seed if seed is None else seed
    parts = prepare(dataset, seed, standardize)
    costs = []
    for value in spec.values:
        try:
            if spec.trainer == "splitboost":
                res = train(replace(cfg, gamma_star=value, seed=seed), parts.a, parts.b, parts.val)
            else:
                key = "gamma" if spec.parameter == "gamma" else "lam"
                res = train_baseline(replace(cfg, seed=seed, **{key: value}), parts.train, parts.val)
            costs.append(float(res.history[-1].j_val))
        except TrainingError as exc:
            log.warning("sweep value %g diverged at epoch %d", value, exc.epoch)
            costs.append(math.nan)
    return SweepResult(spec, list(spec.values), costs, sweep_argmin(spec.values, costs))


# --------------------------------------------------------------------------
# timing


def measure_epoch_time(trainer, dataset, epochs, config=None, seed=0, standardize=True):
    """Run `epochs` epochs without early stopping; return ``(steady mean, per-epoch times)``."""
    if epochs < 1:
        raise ConfigurationError("epochs must be at least 1")
    parts = prepare(dataset, seed, standardize)
    if trainer == "splitboost":
        cfg = replace(config or TrainConfig(), max_epochs=epochs, seed=seed)
        res = train(cfg, parts.a, parts.b, parts.val, early_stopping=False)
    elif trainer == "baseline":
        cfg = replace(config or BaselineConfig(), max_epochs=epochs, seed=seed)
        res = train_baseline(cfg, parts.train, parts.val, early_stopping=False)
    else:
        raise ConfigurationError(f"unknown trainer {trainer!r}")
    per_epoch = [rec.wall_time_s for rec in res.history]
    return steady_mean(per_epoch), per_epoch


# --------------------------------------------------------------------------
# Monte Carlo


@dataclass
class SeedOutcome:
    seed: int
    sb_test_cost: float
    ff_test_cost: float
    sb_best_epoch: int
    ff_best_epoch: int
    sb_epoch_time_s: float
    ff_epoch_time_s: float

    @property
    def diverged(self):
        return not (math.isfinite(self.sb_test_cost) and math.isfinite(self.ff_test_cost))


def _test_cost(params, test):
    return mse_cost(predict(params, test[0]), test[1])


def run_arms(seed, config_sb, config_ff, dataset, standardize=True):
    """Train, early-stop, retrain and test both arms on the split drawn with `seed`."""
    parts = prepare(dataset, seed, standardize)
    sb_cfg = replace(config_sb, seed=seed)
    ff_cfg = replace(config_ff, seed=seed)

    sb_cost = ff_cost = math.nan
    sb_epoch = ff_epoch = 0
    sb_time = ff_time = math.nan
    try:
        first = train(sb_cfg, parts.a, parts.b, parts.val)
        sb_epoch, sb_time = first.best_epoch, steady_mean(r.wall_time_s for r in first.history)
        final = retrain(sb_cfg, parts.a, parts.b, parts.val, first.best_epoch)
        sb_cost = _test_cost(final.params, parts.test)
    except TrainingError as exc:
        log.warning("seed %d: split-boost diverged at epoch %d", seed, exc.epoch)
    try:
        first = train_baseline(ff_cfg, parts.train, parts.val)
        ff_epoch, ff_time = first.best_epoch, steady_mean(r.wall_time_s for r in first.history)
        final = retrain_baseline(ff_cfg, parts.train, parts.val, first.best_epoch)
        ff_cost = _test_cost(final.params, parts.test)
    except TrainingError as exc:
        log.warning("seed %d: baseline diverged at epoch %d", seed, exc.epoch)
    return SeedOutcome(seed, sb_cost, ff_cost, sb_epoch, ff_epoch, sb_time, ff_time)


def _quartiles(values):
    values = [v for v in values if math.isfinite(v)]
    if not values:
        return None
    q = np.percentile(values, [0, 25, 50, 75, 100])
    return dict(zip(("min", "q1", "median", "q3", "max"), (float(v) for v in q)))


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclass
class BenchmarkReport:
    seeds: list
    sb_test_costs: list
    ff_test_costs: list
    sb_best_epochs: list
    ff_best_epochs: list
    win_rate: float
    sb_epoch_time_s: float
    ff_epoch_time_s: float
    diverged_seeds: list = field(default_factory=list)
    sb_quartiles: dict = None
    ff_quartiles: dict = None

    @property
    def time_ratio(self):
        return self.sb_epoch_time_s / self.ff_epoch_time_s

    @property
    def sb_total_time_s(self):
        return float(np.mean(self.sb_best_epochs)) * self.sb_epoch_time_s

    @property
    def ff_total_time_s(self):
        return float(np.mean(self.ff_best_epochs)) * self.ff_epoch_time_s

    def to_dict(self):
        doc = asdict(self)
        doc["n_seeds"] = len(self.seeds)
        doc["epoch_time_ratio"] = self.time_ratio
        doc["sb_total_time_s"] = self.sb_total_time_s
        doc["ff_total_time_s"] = self.ff_total_time_s
        return _jsonable(doc)

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_csv(self, path_or_file):
        rows = [
            [s, repr(a), repr(b), ea, eb]
            for s, a, b, ea, eb in zip(self.seeds, self.sb_test_costs, self.ff_test_costs,
                                       self.sb_best_epochs, self.ff_best_epochs)
        ]
        _write_rows(path_or_file, ["seed", "sb_test_cost", "ff_test_cost", "sb_best_epoch", "ff_best_epoch"], rows)


def win_rate(sb_costs, ff_costs):
    """Fraction of finite pairs where split-boost is strictly lower."""
    pairs = [(a, b) for a, b in zip(sb_costs, ff_costs) if math.isfinite(a) and math.isfinite(b)]
    if not pairs:
        return math.nan
    return sum(a < b for a, b in pairs) / len(pairs)


def run_monte_carlo(n_seeds, config_sb, config_ff, dataset, workers=1, standardize=True, arm_runner=run_arms):
    """Paired comparison over seeds ``0 .. n_seeds-1``.

    Seed ``i`` drives the split and both initializations. Seeds where either
    arm diverged are listed in ``diverged_seeds`` and left out of the win
    rate.
    """
    if n_seeds < 1:
        raise ConfigurationError("n_seeds must be at least 1")
    seeds = list(range(n_seeds))
    args = [(s, config_sb, config_ff, dataset, standardize) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(arm_runner, *zip(*args)))
    else:
        outcomes = [arm_runner(*a) for a in args]

    diverged = [o.seed for o in outcomes if o.diverged]
    if diverged:
        log.warning("%d seed(s) diverged and are excluded from the win rate: %s", len(diverged), diverged)
    sb = [o.sb_test_cost for o in outcomes]
    ff = [o.ff_test_cost for o in outcomes]
    sb_t = [o.sb_epoch_time_s for o in outcomes if math.isfinite(o.sb_epoch_time_s)]
    ff_t = [o.ff_epoch_time_s for o in outcomes if math.isfinite(o.ff_epoch_time_s)]
    return BenchmarkReport(
        seeds=seeds,
        sb_test_costs=sb,
        ff_test_costs=ff,
        sb_best_epochs=[o.sb_best_epoch for o in outcomes],
        ff_best_epochs=[o.ff_best_epoch for o in outcomes],
        win_rate=win_rate(sb, ff),
        sb_epoch_time_s=float(np.mean(sb_t)) if sb_t else math.nan,
        ff_epoch_time_s=float(np.mean(ff_t)) if ff_t else math.nan,
        diverged_seeds=diverged,
        sb_quartiles=_quartiles(sb),
        ff_quartiles=_quartiles(ff),
    )

