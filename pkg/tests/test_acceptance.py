"""Acceptance criteria 1-9.

Each test records one ``criterion N: PASS|FAIL ...`` line that is printed
in the ``acceptance criteria`` section of the pytest summary. Criteria
5-7 need the medical-insurance CSV, found through ``$SBNN_INSURANCE_CSV``
or ``data/insurance.csv`` at the repository root.
"""

import contextlib
import csv
import os
import time
from pathlib import Path

import numpy as np
import pytest

import conftest
from sbnn import gradcheck
from sbnn.baseline import BaselineConfig, train_baseline
from sbnn.bench import (DEFAULT_GAMMA_GRID, SweepSpec, prepare, run_monte_carlo, run_sweep)
from sbnn.cli import main
from sbnn.data import load_csv
from sbnn.model import hidden
from sbnn.splitboost import TrainConfig, fit_w2, select_learning_rate, should_stop, stationarity, train

REPO = Path(__file__).resolve().parents[1]


def _record(n, ok, detail):
    conftest.ACCEPTANCE_LINES[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"


@contextlib.contextmanager
def criterion(n):
    """Record FAIL for criterion `n` if the body raises before recording."""
    try:
        yield
    except BaseException as exc:
        if n not in conftest.ACCEPTANCE_LINES:
            _record(n, False, f"{type(exc).__name__}: {exc}".splitlines()[0])
        raise


def insurance_path():
    env = os.environ.get("SBNN_INSURANCE_CSV")
    candidates = [Path(env)] if env else []
    candidates.append(REPO / "data" / "insurance.csv")
    for p in candidates:
        if p.is_file():
            return p
    return None


def require_insurance(n):
    path = insurance_path()
    if path is None:
        msg = "insurance dataset unavailable (set SBNN_INSURANCE_CSV or add data/insurance.csv); not evaluated"
        _record(n, False, msg)
        pytest.fail(msg)
    return load_csv(path)


def test_criterion_1_hypergradient():
    with criterion(1):
        t0 = time.perf_counter()
        errs = [gradcheck.hypergradient_error(gradcheck.make_instance(s), step=1e-5) for s in range(10)]
        elapsed = time.perf_counter() - t0
        ok = max(errs) < gradcheck.HYPERGRAD_TOL and elapsed < 60
        _record(1, ok, f"max rel error {max(errs):.2e} (< 1e-4), {elapsed:.1f} s (< 60 s)")
        assert ok


def _inner_instances():
    rng = np.random.default_rng(2024)
    for s in range(10):
        inst = gradcheck.make_instance(s)
        for x, y in (inst.data_a, inst.data_b):
            yield hidden(inst.w1, x)[2], y, True
    for _ in range(10):
        # rank deficient: fewer samples than columns, and a duplicated unit
        x1 = np.hstack([rng.standard_normal((3, 5)), np.ones((3, 1))])
        yield x1, rng.standard_normal((3, 1)), False
        x1 = rng.standard_normal((12, 4))
        x1 = np.hstack([x1, x1[:, :1], np.ones((12, 1))])
        yield x1, rng.standard_normal((12, 1)), False


def test_criterion_2_inner_solve():
    with criterion(2):
        worst_stat = 0.0
        worst_ne = 0.0
        for x1, y, full in _inner_instances():
            w2 = fit_w2(x1, y)
            g, scale = stationarity(x1, w2, y)
            worst_stat = max(worst_stat, g / (1e-8 * scale))
            if full:
                oracle = np.linalg.solve(x1.T @ x1, x1.T @ y)
                worst_ne = max(worst_ne, np.max(np.abs(w2 - oracle)) / np.max(np.abs(oracle)))
        ok = worst_stat <= 1.0 and worst_ne <= 1e-10
        _record(2, ok, f"stationarity at {worst_stat:.2e} of bound, normal-equations rel diff {worst_ne:.2e} (<= 1e-10)")
        assert ok


def test_criterion_3_jacobian():
    with criterion(3):
        t0 = time.perf_counter()
        errs = [gradcheck.jacobian_error(gradcheck.make_instance(s), step=1e-6, side=side)
                for s in range(10) for side in "ab"]
        elapsed = time.perf_counter() - t0
        ok = max(errs) < gradcheck.JACOBIAN_TOL and elapsed < 30
        _record(3, ok, f"max |a-fd|/(1+|fd|) {max(errs):.2e} (< 1e-5), {elapsed:.1f} s (< 30 s)")
        assert ok


def test_criterion_4_baseline_gradients():
    with criterion(4):
        errs = [gradcheck.baseline_error(*gradcheck.baseline_instance(s)) for s in range(10)]
        ok = max(errs) < gradcheck.BASELINE_TOL
        _record(4, ok, f"max rel error {max(errs):.2e} (< 1e-6)")
        assert ok


@pytest.mark.slow
def test_criterion_5_convergence_speed():
    with criterion(5):
        dataset = require_insurance(5)
        t0 = time.perf_counter()
        sb, ff = [], []
        for seed in range(10):
            parts = prepare(dataset, seed)
            res = train(TrainConfig(seed=seed, max_epochs=50), parts.a, parts.b, parts.val, early_stopping=False)
            sb.append(res.history[49].j_train)
            res = train_baseline(BaselineConfig(seed=seed, max_epochs=200), parts.train, parts.val,
                                 early_stopping=False)
            ff.append(res.history[199].j_train_avg_w2)
        elapsed = time.perf_counter() - t0
        ratio = float(np.median(sb) / np.median(ff))
        ok = ratio <= 1.10 and elapsed < 600
        _record(5, ok, f"median SB bilevel@50 {np.median(sb):.4g} / median FF MSE@200 {np.median(ff):.4g} "
                       f"= {ratio:.3f} (<= 1.10), {elapsed:.0f} s")
        assert ok


@pytest.mark.slow
def test_criterion_6_monte_carlo(tmp_path):
    with criterion(6):
        dataset = require_insurance(6)
        t0 = time.perf_counter()
        report = run_monte_carlo(50, TrainConfig(), BaselineConfig(), dataset)
        elapsed = time.perf_counter() - t0
        report.write_json(tmp_path / "report.json")
        ok = report.win_rate >= 0.5 and elapsed < 1800
        _record(6, ok, f"win rate {report.win_rate!r} over {len(report.seeds)} seeds (>= 0.50; reference 0.72), "
                       f"{len(report.diverged_seeds)} diverged, {elapsed:.0f} s")
        assert ok


@pytest.mark.slow
def test_criterion_7_gamma_sweep():
    with criterion(7):
        dataset = require_insurance(7)
        grid = list(DEFAULT_GAMMA_GRID)
        target = grid.index(0.1)
        parts = []
        ok = True
        for trainer, cfg in (("splitboost", TrainConfig()), ("baseline", BaselineConfig())):
            res = run_sweep(SweepSpec("gamma", grid, trainer, cfg), dataset)
            ok &= abs(res.argmin - target) <= 1
            table = ", ".join(f"{v:g}:{c:.4g}" for v, c in zip(res.values, res.final_j_val))
            parts.append(f"{trainer} argmin {res.best_value:g} [{table}]")
        _record(7, ok, "; ".join(parts))
        assert ok


def test_criterion_8_protocol():
    with criterion(8):
        eps = 2.0 ** -10
        # dyadic costs so the deltas are exact: 1/2, 1/4, 2eps, eps (no stop), eps/2 (stop)
        jv = [2.0, 1.5, 1.25, 1.25 - 2 * eps, 1.25 - 3 * eps, 1.25 - 3.5 * eps, 1.0]
        fired = [k for k in range(1, len(jv)) if should_stop(jv[k], jv[k - 1], eps)]
        stop_ok = fired == [5] and not should_stop(jv[0], None, eps)

        gamma = 0.1
        jt = [1.0, 1.2, 1.1, 1.1, 1.3, 0.9]
        picked = [select_learning_rate(gamma, jt[k], jt[k - 1] if k else None) for k in range(len(jt))]
        expected = [gamma / 10, gamma, gamma / 10, gamma / 10, gamma, gamma / 10]
        switch_ok = picked == expected

        # the live loop follows the same rules
        rng = np.random.default_rng(5)
        x = rng.standard_normal((40, 3))
        y = np.sin(x[:, :1]) + 0.1 * rng.standard_normal((40, 1))
        res = train(TrainConfig(hidden=5, epsilon=1e-4, max_epochs=300, gamma_star=0.5),
                    (x[:15], y[:15]), (x[15:30], y[15:30]), (x[30:], y[30:]))
        jt_live = res.costs("j_train")
        jv_live = res.costs("j_val")
        g_live = res.costs("gamma_used")
        live_switch = g_live[0] == 0.05 and all(
            g_live[k] == (0.5 if jt_live[k] > jt_live[k - 1] else 0.05) for k in range(1, len(jt_live)))
        d = np.abs(np.diff(jv_live))
        live_stop = res.stopped_early and d[-1] < 1e-4 and bool(np.all(d[:-1] >= 1e-4))

        ok = stop_ok and switch_ok and live_switch and live_stop
        _record(8, ok, f"stop rule scripted={stop_ok} live={live_stop}; "
                       f"switch scripted={switch_ok} live={live_switch} ({len(jt_live)} epochs)")
        assert ok


def _cost_columns(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return "\n".join(f"{r['sb_test_cost']},{r['ff_test_cost']}" for r in rows).encode()


@pytest.mark.slow
def test_criterion_9_determinism(tmp_path, surrogate_csv, capsys):
    with criterion(9):
        path = insurance_path()
        source = "insurance data" if path else "synthetic insurance-layout data (real CSV unavailable)"
        path = path or surrogate_csv
        cols = []
        for name, workers in (("a", 1), ("b", 1), ("c", 4)):
            out = tmp_path / f"{name}.json"
            code = main(["bench", "--data", str(path), "--seeds", "5", "--workers", str(workers), "--out", str(out)])
            assert code == 0
            cols.append(_cost_columns(tmp_path / f"{name}.csv"))
        capsys.readouterr()
        ok = cols[0] == cols[1] == cols[2] and b"nan" not in cols[0]
        _record(9, ok, f"bench --seeds 5 repeat identical={cols[0] == cols[1]}, "
                       f"workers 4 == workers 1: {cols[0] == cols[2]} on {source}")
        assert ok
