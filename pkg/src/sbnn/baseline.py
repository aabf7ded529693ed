"""L2-regularized two-layer network trained by full-batch gradient descent."""

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, ShapeError
from .linalg import as_matrix
from .model import NetworkParams, hidden, init_params, mse_cost, relu_prime
from .splitboost import EpochRecord, TrainResult, _check_finite, _mse, should_stop


@dataclass(frozen=True)
class BaselineConfig:
    gamma: float = 0.1
    lam: float = 0.01
    max_epochs: int = 500
    epsilon: float = 1e-6
    hidden: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.gamma >= 0 or not math.isfinite(self.gamma):
            raise ConfigurationError(f"gamma must be a finite non-negative number, got {self.gamma}")
        if not self.lam >= 0:
            raise ConfigurationError(f"lambda must be non-negative, got {self.lam}")
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_epochs < 1 or self.hidden < 1:
            raise ConfigurationError("max_epochs and hidden must be at least 1")


def _penalty(params):
    w1 = params.w1[:-1]
    w2 = params.w2[:-1]
    return float(np.sum(w1 * w1) + np.sum(w2 * w2))


def _check(params, x, y):
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if y.shape != (x.shape[0], 1):
        raise ShapeError(f"targets shape {y.shape} does not match {x.shape[0]} rows")
    return x, y


def baseline_cost(params, x, y, lam):
    """Half-MSE plus ``lam / 2`` times the squared norm of all non-bias weights."""
    x, y = _check(params, x, y)
    _, _, x1aug = hidden(params.w1, x)
    return mse_cost(x1aug @ params.w2, y) + 0.5 * lam * _penalty(params)


def baseline_gradients(params, x, y, lam):
    """Gradients of :func:`baseline_cost` w.r.t. ``(w1, w2)``."""
    x, y = _check(params, x, y)
    xaug, z1, x1aug = hidden(params.w1, x)
    h = params.h
    g_yhat = (x1aug @ params.w2 - y) / x.shape[0]
    g_w2 = x1aug.T @ g_yhat
    g_z1 = (g_yhat @ params.w2[:h].T) * relu_prime(z1)
    g_w1 = xaug.T @ g_z1
    g_w1[:-1] += lam * params.w1[:-1]
    g_w2[:-1] += lam * params.w2[:-1]
    return g_w1, g_w2


def train_baseline(config, train, val=None, early_stopping=True, params=None):
    """Gradient descent on both layers with a constant learning rate.

    ``j_train`` is the penalized cost at the incoming weights;
    ``j_train_avg_w2`` and ``j_val`` are unpenalized half-MSE after the
    step, matching the split-boost history layout.
    """
    x, y = _check(None, *train)
    if val is not None:
        xv, yv = _check(None, *val)
    if params is None:
        params = init_params(x.shape[1], config.hidden, config.seed, init_w2=True)
    else:
        params = params.copy()

    history = []
    jv_prev = None
    stopped = False
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        with np.errstate(all="ignore"):
            j_t = baseline_cost(params, x, y, config.lam)
            g1, g2 = baseline_gradients(params, x, y, config.lam)
            w1 = params.w1 - config.gamma * g1
            w2 = params.w2 - config.gamma * g2
            j_mse = _mse(w1, w2, x, y)
            j_v = _mse(w1, w2, xv, yv) if val is not None else math.nan
        _check_finite(epoch, params, j_train=j_t, j_train_avg_w2=j_mse,
                      **({"j_val": j_v} if val is not None else {}))
        params = NetworkParams(w1, w2)
        history.append(EpochRecord(epoch, j_t, j_mse, j_v, config.gamma, time.perf_counter() - t0))
        if early_stopping and val is not None and should_stop(j_v, jv_prev, config.epsilon):
            stopped = True
            break
        jv_prev = j_v

    return TrainResult(params=params, best_epoch=len(history), history=history, stopped_early=stopped)


def retrain_baseline(config, train, val, best_epoch, monitor=None):
    """Retrain from scratch on train + validation for exactly `best_epoch` epochs."""
    if best_epoch < 1:
        raise ConfigurationError("best_epoch must be at least 1")
    x = np.vstack([as_matrix(train[0]), as_matrix(val[0])])
    y = np.vstack([as_matrix(train[1]), as_matrix(val[1])])
    cfg = replace(config, max_epochs=int(best_epoch))
    return train_baseline(cfg, (x, y), val=monitor, early_stopping=False)
