"""Split-boost training.

The training rows are split in two partitions A and B. Each epoch the
output layer is solved in closed form on each partition, each partition is
scored with the *other* partition's output weights, and the hidden layer
takes a gradient step on that cross cost. The dependence of the inner
solutions on the hidden weights enters the gradient through the implicit
function theorem.
"""

import csv
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, ContractError, ShapeError, TrainingError
from .linalg import COD, as_matrix, unvec
from .model import NetworkParams, hidden, init_params, mse_cost, relu_prime

STATIONARITY_TOL = 1e-6
HISTORY_FIELDS = ("epoch", "j_train", "j_train_avg_w2", "j_val", "gamma_used", "wall_time_s")


@dataclass(frozen=True)
class TrainConfig:
    gamma_star: float = 0.1
    epsilon: float = 1e-6
    max_epochs: int = 500
    hidden: int = 10
    seed: int = 0
    lr_switch_enabled: bool = True
    lr_switch_as_written: bool = True

    def __post_init__(self):
        if not self.gamma_star >= 0 or not math.isfinite(self.gamma_star):
            raise ConfigurationError(f"gamma_star must be a finite non-negative number, got {self.gamma_star}")
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_epochs < 1:
            raise ConfigurationError("max_epochs must be at least 1")
        if self.hidden < 1:
            raise ConfigurationError("hidden must be at least 1")


@dataclass
class EpochRecord:
    epoch: int
    j_train: float
    j_train_avg_w2: float
    j_val: float
    gamma_used: float
    wall_time_s: float

    def as_row(self):
        return [getattr(self, name) for name in HISTORY_FIELDS]


@dataclass
class TrainResult:
    params: NetworkParams
    best_epoch: int
    history: list = field(default_factory=list)
    stopped_early: bool = False

    def costs(self, name):
        return np.array([getattr(rec, name) for rec in self.history])


def write_history_csv(history, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_FIELDS)
        for rec in history:
            writer.writerow([rec.epoch] + [repr(float(v)) for v in rec.as_row()[1:]])


def _partition(part, name):
    x, y = part
    x = as_matrix(x, f"{name} features") if np.size(x) else None
    if x is None or np.size(y) == 0:
        raise ConfigurationError(f"partition {name} is empty")
    y = as_matrix(y, f"{name} targets")
    if y.shape != (x.shape[0], 1):
        raise ShapeError(f"partition {name}: targets shape {y.shape} does not match {x.shape[0]} rows")
    return x, y


# --------------------------------------------------------------------------
# inner problem


def fit_w2(x1aug, y):
    """Closed-form output weights for one partition.

    Minimum-norm least squares, so dead hidden units get a zero weight.
    """
    return InnerSolution(x1aug, y).w2


class InnerSolution:
    """Least-squares fit of ``y`` on the augmented activations, keeping the factorization."""

    def __init__(self, x1aug, y):
        self.x1aug = as_matrix(x1aug, "x1aug")
        y = as_matrix(y, "y")
        if y.shape != (self.x1aug.shape[0], 1):
            raise ShapeError(f"y must have shape ({self.x1aug.shape[0]}, 1), got {y.shape}")
        self.cod = COD(self.x1aug)
        self.w2 = self.cod.solve(y)


def stationarity(x1aug, w2, y):
    """Return ``(||X1^T r||_inf, 1 + ||X1^T y||_inf)`` for the residual ``r = X1 w2 - y``."""
    g = x1aug.T @ (x1aug @ w2 - y)
    return float(np.max(np.abs(g))), 1.0 + float(np.max(np.abs(x1aug.T @ y)))


def _mixed_second_derivative(xaug, z1, x1aug, w2star, y):
    n, dp1 = xaug.shape
    h = z1.shape[1]
    s = relu_prime(z1)
    r = (x1aug @ w2star - y).ravel()
    t = np.zeros((h + 1, dp1 * h))
    # dX1[n,h]/dW1[d,h] contributes only on the diagonal block of unit h
    direct = xaug.T @ (s * r[:, None]) / n
    for k in range(h):
        t[k, k * dp1:(k + 1) * dp1] = direct[:, k]
    # dr_n/dW1[d,k] = s[n,k] x[n,d] w2[k]
    g = (s[:, :, None] * xaug[:, None, :]).reshape(n, h * dp1)
    t += (x1aug.T @ g) / n * np.repeat(w2star[:h, 0], dp1)[None, :]
    return t


def w2_jacobian(x_aug, cache, w2star, y, cod=None):
    """Jacobian of the inner solution with respect to ``vec(W1)``.

    Parameters
    ----------
    x_aug : (N, D+1) array
        Bias-augmented inputs of the partition.
    cache : ForwardCache
        Needs ``z1`` and ``x1aug`` computed at the current ``W1``.
    w2star : (H+1, 1) array
        Exact least-squares solution for ``(cache.x1aug, y)``.
    y : (N, 1) array
    cod : COD, optional
        Factorization of ``cache.x1aug`` if already available.

    Returns
    -------
    (H+1, (D+1)*H) array
        ``-pinv(Hess) @ T`` where ``Hess = X1^T X1 / N`` and ``T`` is the
        mixed second derivative of the partition cost. Columns follow the
        column-stacking order of ``W1``. When ``X1`` is rank deficient the
        derivative of the minimum-norm selection is added, so the result is
        the exact Jacobian of :func:`fit_w2` for a fixed activation pattern.

    Raises
    ------
    ContractError
        If `w2star` is not stationary for this cache.
    """
    x_aug = as_matrix(x_aug, "x_aug")
    y = as_matrix(y, "y")
    x1aug = cache.x1aug
    gmax, scale = stationarity(x1aug, w2star, y)
    if gmax > STATIONARITY_TOL * scale:
        raise ContractError(
            f"w2star is not stationary for this cache (|X1^T r|_inf = {gmax:.3e}); "
            "refit the output layer at the current W1"
        )
    n = x_aug.shape[0]
    t = _mixed_second_derivative(x_aug, cache.z1, x1aug, w2star, y)
    if cod is None:
        cod = COD(x1aug)
    # pinv(X1^T X1 / N) = N pinv(X1) pinv(X1)^T
    jac = -n * cod.solve(cod.solve_transpose(t))
    if cod.rank < x1aug.shape[1]:
        jac += _null_space_term(x_aug, cache.z1, x1aug, w2star, cod)
    return jac


def _null_space_term(xaug, z1, x1aug, w2star, cod):
    # derivative of the minimum-norm choice: (I - X1^+ X1) dX1^T X1^+T w2
    dp1 = xaug.shape[1]
    h = z1.shape[1]
    proj = np.eye(x1aug.shape[1]) - cod.solve(x1aug)
    v = cod.solve_transpose(w2star).ravel()
    c = xaug.T @ (relu_prime(z1) * v[:, None])
    extra = np.zeros((h + 1, dp1 * h))
    for k in range(h):
        extra[:, k * dp1:(k + 1) * dp1] = np.outer(proj[:, k], c[:, k])
    return extra


# --------------------------------------------------------------------------
# outer problem


class _Side:
    """Forward quantities and inner solution of one partition at a given W1."""

    def __init__(self, w1, x, y):
        self.x, self.y = x, y
        self.xaug, self.z1, self.x1aug = hidden(w1, x)
        self.inner = InnerSolution(self.x1aug, y)
        self.w2 = self.inner.w2

    @property
    def n(self):
        return self.x.shape[0]

    def cross_cost(self, w2_other):
        return mse_cost(self.x1aug @ w2_other, self.y)


def _sides(w1, data_a, data_b):
    xa, ya = _partition(data_a, "A")
    xb, yb = _partition(data_b, "B")
    w1 = as_matrix(w1, "w1")
    return _Side(w1, xa, ya), _Side(w1, xb, yb)


def bilevel_cost(params_w1, data_a, data_b):
    """Cross cost: partition B scored with A's inner solution plus A scored with B's."""
    a, b = _sides(params_w1, data_a, data_b)
    return b.cross_cost(a.w2) + a.cross_cost(b.w2)


def _cross_terms(scored, fitted, include_jacobian):
    """Gradient of ``J(scored | fitted.w2)`` with respect to W1."""
    h = scored.z1.shape[1]
    g_yhat = (scored.x1aug @ fitted.w2 - scored.y) / scored.n
    g_z1 = (g_yhat @ fitted.w2[:h].T) * relu_prime(scored.z1)
    grad = scored.xaug.T @ g_z1
    if include_jacobian:
        g_w2 = scored.x1aug.T @ g_yhat
        cache = _CacheView(fitted.z1, fitted.x1aug)
        jac = w2_jacobian(fitted.xaug, cache, fitted.w2, fitted.y, cod=fitted.inner.cod)
        grad = grad + unvec(jac.T @ g_w2, *grad.shape)
    return grad


@dataclass
class _CacheView:
    z1: np.ndarray
    x1aug: np.ndarray


def w1_gradient(w1, data_a, data_b, include_jacobian=True):
    """Hypergradient of :func:`bilevel_cost` with respect to the augmented W1.

    `include_jacobian=False` drops the implicit terms and returns only the
    direct backpropagation part; it exists for diagnostics.
    """
    return _gradient_and_state(w1, data_a, data_b, include_jacobian)[0]


def _gradient_and_state(w1, data_a, data_b, include_jacobian=True):
    a, b = _sides(w1, data_a, data_b)
    grad = _cross_terms(b, a, include_jacobian) + _cross_terms(a, b, include_jacobian)
    cost = b.cross_cost(a.w2) + a.cross_cost(b.w2)
    return grad, cost, a.w2, b.w2


# --------------------------------------------------------------------------
# training protocol


def select_learning_rate(gamma_star, j_curr, j_prev, as_written=True):
    """Learning-rate switch.

    As written: the full rate when the training cost went up since the
    previous epoch, a tenth of it otherwise. With ``as_written=False`` the
    branches are swapped. Without a previous cost the reduced rate is used.
    """
    if j_prev is None:
        return gamma_star / 10.0
    increased = j_curr - j_prev > 0
    if increased == as_written:
        return gamma_star
    return gamma_star / 10.0


def should_stop(j_val_curr, j_val_prev, epsilon):
    """Early-stop test on consecutive validation costs."""
    if j_val_prev is None:
        return False
    return abs(j_val_curr - j_val_prev) < epsilon


def _check_finite(epoch, params, **costs):
    bad = [name for name, v in costs.items() if not math.isfinite(v)]
    if bad:
        raise TrainingError(f"training diverged at epoch {epoch}: non-finite {', '.join(bad)}", epoch, params)


def train(config, train_a, train_b, val=None, early_stopping=True, params=None):
    """Run the split-boost epoch loop.

    Each epoch records the bilevel cost at the incoming W1 (``j_train``),
    then steps W1 and replaces W2 by the mean of the two inner solutions.
    ``j_train_avg_w2`` (MSE on A and B together) and ``j_val`` are
    evaluated on the resulting model. Without a validation set ``j_val``
    is NaN and early stopping is off.
    """
    xa, ya = _partition(train_a, "A")
    xb, yb = _partition(train_b, "B")
    if val is not None:
        xv, yv = _partition(val, "validation")
    x_all, y_all = np.vstack([xa, xb]), np.vstack([ya, yb])
    if params is None:
        params = init_params(xa.shape[1], config.hidden, config.seed)
    else:
        params = params.copy()

    history = []
    j_prev = jv_prev = None
    stopped = False
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        grad, j_t, w2a, w2b = _gradient_and_state(params.w1, (xa, ya), (xb, yb))
        if config.lr_switch_enabled:
            gamma = select_learning_rate(config.gamma_star, j_t, j_prev, config.lr_switch_as_written)
        else:
            gamma = config.gamma_star
        w1_new = params.w1 - gamma * grad
        w2_new = 0.5 * (w2a + w2b)
        with np.errstate(all="ignore"):
            j_avg = _mse(w1_new, w2_new, x_all, y_all)
            j_v = _mse(w1_new, w2_new, xv, yv) if val is not None else math.nan
        _check_finite(epoch, params, j_train=j_t, j_train_avg_w2=j_avg,
                      **({"j_val": j_v} if val is not None else {}))
        params = NetworkParams(w1_new, w2_new)
        history.append(EpochRecord(epoch, j_t, j_avg, j_v, gamma, time.perf_counter() - t0))
        j_prev = j_t
        if early_stopping and val is not None and should_stop(j_v, jv_prev, config.epsilon):
            stopped = True
            break
        jv_prev = j_v

    return TrainResult(params=params, best_epoch=len(history), history=history, stopped_early=stopped)


def _mse(w1, w2, x, y):
    if not np.all(np.isfinite(w1)) or not np.all(np.isfinite(w2)):
        return math.nan
    _, _, x1aug = hidden(w1, x)
    return mse_cost(x1aug @ w2, y)


def merge_and_resplit(parts, seed):
    """Stack partitions and deal a seeded permutation alternately into two halves."""
    x = np.vstack([as_matrix(p[0]) for p in parts])
    y = np.vstack([as_matrix(p[1]) for p in parts])
    order = np.random.default_rng(seed).permutation(x.shape[0])
    ia, ib = order[0::2], order[1::2]
    return (x[ia], y[ia]), (x[ib], y[ib])


def retrain(config, train_a, train_b, val, best_epoch, monitor=None):
    """Retrain from scratch on train + validation for exactly `best_epoch` epochs.

    The merged rows are re-split in two halves with ``config.seed``.
    `monitor`, if given, is evaluated each epoch and logged as ``j_val``
    (no early stopping).
    """
    if best_epoch < 1:
        raise ConfigurationError("best_epoch must be at least 1")
    part_a, part_b = merge_and_resplit([train_a, train_b, val], config.seed)
    cfg = replace(config, max_epochs=int(best_epoch))
    return train(cfg, part_a, part_b, val=monitor, early_stopping=False)
