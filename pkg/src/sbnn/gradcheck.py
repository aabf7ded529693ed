"""Seeded finite-difference checks of the analytic derivatives.

Instances are sampled so that every pre-activation stays at least
`margin` away from the ReLU kink, which keeps the activation pattern fixed
under the finite-difference perturbations.
"""

from dataclasses import dataclass

import numpy as np

from .baseline import baseline_cost, baseline_gradients
from .linalg import COD, finite_diff_gradient, finite_diff_jacobian
from .model import NetworkParams, forward, hidden
from .splitboost import bilevel_cost, fit_w2, w1_gradient, w2_jacobian

HYPERGRAD_TOL = 1e-4
JACOBIAN_TOL = 1e-5
BASELINE_TOL = 1e-6


@dataclass
class Instance:
    w1: np.ndarray
    data_a: tuple
    data_b: tuple


def _margin_ok(w1, xs, margin, min_active):
    for x in xs:
        _, z1, x1aug = hidden(w1, x)
        if np.min(np.abs(z1)) < margin:
            return False
        if np.min(np.sum(z1 > 0, axis=0)) < min_active or COD(x1aug).rank < x1aug.shape[1]:
            return False
    return True


def make_instance(seed, n_a=8, n_b=8, d=3, h=4, margin=1e-2, max_tries=10_000):
    """Random split-boost instance with full-rank activations on both partitions."""
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        xa = rng.standard_normal((n_a, d))
        xb = rng.standard_normal((n_b, d))
        w1 = rng.standard_normal((d + 1, h))
        if _margin_ok(w1, (xa, xb), margin, min_active=2):
            ya = rng.standard_normal((n_a, 1))
            yb = rng.standard_normal((n_b, 1))
            return Instance(w1, (xa, ya), (xb, yb))
    raise RuntimeError(f"no admissible instance found for seed {seed}")


def relative_error(analytic, oracle):
    """Normwise relative error ``max|a - o| / max|o|`` (absolute when the oracle is ~0)."""
    analytic = np.asarray(analytic)
    oracle = np.asarray(oracle)
    scale = np.max(np.abs(oracle))
    diff = np.max(np.abs(analytic - oracle))
    return float(diff / scale) if scale > 1e-12 else float(diff)


def hypergradient_error(inst, step=1e-5):
    analytic = w1_gradient(inst.w1, inst.data_a, inst.data_b)
    oracle = finite_diff_gradient(lambda w: bilevel_cost(w, inst.data_a, inst.data_b), inst.w1, step)
    return relative_error(analytic, oracle)


def jacobian_error(inst, step=1e-6, side="a"):
    """Largest ``|analytic - fd| / (1 + |fd|)`` over the entries of the inner-solution Jacobian."""
    x, y = inst.data_a if side == "a" else inst.data_b
    params = NetworkParams(inst.w1, np.zeros((inst.w1.shape[1] + 1, 1)))
    cache = forward(params, x)
    w2 = fit_w2(cache.x1aug, y)
    analytic = w2_jacobian(cache.xaug, cache, w2, y)

    def inner(w1):
        _, _, x1aug = hidden(w1, x)
        return fit_w2(x1aug, y)

    oracle = finite_diff_jacobian(inner, inst.w1, step)
    return float(np.max(np.abs(analytic - oracle) / (1.0 + np.abs(oracle))))


def baseline_instance(seed, n=12, d=3, h=4, lam=0.01, margin=1e-2, max_tries=10_000):
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        x = rng.standard_normal((n, d))
        w1 = rng.standard_normal((d + 1, h))
        _, z1, _ = hidden(w1, x)
        if np.min(np.abs(z1)) >= margin:
            params = NetworkParams(w1, rng.standard_normal((h + 1, 1)))
            return params, x, rng.standard_normal((n, 1)), lam
    raise RuntimeError(f"no admissible instance found for seed {seed}")


def baseline_error(params, x, y, lam, step=1e-5):
    g1, g2 = baseline_gradients(params, x, y, lam)
    fd1 = finite_diff_gradient(lambda w: baseline_cost(NetworkParams(w, params.w2), x, y, lam), params.w1, step)
    fd2 = finite_diff_gradient(lambda w: baseline_cost(NetworkParams(params.w1, w), x, y, lam), params.w2, step)
    return relative_error(np.concatenate([g1.ravel(), g2.ravel()]), np.concatenate([fd1.ravel(), fd2.ravel()]))


def run_all(seed=0, n_instances=10):
    """Worst-case error of each check over `n_instances` seeds starting at `seed`."""
    seeds = range(seed, seed + n_instances)
    return {
        "w1_gradient": max(hypergradient_error(make_instance(s)) for s in seeds),
        "w2_jacobian": max(max(jacobian_error(make_instance(s), side=side) for side in "ab") for s in seeds),
        "baseline_gradients": max(baseline_error(*baseline_instance(s)) for s in seeds),
    }


TOLERANCES = {
    "w1_gradient": HYPERGRAD_TOL,
    "w2_jacobian": JACOBIAN_TOL,
    "baseline_gradients": BASELINE_TOL,
}
