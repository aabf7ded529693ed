"""Two-layer ReLU regression network: parameters, forward pass, cost, persistence."""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .linalg import as_matrix


def relu(z):
    return np.maximum(z, 0.0)


def relu_prime(z):
    # subgradient 0 at the kink
    return (np.asarray(z) > 0).astype(np.float64)


def augment(x):
    """Append a constant-1 column."""
    x = np.asarray(x, dtype=np.float64)
    return np.hstack([x, np.ones((x.shape[0], 1))])


@dataclass
class NetworkParams:
    """Augmented weights of the network.

    ``w1`` is ``(d+1, h)`` with the hidden bias in its last row; ``w2`` is
    ``(h+1, 1)`` with the output bias in its last entry.
    """

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        self.w1 = as_matrix(self.w1, "w1")
        self.w2 = as_matrix(self.w2, "w2")
        if self.w1.shape[0] < 2:
            raise ShapeError(f"w1 needs at least one input row plus bias, got {self.w1.shape}")
        if self.w2.shape != (self.w1.shape[1] + 1, 1):
            raise ShapeError(f"w2 shape {self.w2.shape} inconsistent with w1 shape {self.w1.shape}")

    @property
    def d(self):
        return self.w1.shape[0] - 1

    @property
    def h(self):
        return self.w1.shape[1]

    def copy(self):
        return NetworkParams(self.w1.copy(), self.w2.copy())

    def to_dict(self):
        return {
            "d": self.d,
            "h": self.h,
            "w1": [float(v) for v in self.w1.ravel(order="C")],
            "w2": [float(v) for v in self.w2.ravel()],
        }

    @classmethod
    def from_dict(cls, doc):
        d, h = int(doc["d"]), int(doc["h"])
        w1 = np.array(doc["w1"], dtype=np.float64)
        w2 = np.array(doc["w2"], dtype=np.float64)
        if w1.size != (d + 1) * h or w2.size != h + 1:
            raise ShapeError("stored weight arrays do not match d and h")
        return cls(w1.reshape(d + 1, h), w2.reshape(h + 1, 1))


def init_uniform(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(d, h, seed, init_w2=False):
    """Draw initial weights from a seeded generator.

    Hidden weights are uniform in ``+-sqrt(6 / (d + h))`` with a zero bias
    row. The output layer is zero unless `init_w2`, in which case it uses
    the same rule with fan ``h + 1`` and a zero bias.
    """
    rng = np.random.default_rng(seed)
    w1 = np.zeros((d + 1, h))
    w1[:d] = init_uniform(rng, d, h, (d, h))
    w2 = np.zeros((h + 1, 1))
    if init_w2:
        w2[:h] = init_uniform(rng, h, 1, (h, 1))
    return NetworkParams(w1, w2)


@dataclass
class ForwardCache:
    z1: np.ndarray
    x1aug: np.ndarray
    yhat: np.ndarray
    xaug: np.ndarray = field(repr=False, default=None)


def hidden(w1, x):
    """Pre-activations and augmented activations for input `x`."""
    x = as_matrix(x, "x")
    if x.shape[1] + 1 != w1.shape[0]:
        raise ShapeError(f"x has {x.shape[1]} features, weights expect {w1.shape[0] - 1}")
    xaug = augment(x)
    z1 = xaug @ w1
    return xaug, z1, augment(relu(z1))


def forward(params, x, w2=None):
    """Forward pass; `w2` overrides ``params.w2`` (used for cross application)."""
    xaug, z1, x1aug = hidden(params.w1, x)
    yhat = x1aug @ (params.w2 if w2 is None else w2)
    return ForwardCache(z1=z1, x1aug=x1aug, yhat=yhat, xaug=xaug)


def predict(params, x):
    return forward(params, x).yhat


def mse_cost(yhat, y):
    """Half mean squared error ``sum((yhat - y)**2) / (2 N)``."""
    yhat = np.asarray(yhat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if yhat.shape != y.shape or yhat.ndim != 2 or yhat.shape[1] != 1:
        raise ShapeError(f"cost needs matching single-column arrays, got {yhat.shape} and {y.shape}")
    r = yhat - y
    return float(r.ravel() @ r.ravel()) / (2.0 * y.shape[0])


def save_model(path, params, scaler=None, **extra):
    doc = params.to_dict()
    doc["scaler"] = None if scaler is None else scaler.to_dict()
    doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)


def load_model(path):
    """Return ``(params, scaler_or_None, document)``."""
    from .data import Scaler

    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    scaler = Scaler.from_dict(doc["scaler"]) if doc.get("scaler") else None
    return NetworkParams.from_dict(doc), scaler, doc
