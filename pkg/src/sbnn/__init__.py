"""Split-boost training for two-layer ReLU regression networks."""

from .baseline import BaselineConfig, baseline_cost, baseline_gradients, train_baseline
from .data import Dataset, Scaler, SplitIndices, fit_scaler, load_csv, split
from .errors import (ConfigurationError, ContractError, IngestionError, NumericError, SBNNError,
                     ShapeError, TrainingError)
from .model import NetworkParams, forward, mse_cost, predict, relu, relu_prime
from .splitboost import (EpochRecord, TrainConfig, TrainResult, bilevel_cost, fit_w2, retrain, train,
                         w1_gradient, w2_jacobian)

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig",
    "ConfigurationError",
    "ContractError",
    "Dataset",
    "EpochRecord",
    "IngestionError",
    "NetworkParams",
    "NumericError",
    "SBNNError",
    "Scaler",
    "ShapeError",
    "SplitIndices",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "baseline_cost",
    "baseline_gradients",
    "bilevel_cost",
    "fit_scaler",
    "fit_w2",
    "forward",
    "load_csv",
    "mse_cost",
    "predict",
    "relu",
    "relu_prime",
    "retrain",
    "split",
    "train",
    "train_baseline",
    "w1_gradient",
    "w2_jacobian",
]
