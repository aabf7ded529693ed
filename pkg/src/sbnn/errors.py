"""Exception hierarchy shared by all sbnn modules."""


class SBNNError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(SBNNError, ValueError):
    """Operands have incompatible dimensions."""


class NumericError(SBNNError, ArithmeticError):
    """A computation produced NaN or Inf."""


class ConfigurationError(SBNNError, ValueError):
    """Invalid hyperparameters or data partitioning."""


class ContractError(SBNNError):
    """A caller violated an operation's precondition."""


class IngestionError(SBNNError, ValueError):
    """Malformed input file."""


class TrainingError(SBNNError):
    """Training diverged.

    Attributes
    ----------
    epoch : int
        1-based epoch at which a non-finite cost appeared.
    last_state : object
        Last parameters whose costs were all finite.
    """

    def __init__(self, message, epoch, last_state=None):
        super().__init__(message)
        self.epoch = epoch
        self.last_state = last_state
