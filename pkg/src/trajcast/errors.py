"""Exception types raised across the package."""


class TrajcastError(Exception):
    """Base class for all package-specific errors."""


class MissingTicksError(TrajcastError):
    """A track does not cover the requested tick range."""


class MissingTickError(TrajcastError):
    """An actor has no state at the requested tick."""


class UnknownActorError(TrajcastError):
    """The requested actor id is not present in the scene."""


class NotPositiveDefiniteError(TrajcastError):
    """A covariance matrix failed its Cholesky factorization."""


class SingularSystemError(TrajcastError):
    """Normal equations are rank-deficient and no ridge term was given."""


class LanePathExhaustedError(TrajcastError):
    """A lane path ended before the lookahead could be satisfied."""


class ShapeMismatchError(TrajcastError):
    """Tensor shapes are inconsistent with the model configuration."""


class NonFiniteActivationError(TrajcastError):
    """A NaN or Inf appeared in a network activation or parameter."""


class LengthMismatchError(TrajcastError):
    """Predicted and ground-truth trajectories have different lengths."""


class NonPositiveSigmaError(TrajcastError):
    """A predicted standard deviation is not strictly positive."""


class MissingPredictionsError(TrajcastError):
    """A method did not produce predictions for every requested example."""


class EmptyInputError(TrajcastError):
    """An aggregation was asked to operate on zero samples."""


class InvalidGeometryError(TrajcastError):
    """Scenario parameters produced degenerate or self-intersecting geometry."""


class ScriptConflictError(TrajcastError):
    """Two actors were scripted to the same spawn pose and time."""
