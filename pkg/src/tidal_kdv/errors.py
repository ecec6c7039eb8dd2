"""Exception hierarchy."""


class TidalKdVError(Exception):
    """Base class for all package errors."""


class ParameterError(TidalKdVError, ValueError):
    """A numeric parameter is outside its admissible range."""


class RejectedInputError(TidalKdVError, ValueError):
    """Input samples are unusable (e.g. non-finite)."""


class ConfigurationError(TidalKdVError, ValueError):
    """Inconsistent experiment or background configuration."""


class SpectralConditionError(TidalKdVError):
    """The Schrodinger operator is not positive definite at this energy."""


class ConvergenceError(TidalKdVError):
    """An iterative or series evaluation failed to converge."""


class ResolutionError(TidalKdVError):
    """Input is not resolved well enough on the grid (aliasing)."""


class DivergenceError(TidalKdVError):
    """Time integration blew up; ``state`` holds the last valid state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ValidityError(TidalKdVError):
    """A diagnostic was requested outside its validity window."""
