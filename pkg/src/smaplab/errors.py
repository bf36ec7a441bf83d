"""
Exception hierarchy for the Schrödinger-map laboratory.

Configuration-type failures subclass ValueError and numerical failures
subclass RuntimeError, so callers that only know the builtin types still
catch them. The runner maps the families onto exit codes.
"""


class LabError(Exception):
    """Base class for every error raised by smaplab."""
    pass


class ConfigError(LabError, ValueError):
    """Invalid configuration or an operation called outside its domain."""
    pass


class BandOutOfRangeError(ConfigError):
    """Dyadic index outside the window resolvable on the grid."""
    pass


class InvalidDirectionError(ConfigError):
    """Direction vector is not of unit length."""
    pass


class DirectionSetError(ConfigError):
    """Direction cannot be resampled exactly on the periodic grid."""
    pass


class BandLeakageError(ConfigError):
    """Field carries too much spectral mass outside the dyadic annulus."""
    pass


class ConstraintError(LabError, ValueError):
    """Tangency or sphere constraint violated on input."""
    pass


class InvalidFrameError(LabError, ValueError):
    """Frame is not an orthonormal tangent pair."""
    pass


class InsufficientDataError(LabError, ValueError):
    """Auxiliary snapshots needed for a discrete derivative are missing."""
    pass


class NumericalError(LabError, RuntimeError):
    """Base class for failures of a numerical integrator."""
    pass


class DivergenceError(NumericalError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message: str, step: int = -1):
        super().__init__(message)
        self.step = step


class StabilityError(NumericalError):
    """Drift off the sphere exceeded the stability tolerance."""
    pass


class FarFromEquilibriumError(NumericalError):
    """Heat flow has not relaxed close enough to Q to fix a frame at infinity."""
    pass


class GateFailure(LabError):
    """An acceptance gate did not pass."""

    def __init__(self, gate: str, message: str):
        super().__init__(f"{gate}: {message}")
        self.gate = gate


EXIT_OK = 0
EXIT_GATE_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_DIVERGENCE = 3


def exit_code_for(exc: BaseException) -> int:
    """Map an exception onto the runner's exit code."""
    if isinstance(exc, GateFailure):
        return EXIT_GATE_FAILURE
    if isinstance(exc, NumericalError):
        return EXIT_DIVERGENCE
    if isinstance(exc, (ConfigError, ConstraintError, InvalidFrameError,
                        InsufficientDataError, FileNotFoundError)):
        return EXIT_CONFIG_ERROR
    return EXIT_GATE_FAILURE
