"""Exception hierarchy shared by the library and the command line.

Every error carries a stable machine-readable ``code`` so that scripted runs
can branch on it; the CLI prints ``"<code>: <message>"`` to standard error.
"""


class BukhgeimError(Exception):
    """Base class for all library errors."""

    code = "BUKHGEIM_ERROR"

    def __init__(self, message: str, code: str = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def __str__(self) -> str:
        return f"{self.code}: {self.args[0]}"


class GridError(BukhgeimError):
    code = "GRID_INVALID"


class GridMismatchError(BukhgeimError):
    code = "GRID_MISMATCH"


class FieldError(BukhgeimError):
    code = "FIELD_INVALID"


class ExponentError(BukhgeimError):
    code = "EXPONENT_INADMISSIBLE"


class ProbeError(BukhgeimError):
    code = "PROBE_INVALID"


class PhaseError(BukhgeimError):
    code = "PHASE_INVALID"


class CGOConvergenceError(BukhgeimError):
    """Raised when the Neumann series stops contracting.

    ``tau_hint`` is a rough estimate of a parameter at which the series
    should contract, based on the measured term ratios.
    """

    code = "CGO_DIVERGED"

    def __init__(self, message: str, tau_hint: float = None):
        super().__init__(message)
        self.tau_hint = tau_hint


class SweepError(BukhgeimError):
    code = "SWEEP_INVALID"


class SolverError(BukhgeimError):
    code = "SOLVER_SINGULAR"


class FormatError(BukhgeimError):
    code = "FORMAT_INVALID"


class ConfigError(BukhgeimError):
    code = "CONFIG_INVALID"


class OutputPathError(BukhgeimError):
    code = "OUTPUT_OUTSIDE_DIRECTORY"


class PropertyViolation(BukhgeimError):
    """A measured property or acceptance check failed (CLI exit code 2)."""

    code = "PROPERTY_VIOLATION"


class ParameterError(BukhgeimError):
    """A scalar argument outside its admissible range."""

    code = "PARAMETER_INVALID"
