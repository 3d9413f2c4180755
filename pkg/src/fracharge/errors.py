"""Exception hierarchy shared by all fracharge modules.

The CLI maps these onto machine-readable exit codes: validation problems
exit with 2, resolution exhaustion with 3, solver failures with 4.
"""


class FrachargeError(Exception):
    """Base class for all library errors."""

    exit_code = 1
    error_class = "error"


class ValidationError(FrachargeError):
    """Malformed input, incompatible grids/degrees, or violated preconditions."""

    exit_code = 2
    error_class = "validation"


class GridMismatchError(ValidationError):
    error_class = "grid_mismatch"


class DimensionError(ValidationError):
    error_class = "dimension"


class BoxOverflowError(ValidationError):
    error_class = "box_overflow"


class CriticalExponentError(ValidationError):
    """Raised when Hoelder exponents fail the strict Young-type condition."""

    error_class = "critical_exponent"


class ResolutionExhaustedError(FrachargeError):
    """The working grid cannot support the requested scale or tolerance.

    Carries the partial convergence report when raised from a truncated
    series evaluation.
    """

    exit_code = 3
    error_class = "resolution_exhausted"

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SolverError(FrachargeError):
    """An LP backend failed to return an optimal certificate."""

    exit_code = 4
    error_class = "solver"
