"""Exception hierarchy shared by the solver modules."""


class SepSPDEError(Exception):
    """Base class for all solver errors."""


class InvalidArgumentError(SepSPDEError, ValueError):
    pass


class SolverError(SepSPDEError, RuntimeError):
    """A linear solve failed; ``condition`` carries a conditioning estimate when known."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class DegenerateError(SepSPDEError, RuntimeError):
    """A random variable or field collapsed to zero where a nonzero one is required."""


class NearSingularSampleError(DegenerateError):
    def __init__(self, message, sample_index):
        super().__init__(message)
        self.sample_index = sample_index


class StabilityError(SepSPDEError, RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NonConvergenceError(SepSPDEError, RuntimeError):
    """Raised when the outer enrichment loop exhausts its budget.

    ``solution`` holds the partial expansion so callers can still export it.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class OracleError(SepSPDEError, RuntimeError):
    pass


class ConfigError(SepSPDEError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
