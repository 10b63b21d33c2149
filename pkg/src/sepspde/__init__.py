"""Sample-based separated-representation solver for stochastic PDEs.

The solution is built as ``u_k(x, theta) = sum_i lambda_i(theta) d_i(x)``
by greedy rank-one enrichment, with every random variable stored as its
values on a fixed sample ensemble.
"""

from .errors import (ConfigError, DegenerateError, InvalidArgumentError, NearSingularSampleError,
                     NonConvergenceError, OracleError, SepSPDEError, SolverError, StabilityError)
from .separated import (SeparatedSolution, StagnationWarning, enrich_until_converged,
                        evaluate_at_sample, global_error, local_error)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DegenerateError", "InvalidArgumentError", "NearSingularSampleError",
    "NonConvergenceError", "OracleError", "SepSPDEError", "SolverError", "StabilityError",
    "SeparatedSolution", "StagnationWarning", "enrich_until_converged", "evaluate_at_sample",
    "global_error", "local_error",
]
