"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: configuration and I/O problems exit 1,
certification/hypothesis failures exit 2, non-convergence exits 3.
"""


class ConefixError(Exception):
    """Base class for all package errors."""


class GridCompatibilityError(ConefixError):
    """Binary operation attempted on vectors from different grids."""


class DomainError(ConefixError, ValueError):
    """Argument outside the documented domain of an operation."""


class SolverError(ConefixError):
    """A characteristic-equation solve failed to meet its residual contract."""


class ConstructionError(ConefixError):
    """Operator construction rejected the grid or failed a kernel sanity check."""


class CertificationError(ConefixError):
    """A bracket or certificate condition could not be established."""


class PreconditionError(CertificationError):
    """A sampled operator hypothesis failed; message names the inequality."""


class IterationError(ConefixError):
    """Monotonicity of the iterates was violated mid-run."""

    def __init__(self, step, message):
        self.step = step
        super().__init__(f"step {step}: {message}")


class NonConvergenceError(ConefixError):
    """Iteration budget exhausted before the stopping rule fired."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class TheoremViolationError(ConefixError):
    """A consequence guaranteed by the certified hypotheses failed numerically."""


class DegenerateResultError(ConefixError):
    """A result that must be separated from trivial elements was not."""


class ConfigError(ConefixError):
    """Experiment configuration failed validation."""
