"""Exception types shared across the package.

Every recoverable failure mode gets a named class so callers (in
particular the experiment harness) can catch precisely the signals they
care about and keep going where that is meaningful.
"""


class BergreenError(Exception):
    """Base class for all package errors."""


class ParameterError(BergreenError, ValueError):
    """Invalid constructor or call parameters (bad radii, domain mismatch, ...)."""


class UnsupportedDomainError(BergreenError):
    """Operation not defined for this domain kind."""


class ConfigError(BergreenError):
    """Experiment configuration is malformed or inconsistent."""


class NumericError(BergreenError):
    """A numeric evaluation produced a non-finite or out-of-range value."""


class WeightError(BergreenError):
    """Weight violates its representation contract (nonpositive, zero inside closure)."""


class GaugeInfeasibleError(BergreenError):
    """No antiholomorphic gauge exists for this weight.

    Carries the measured log-Laplacian residual that witnesses the obstruction.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IllConditionedGramError(BergreenError):
    """Gram matrix is numerically singular; carries the eigenvalue report."""

    def __init__(self, message, eig_min=None, eig_max=None):
        super().__init__(message)
        self.eig_min = eig_min
        self.eig_max = eig_max


class DegenerateKernelError(BergreenError):
    """Kernel diagonal is nonpositive where a positive value is required."""


class DiagonalSingularityError(BergreenError):
    """Green's function evaluated on its logarithmic diagonal z = w."""


class StencilError(BergreenError):
    """A finite-difference stencil left the domain; names the offending point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class SolverError(BergreenError):
    """Sparse linear solve failed or did not converge."""


class StudyInsufficientError(BergreenError):
    """Convergence study has fewer than three successful rows."""
