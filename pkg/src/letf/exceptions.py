"""Exception types shared across the package."""


class LetfError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateEnsembleError(LetfError):
    """Ensemble statistics requested for an ensemble with fewer than 2 members."""


class DimensionError(LetfError):
    """Input has the wrong shape for the requested operation."""


class IntegrationFailureError(LetfError):
    """Implicit solver failed to converge; carries the final residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class MarginalMismatchError(LetfError):
    """Transport marginals do not describe the same total mass."""


class NonConvergenceError(LetfError):
    """Iterative solver hit its iteration limit; carries the achieved error."""

    def __init__(self, message, achieved_error=None):
        super().__init__(message)
        self.achieved_error = achieved_error


class WeightCollapseError(LetfError):
    """Importance weights are numerically unusable (non-finite likelihoods)."""


class InvalidEpsilonError(LetfError):
    """Del Moral kernel parameter violates epsilon * max(w) <= 1."""


class DecompositionError(LetfError):
    """Matrix factorization failed (input not symmetric positive definite)."""
