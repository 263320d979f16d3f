"""Exception taxonomy shared across the package."""


class InputError(ValueError):
    """Malformed or inconsistent caller input (sizes, indices, files)."""


class DomainError(ValueError):
    """Input violates a mathematical precondition (positivity, exponent range)."""


class SolverError(RuntimeError):
    """Iterative solver failed; carries the best iterate seen."""

    def __init__(self, message, best_state=None, residual=None, iterations=None):
        super().__init__(message)
        self.best_state = best_state
        self.residual = residual
        self.iterations = iterations


class IllConditionedError(SolverError):
    """Instance flagged as too ill-conditioned to solve reliably."""


class AssemblyError(ValueError):
    """Assembled form violates the positivity hypothesis mu(M, dM, [g]) > 0."""
