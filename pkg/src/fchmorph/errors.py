"""Exception hierarchy shared by the numerical modules."""


class FCHError(Exception):
    """Base class for domain errors (CLI exit code 1)."""


class DomainError(FCHError, ValueError):
    """Input outside the domain where the model is defined."""


class ConvergenceError(FCHError):
    """Nonlinear or eigen solver failed; carries the last residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class AssumptionViolation(FCHError):
    """A structural spectral assumption needed downstream does not hold."""

    def __init__(self, assumption, message):
        super().__init__(f"{assumption}: {message}")
        self.assumption = assumption


class SingularOperatorError(FCHError):
    """Linear system is (numerically) singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition
