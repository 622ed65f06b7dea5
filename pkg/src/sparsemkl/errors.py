"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument or constructed object violates a documented precondition."""


class DivergenceError(RuntimeError):
    """The iteration produced a non-finite quantity.

    Attributes
    ----------
    iteration : int
        1-based index of the offending iteration.
    """

    def __init__(self, iteration, message=None):
        self.iteration = int(iteration)
        if message is None:
            message = f"non-finite iterate at iteration {self.iteration}"
        super().__init__(message)


class PowerIterationError(RuntimeError):
    """Power iteration failed to converge within its iteration cap.

    Attributes
    ----------
    last_estimate : float
        Rayleigh quotient at the last completed iteration.
    """

    def __init__(self, last_estimate, max_iter):
        self.last_estimate = float(last_estimate)
        super().__init__(
            f"power iteration did not converge within {max_iter} iterations "
            f"(last estimate {self.last_estimate!r})"
        )


class OracleFailure(RuntimeError):
    """No candidate support produced a certified stationary point."""


class DualInfeasible(ValueError):
    """A certificate norm exceeds the dual-feasible bound beyond tolerance."""


class ConfigError(ValueError):
    """Invalid command-line or configuration-file input."""
