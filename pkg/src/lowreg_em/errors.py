"""Exception hierarchy shared by the numerical modules and the harness."""


class LowRegError(Exception):
    """Base class for every error raised by this package."""


class InvalidSpecError(LowRegError, ValueError):
    """A drift specification violates one of its invariants."""


class DomainError(LowRegError, ValueError):
    """A function was evaluated outside its domain (e.g. t = 0 for t^-beta)."""


class NonIntegrableError(LowRegError, ValueError):
    """A power profile t^-beta is not p-integrable near zero (beta * p >= 1)."""


class FrozenTimeSingularityError(DomainError):
    """The classical scheme would freeze a singular time profile at t = 0."""


class NodeError(LowRegError, ValueError):
    """A Brownian path was queried at a time that is not a grid node."""


class GridMismatchError(LowRegError, ValueError):
    pass


class ResolutionError(LowRegError, ValueError):
    """A grid is too coarse for the requested operation."""


class EmptySampleError(LowRegError, ValueError):
    pass


class DegenerateFitError(LowRegError, ValueError):
    """A log-log fit cannot be formed (equal abscissae, zero errors, ...)."""


class DegenerateWeightError(LowRegError, AssertionError):
    """A zero control weight met a non-constant path increment."""


class NonConvergenceError(LowRegError, RuntimeError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConfigError(LowRegError, ValueError):
    """Raised with one message per violated configuration invariant."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
