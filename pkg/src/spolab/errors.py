"""Exception types shared across the package."""


class SpolabError(Exception):
    """Base class for all package-specific errors."""


class DomainError(SpolabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NonIntegrable(SpolabError):
    """Integrand grows too fast for a heavy-tailed mixture component."""


class InadmissiblePair(SpolabError):
    """The (function, distribution) pair violates the admissibility conditions."""


class NoConvergence(SpolabError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class DegenerateSolution(SpolabError):
    """A fixed-point iterate collapsed to alpha ~ 0 (perfect recovery)."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class UnstableRegime(SpolabError):
    """The sampling ratio is below the stable-recovery threshold."""


class Unbounded(SpolabError):
    """The scalar objective keeps decreasing at the search boundary."""

    def __init__(self, message, probe_alpha=None, probe_value=None):
        super().__init__(message)
        self.probe_alpha = probe_alpha
        self.probe_value = probe_value


class InfiniteL0AtBoundary(SpolabError):
    """A beta = 0 evaluation was requested while the limiting loss is infinite."""


class NotApplicable(SpolabError):
    """The requested check does not apply to this configuration."""


class MaxIterExceeded(SpolabError):
    """The instance solver hit its iteration cap; carries the best iterate."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class IllConditioned(SpolabError):
    """Power iteration failed to settle on an operator-norm estimate."""


class ConfigError(SpolabError, ValueError):
    """A run configuration failed schema validation."""
