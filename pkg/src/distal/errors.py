"""Exception types raised across the package."""


class DistalError(Exception):
    """Base class for every error raised by this package."""


class ProblemError(DistalError, ValueError):
    """The problem description violates a modelling assumption."""


class DimensionMismatch(ProblemError):
    pass


class NonConvex(ProblemError):
    """A private cost is not strongly convex."""


class UnboundedSet(ProblemError):
    """A local set has a non-finite bound."""


class InfeasibleLocalSet(ProblemError):
    """A local set (box intersected with affine equalities) is empty."""


class InfeasibleProblem(ProblemError):
    """No point satisfies all local sets and coupling constraints at once."""


class RankDeficient(ProblemError):
    """Affine equalities are inconsistent even after rank reduction."""


class NoConvergence(DistalError):
    """An iterative method hit its iteration cap.

    ``best`` carries the best iterate available when the cap was hit (a
    vector, a solve result or a run trace, depending on the raiser).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class TooLarge(DistalError):
    """An exhaustive computation would exceed its size guard."""


class ConfigError(DistalError, ValueError):
    """An algorithm or experiment configuration is invalid."""


class ParseError(ConfigError):
    """A configuration or problem file could not be parsed.

    ``field`` names the offending entry (dotted path) when known.
    """

    def __init__(self, message, field=None):
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class GenerationFailed(DistalError):
    """Random problem generation exhausted its retry budget."""
