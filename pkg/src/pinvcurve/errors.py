"""Exception hierarchy shared by all curve-construction modules."""


class CurveError(Exception):
    """Base class for every error raised by pinvcurve."""


class QuoteParseError(CurveError, ValueError):
    """Malformed quote file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IllConditionedError(CurveError):
    """A Gram or normal-equation matrix failed its Cholesky factorization."""


class RankDeficientError(CurveError):
    """The cashflow matrix has a redundant row."""

    def __init__(self, message, label=None):
        self.label = label
        super().__init__(message)


class ArbitrageError(RankDeficientError):
    """A replicable instrument is quoted at an inconsistent price."""


class DomainError(CurveError, ValueError):
    """A curve quantity is undefined, e.g. the log of a nonpositive discount factor."""


class InfeasibleError(CurveError):
    """Constraint set is empty. ``certificate`` holds a Farkas direction when available."""

    def __init__(self, message, certificate=None):
        self.certificate = certificate
        super().__init__(message)


class OptimizationError(CurveError):
    """An iterative solver could not make progress."""
