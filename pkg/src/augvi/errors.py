"""Exception hierarchy shared by all modules."""


class AugviError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(AugviError, ValueError):
    """Vector or operator sizes do not conform."""

    def __init__(self, what, expected, got):
        self.what = what
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected dimension {expected}, got {got}")


class UnsupportedError(AugviError, NotImplementedError):
    """A combination of set and metric (or set kind) that is not supported."""


class InvalidParameterError(AugviError, ValueError):
    """A scalar parameter lies outside its admissible range."""


class InnerSolverError(AugviError, RuntimeError):
    """The subproblem solver could not reach the requested tolerance.

    The best iterate found so far is attached as ``x`` together with its
    residual norm, so callers can decide whether to retry.
    """

    def __init__(self, message, x=None, residual=None, report=None):
        super().__init__(message)
        self.x = x
        self.residual = residual
        self.report = report


class CGBreakdown(InnerSolverError):
    """CG met a direction of nonpositive curvature; consider increasing rho."""


class InsufficientDataError(AugviError, ValueError):
    """Not enough history records for the requested estimate."""


class MissingSolutionError(AugviError, ValueError):
    """An operation needs a stored exact solution but the instance has none."""


class ConfigError(AugviError, ValueError):
    """Malformed configuration file or invalid configuration value."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
