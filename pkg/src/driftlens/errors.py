"""Exception hierarchy shared by all driftlens modules."""


class DriftlensError(Exception):
    """Base class for every error raised by driftlens."""


class ParseError(DriftlensError):
    """Malformed embedding, sidecar, or corpus file."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        self.message = message
        super().__init__(f"{self.path}:{line}: {message}")


class EmptyOverlapError(DriftlensError):
    """Two snapshots share no eligible words."""


class AbsentWordError(DriftlensError, KeyError):
    """A word is missing (or all-zero) in a snapshot."""

    def __init__(self, word, time_label=None):
        self.word = word
        self.time_label = time_label
        where = f" in snapshot {time_label}" if time_label is not None else ""
        super().__init__(f"word {word!r} is absent{where}")

    def __str__(self):
        return self.args[0]


class DegenerateMeasureError(DriftlensError, ArithmeticError):
    """A distance is undefined, e.g. a zero-norm second-order vector."""


class AlignmentError(DriftlensError):
    """A series cannot be aligned (e.g. a consecutive pair without overlap)."""


class SingularDesignError(DriftlensError):
    """Regression design matrix is rank deficient."""

    def __init__(self, columns, message=None):
        self.columns = list(columns)
        super().__init__(message or f"singular design; collinear columns: {', '.join(self.columns)}")


class ConvergenceError(DriftlensError):
    """Optimizer failed to reach tolerance; ``trace`` holds the iteration history."""

    def __init__(self, message, trace=None):
        self.trace = list(trace or [])
        super().__init__(message)


class ConfigError(DriftlensError):
    """Invalid run configuration, detected before any computation."""


class DegenerateAlignmentWarning(UserWarning):
    """Cross-covariance for Procrustes is rank deficient or under-determined."""
