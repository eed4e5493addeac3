"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Arguments violate a documented precondition (shapes, ranges)."""


class InvalidConfigError(ValueError):
    """A configuration value is out of its valid domain."""


class PayloadCodecError(ValueError):
    """A payload byte buffer has the wrong size or padding."""


class IngestionError(ValueError):
    """An IDX file could not be read or does not hold the requested classes."""


class ConfigParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DivergenceError(RuntimeError):
    """The parameter vector became non-finite.

    ``iteration`` is the 1-based iteration whose update produced the bad
    value; ``rows`` holds the trace recorded before it (set by ``run``).
    """

    def __init__(self, message: str, iteration: int | None = None, rows=None):
        super().__init__(message)
        self.iteration = iteration
        self.rows = rows if rows is not None else []
