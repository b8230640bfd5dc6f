"""Exception hierarchy. Each class maps to one CLI exit code."""


class ModtandemError(Exception):
    exit_code = 1


class ParseError(ModtandemError):
    """Malformed model file; carries the offending line number when known."""

    exit_code = 2

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelError(ModtandemError):
    """Model parameters violate a structural requirement."""

    exit_code = 3


class StabilityError(ModelError):
    pass


class UnsupportedRegimeError(ModtandemError):
    """A structural assumption of the construction fails for this model."""

    exit_code = 4


class NumericError(ModtandemError):
    """Root bracketing, rank, conditioning or convergence failure."""

    exit_code = 5


class InsufficientRootsError(NumericError):
    pass


class RankError(NumericError):
    def __init__(self, message, rank=None, size=None):
        self.rank = rank
        self.size = size
        super().__init__(message)


class ConvergenceError(NumericError):
    def __init__(self, message, grid=None):
        self.grid = grid
        super().__init__(message)
