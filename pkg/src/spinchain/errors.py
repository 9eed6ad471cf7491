"""Exception hierarchy shared by all modules."""


class SpinChainError(ValueError):
    """Base class; ``code`` is a short machine-readable tag."""

    code = "ERROR"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class DimensionError(SpinChainError):
    code = "DIMENSION"


class NotHermitianError(SpinChainError):
    code = "NOT_HERMITIAN"


class NotPositiveError(SpinChainError):
    code = "NOT_PSD"


class CapExceededError(SpinChainError):
    code = "CAP_EXCEEDED"


class ReducibleMapError(SpinChainError):
    code = "REDUCIBLE"


class TripleError(SpinChainError):
    code = "INVALID_TRIPLE"


class HypothesisViolation(SpinChainError):
    """A model does not satisfy the structural assumption an analysis needs."""

    code = "HYPOTHESIS"
