"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """Raised when a linear-algebra step fails beyond recoverable jitter.

    Carries optional context so callers can report what was being
    factorized and, for multi-start fits, the best partial result found
    before the failure.
    """

    def __init__(self, message, *, best_partial=None):
        super().__init__(message)
        self.best_partial = best_partial


class RunFailure(NumericalError):
    """A sequential optimization run died mid-loop.

    ``iteration`` is the 1-based acquisition round that failed and
    ``records`` holds the completed per-iteration records up to it.
    """

    def __init__(self, message, *, iteration, records):
        super().__init__(message)
        self.iteration = iteration
        self.records = records
