"""Shared exception types."""


class ContractError(ValueError):
    """An operation was called with arguments outside its contract."""


class NotReadyError(RuntimeError):
    """An operation needs more state than is available yet."""


class BoundaryError(ValueError):
    """A derivative was requested at a point where it is undefined."""


class RunAbortedError(RuntimeError):
    """An optimization run stopped early, e.g. because evaluation failed.

    Carries the partial run record so callers can checkpoint or resume.
    """

    def __init__(self, message, partial_record=None):
        super().__init__(message)
        self.partial_record = partial_record
