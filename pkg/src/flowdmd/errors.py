"""Exception hierarchy shared across the package."""


class FlowDmdError(Exception):
    """Base class for all package-specific errors."""


class ConvergenceError(FlowDmdError):
    """An iterative solve failed to reach its tolerance.

    Carries the final residual so callers can decide whether to retry
    with a looser tolerance or more iterations.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class EigenvalueFloorError(FlowDmdError):
    """Inverse stepping blocked: some |lambda_i| fall below the floor.

    ``mode_indices`` lists the offending modes so the caller can drop
    them and retry.
    """

    def __init__(self, message, mode_indices):
        super().__init__(message)
        self.mode_indices = [int(i) for i in mode_indices]


class RolloutOverflowError(FlowDmdError):
    """A k-step power would overflow; names the offending modulus."""


class FormatError(FlowDmdError):
    """Base class for serialization errors."""


class BadMagicError(FormatError):
    pass


class BadVersionError(FormatError):
    pass


class ChecksumError(FormatError):
    pass


class SizeMismatchError(FormatError):
    pass
