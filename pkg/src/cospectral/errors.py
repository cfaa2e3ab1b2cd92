"""Exception types raised across the package."""


class CospectralError(Exception):
    """Base class for all package errors."""


class ValidationError(CospectralError, ValueError):
    """Input failed a precondition; maps to CLI exit code 1."""


class ComputationError(CospectralError, RuntimeError):
    """A computation could not finish within its budget; maps to CLI exit code 2."""


# groups
class IndexOutOfRange(ValidationError, IndexError):
    pass


class UnsupportedKind(ValidationError):
    pass


class WordTooLong(ValidationError):
    pass


# walks
class NotSymmetric(ValidationError):
    def __init__(self, msg="step distribution not symmetric"):
        super().__init__(msg)


class ZeroProbabilityInWindow(ValidationError):
    pass


class WindowTooShort(ValidationError):
    pass


# spectral
class BallTooLarge(ComputationError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class SupportMismatch(ValidationError):
    pass


class RTooSmall(ValidationError):
    pass


class NotLazy(ValidationError):
    pass


class NotUnitary(ValidationError):
    pass


class NotLambdaFixed(ValidationError):
    pass


# finrel
class NotAPermutation(ValidationError):
    pass


class NotASubrelation(ValidationError):
    pass


class NotInFullGroup(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class EmptySet(ValidationError):
    pass


class NotSaturated(ValidationError):
    pass


# environments
class UnsortedLevels(ValidationError):
    pass


class EnvironmentWindowExceeded(ComputationError):
    pass


class ConfigError(ValidationError):
    pass
