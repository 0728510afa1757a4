"""Exception hierarchy shared by all modules."""


class UltraHarnackError(ValueError):
    """Base class for every error raised by this package."""


class NonpositiveTime(UltraHarnackError):
    pass


class PoleNotInPast(UltraHarnackError):
    pass


class OutOfDomain(UltraHarnackError):
    pass


class EmptySolution(UltraHarnackError):
    pass


class BadTimes(UltraHarnackError):
    pass


class NonFiniteMatrix(UltraHarnackError):
    pass


class SingularKKT(UltraHarnackError):
    pass


class DegenerateEigenvector(UltraHarnackError):
    pass


class NoPositiveWindow(UltraHarnackError):
    pass


class BadProfile(UltraHarnackError):
    pass


class NotSPD(UltraHarnackError):
    pass


class RankDeficient(UltraHarnackError):
    pass


class SingularCovariance(UltraHarnackError):
    pass


class CFLViolation(UltraHarnackError):
    pass


class NonpositiveField(UltraHarnackError):
    pass


class InvalidInput(UltraHarnackError):
    """Malformed user input (JSON files, CLI arguments)."""
