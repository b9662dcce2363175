"""Exception hierarchy shared by every module of the package."""


class KnockoffError(Exception):
    """Base class for all errors raised by simknock."""


class ValidationError(KnockoffError, ValueError):
    """Invalid user input (shapes, parameters, file contents)."""


class NumericalError(KnockoffError, ArithmeticError):
    """A numerical routine could not produce a valid result."""


class DimensionMismatch(ValidationError):
    pass


class InsufficientRows(ValidationError):
    pass


class ColumnMismatch(ValidationError):
    pass


class FamilyMismatch(ValidationError):
    pass


class InvalidQ(ValidationError):
    pass


class InvalidRho(ValidationError):
    pass


class InvalidD(ValidationError):
    pass


class KTooLarge(ValidationError):
    pass


class BlockOverflow(ValidationError):
    pass


class DegenerateColumn(ValidationError):
    pass


# Alias used by the second-order construction, which checks every column at once.
DegenerateColumns = DegenerateColumn


class RankDeficient(NumericalError):
    pass


class NonPositiveDefinite(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass
