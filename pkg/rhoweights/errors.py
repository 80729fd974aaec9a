"""Exception hierarchy shared by every module.

Contract failures derive from :class:`ValidationError`, numerical failures from
:class:`NumericalError`; the command line maps them to exit codes 2 and 3.
"""

from __future__ import annotations


class RhoWeightsError(Exception):
    """Base class for all library errors."""


class ValidationError(RhoWeightsError, ValueError):
    """Input violates an operation's preconditions."""


class NumericalError(RhoWeightsError, ArithmeticError):
    """A computation could not produce a finite, meaningful value."""


# grid
class InvalidDimensionError(ValidationError):
    pass


class NonPositiveSizeError(ValidationError):
    pass


class NonFiniteValuesError(ValidationError):
    pass


class EmptyBallError(ValidationError):
    """No cell center lies inside the ball."""


class CenterOutsideDomainError(ValidationError):
    pass


# expr
class ExprError(ValidationError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class EvaluationDomainError(ExprError):
    def __init__(self, message: str, cell: int | None = None):
        if cell is not None:
            message = f"{message} (cell {cell})"
        super().__init__(message)
        self.cell = cell


class NonFiniteResultError(NumericalError):
    def __init__(self, message: str, cell: int | None = None):
        if cell is not None:
            message = f"{message} (cell {cell})"
        super().__init__(message)
        self.cell = cell


# exponent
class ExponentRangeError(ValidationError):
    pass


class ConjugateOfOneError(ValidationError):
    """p(x) = 1 somewhere, so p'(x) would be infinite."""


# norm
class NormOverflowError(NumericalError):
    pass


class ZeroNormError(NumericalError):
    pass


class ZeroFunctionError(ValidationError):
    pass


class NonPositiveWeightError(ValidationError):
    pass


# rho
class NonPositiveRhoError(ValidationError):
    pass


class PotentialZeroError(ValidationError):
    pass


class ZeroMassBallError(NumericalError):
    pass


# cover
class HypothesisViolationError(ValidationError):
    pass


class GridTooCoarseError(ValidationError):
    pass


# weights
class EmptySweepError(ValidationError):
    pass


class NoSubcriticalBallsError(ValidationError):
    pass


class EmptySubsetError(ValidationError):
    pass


class QOutsideDomainError(ValidationError):
    pass


# cli
class ConfigError(ValidationError):
    """Invalid run configuration; ``field`` names the offending ``section.key``."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
