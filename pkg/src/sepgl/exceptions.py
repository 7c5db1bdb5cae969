"""Exception hierarchy shared by every module of the package."""


class SepGLError(Exception):
    """Base class for all errors raised by :mod:`sepgl`."""


class DimensionMismatch(SepGLError, ValueError):
    pass


class GroupStructureError(SepGLError, ValueError):
    """Invalid group structure. ``group`` is the offending group index, if any."""

    def __init__(self, message, group=None):
        super().__init__(message)
        self.group = group


class EmptyGroup(GroupStructureError):
    pass


class IndexOutOfRange(GroupStructureError):
    pass


class UncoveredVariable(GroupStructureError):
    def __init__(self, variable):
        super().__init__(f"variable {variable} is not covered by any group")
        self.variable = variable


class NonpositiveWeight(GroupStructureError):
    pass


class InvalidExponent(SepGLError, ValueError):
    pass


class NegativeLambda(SepGLError, ValueError):
    pass


class NumericalError(SepGLError, ArithmeticError):
    """Numerical failure (divergence, non-finite objective, failed factorization)."""


class StepSizeFailure(NumericalError):
    pass


class NonFiniteObjective(NumericalError):
    pass


class FactorizationFailure(NumericalError):
    pass


class SearchExhausted(NumericalError):
    pass


class NoFullSupport(NumericalError):
    pass


class InvalidRange(SepGLError, ValueError):
    pass


class ZeroTruth(SepGLError, ValueError):
    pass


class SingleClass(SepGLError, ValueError):
    pass


class TooFewReplicates(SepGLError, ValueError):
    pass


class InvalidOverlap(SepGLError, ValueError):
    pass


class AllZeroTruth(SepGLError, ValueError):
    pass


class ParseError(SepGLError, ValueError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class RaggedRows(ParseError):
    def __init__(self, row):
        super().__init__(row, "row length differs from the first row")
        self.row = row


class NonNumericCell(ParseError):
    pass


class EmptyAfterFilter(SepGLError, ValueError):
    pass


class PathError(SepGLError):
    """Solver failure during a path solve, tagged with the offending lambda."""

    def __init__(self, lam, cause):
        super().__init__(f"solve failed at lambda={lam!r}: {cause}")
        self.lam = lam
        self.cause = cause


class MaxSweepsExceeded(UserWarning):
    """BCD prox stopped at ``max_sweeps`` before reaching its tolerance."""
