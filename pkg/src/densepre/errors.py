"""Exception hierarchy shared by every module."""


class DensepreError(Exception):
    """Base class for all errors raised by densepre."""


class ConstructionError(DensepreError, ValueError):
    """Invalid input while building a sparse matrix."""


class DimensionError(DensepreError, ValueError):
    """Operand shapes do not conform."""


class MatrixMarketError(DensepreError, ValueError):
    """Malformed or unsupported Matrix Market file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ZeroRowError(DensepreError, ValueError):
    """A constraint row has no entry above the numerical-zero threshold."""


class RankDeficiencyError(DensepreError, ValueError):
    """An intermediate row of the nested construction vanished."""

    def __init__(self, row):
        self.row = row
        super().__init__(f"constraint row {row} is numerically dependent on the previous rows")


class ZeroPivotError(DensepreError, ValueError):
    pass


class UnsupportedBasisKind(DensepreError, TypeError):
    pass


class InconsistentConstraintError(DensepreError, ValueError):
    """Zero constraint row paired with a nonzero right-hand side."""


class RequiresOneSidedError(DensepreError, ValueError):
    """The two-sided method was asked to handle a nonzero (2,2) block."""


class DeskScaleOnlyError(DensepreError, ValueError):
    """A dense oracle was asked to process a problem above its size guard."""


class SingularMatrixError(DensepreError, ArithmeticError):
    def __init__(self, message, column=None):
        self.column = column
        super().__init__(message)


class SingularityError(SingularMatrixError):
    """Raised by the condition estimator when Z^T Z cannot be factored."""


class SingularReducedSystemError(SingularMatrixError):
    """The reduced system of a null space method is singular."""


class NumericalInstabilityError(DensepreError, ArithmeticError):
    def __init__(self, growth):
        self.growth = growth
        super().__init__(f"pivot growth {growth:.3e} exceeds the abort limit")


class BoundViolationError(DensepreError, AssertionError):
    """A proven structural bound failed to hold (indicates a bug)."""
