"""
Exception types for Inclusion Audit.

Tool errors only. Model faults (a failing zero check, no exact partition,
a metric mismatch) are findings and travel inside result models instead.
"""

from typing import Optional, Sequence


class InclusionAuditError(ValueError):
    """Base class for every input or usage error raised by the engine."""


class TableFormatError(InclusionAuditError):
    """A statement table is structurally invalid (ragged, duplicate periods, empty)."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class CellParseError(InclusionAuditError):
    """A cell does not follow the statement cell grammar."""

    def __init__(self, text: str, row: Optional[int] = None, column: Optional[int] = None):
        self.text = text
        self.row = row
        self.column = column
        position = []
        if row is not None:
            position.append(f"row {row}")
        if column is not None:
            position.append(f"column {column}")
        where = f" at {', '.join(position)}" if position else ""
        super().__init__(f"malformed cell {text!r}{where}")


class ManifestError(InclusionAuditError):
    """The manifest is malformed or references rows that do not resolve."""


class ZeroCheckError(InclusionAuditError):
    """Partition search was asked to run on a statement that does not add up."""

    def __init__(self, residuals: Sequence[float], tolerance: float):
        self.residuals = list(residuals)
        self.tolerance = tolerance
        worst = max((abs(r) for r in self.residuals), default=0.0)
        super().__init__(
            f"statement fails the zero check (worst residual {worst:g} > tolerance {tolerance:g}); "
            "fix the manifest or waive the check"
        )


class UndefinedIRRError(InclusionAuditError):
    """The cash flow has no sign change, so no rate of return exists."""


class ConvergenceError(InclusionAuditError):
    """No root of the NPV function was found in the admissible rate range."""


class RatioError(InclusionAuditError):
    """A ratio cannot be evaluated (zero denominator or unknown definition)."""


class GridShapeError(InclusionAuditError):
    """Totals of a grid do not match the dimensions of its body."""


class DecompositionError(InclusionAuditError):
    """Sublines of a decomposition do not add back to their parent row."""


class FixtureError(InclusionAuditError):
    """A fixture specification or fault cannot be realised."""
