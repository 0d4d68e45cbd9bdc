"""
Statement models for Inclusion Audit: raw tables as parsed from CSV, the
normalized zero-sum statement, and the totaled grid used by the redundancy checks.
"""

from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

RowKind = Literal["heading", "data", "metric"]
RowRole = Literal["data", "bottom_line"]


class CellValue(BaseModel):
    """One parsed cell."""
    model_config = ConfigDict(frozen=True)

    value: float
    is_rate: bool = False  # "12.5%" cells are rates, not currency amounts
    blank: bool = False  # the source cell was empty (renders blank, not "-")


class RawRow(BaseModel):
    """A record of the statement file, before any normalization."""
    model_config = ConfigDict(frozen=True)

    label: str  # trimmed label
    display_label: str  # label with its original indentation
    indent: int = 0
    cells: Tuple[str, ...]  # trimmed raw cell strings
    kind: RowKind
    line: int  # 1-based record number in the source file


class RawTable(BaseModel):
    """A statement table exactly as read from file."""
    model_config = ConfigDict(frozen=True)

    corner: str = "Year"
    header: Tuple[str, ...]
    rows: Tuple[RawRow, ...]

    @model_validator(mode="after")
    def _check_shape(self):
        for row in self.rows:
            if len(row.cells) != len(self.header):
                raise ValueError(
                    f"row {row.line} has {len(row.cells)} cells for {len(self.header)} periods"
                )
            if not row.label:
                raise ValueError(f"row {row.line} has an empty label")
        return self

    @property
    def data_rows(self) -> List[RawRow]:
        return [row for row in self.rows if row.kind == "data"]

    @property
    def _last_data_index(self) -> int:
        indices = [i for i, row in enumerate(self.rows) if row.kind == "data"]
        return indices[-1] if indices else -1

    @property
    def heading_rows(self) -> List[RawRow]:
        """Headings that introduce data rows (trailing headings excluded)."""
        last = self._last_data_index
        return [row for row in self.rows[:last] if row.kind == "heading"]

    @property
    def trailing_rows(self) -> List[RawRow]:
        """Headings and metric lines after the last data row, e.g. the reported IRRs."""
        return list(self.rows[self._last_data_index + 1:])

    @property
    def bottom_line_candidate(self) -> Optional[RawRow]:
        data = self.data_rows
        return data[-1] if data else None


class LineItem(BaseModel):
    """One data row of a statement."""
    model_config = ConfigDict(frozen=True)

    id: str
    heading_path: Tuple[str, ...] = ()
    label: str
    values: Tuple[float, ...]
    role: RowRole = "data"
    inverted: bool = False
    blank: Tuple[bool, ...] = ()  # display metadata carried from the source cells

    def with_values(self, values, **changes) -> "LineItem":
        return self.model_copy(update={"values": tuple(float(v) for v in values), **changes})

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.values)


class Statement(BaseModel):
    """An ordered set of labelled row vectors over named periods."""
    model_config = ConfigDict(frozen=True)

    corner: str = "Year"
    periods: Tuple[str, ...]
    rows: Tuple[LineItem, ...]
    normalized: bool = False
    trailing: Tuple[RawRow, ...] = ()  # reproduced verbatim at the foot of reports

    @model_validator(mode="after")
    def _check_rows(self):
        if not self.periods:
            raise ValueError("a statement needs at least one period")
        seen = set()
        bottom_lines = 0
        for item in self.rows:
            if len(item.values) != len(self.periods):
                raise ValueError(
                    f"row {item.id!r} has {len(item.values)} values for {len(self.periods)} periods"
                )
            if item.id in seen:
                raise ValueError(f"duplicate row id {item.id!r}")
            seen.add(item.id)
            bottom_lines += item.role == "bottom_line"
        if bottom_lines > 1:
            raise ValueError("a statement has at most one bottom line")
        return self

    @property
    def row_ids(self) -> List[str]:
        return [item.id for item in self.rows]

    def row(self, row_id: str) -> LineItem:
        for item in self.rows:
            if item.id == row_id:
                return item
        raise KeyError(row_id)

    @property
    def bottom_line(self) -> Optional[LineItem]:
        for item in self.rows:
            if item.role == "bottom_line":
                return item
        return None

    def replace_rows(self, rows, **changes) -> "Statement":
        return self.model_copy(update={"rows": tuple(rows), **changes})


class TotaledGrid(BaseModel):
    """A table of numbers (T) with row totals (R), column totals (C) and a grand total (G)."""
    model_config = ConfigDict(frozen=True)

    body: Tuple[Tuple[float, ...], ...]
    row_totals: Tuple[float, ...]
    col_totals: Tuple[float, ...]
    grand_total: float


class CheckResult(BaseModel):
    """One identity evaluated by the grid checks."""
    name: str
    lhs: float
    rhs: float
    delta: float
    passed: bool


class CheckReport(BaseModel):
    checks: List[CheckResult]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]


class ZeroCheckResult(BaseModel):
    """Per-period residuals of the zero check."""
    residuals: Tuple[float, ...]
    passed: bool
    tolerance: float
    worst_periods: List[str] = []
    message: str = ""
