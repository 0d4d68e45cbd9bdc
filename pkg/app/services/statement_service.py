"""
Statement service for Inclusion Audit.

Turns a raw table into a zero-sum statement (invert the bottom line and any
rows off the sign convention, drop footings), runs the zero check, and
evaluates the redundant-total identities of a totaled grid.
"""

import logging
import math
from typing import List, Sequence, Union

import numpy as np

from app.config import Config
from app.errors import GridShapeError, ManifestError, TableFormatError
from app.ingest.references import RowAddress, build_addresses, resolve_reference
from app.ingest.statement_parser import parse_row_values
from app.models import (
    CheckReport,
    CheckResult,
    LineItem,
    Manifest,
    RawTable,
    Statement,
    TotaledGrid,
    ZeroCheckResult,
)

logger = logging.getLogger(__name__)


# --- NORMALIZATION ---

def _statement_addresses(stmt: Statement) -> List[RowAddress]:
    return [
        RowAddress(id=item.id, heading_path=item.heading_path, label=item.label, kind="data", position=index)
        for index, item in enumerate(stmt.rows)
    ]


def _negate(values: Sequence[float]):
    return tuple(-value if value else 0.0 for value in values)


def _from_raw(raw: RawTable, manifest: Manifest) -> Statement:
    addresses = build_addresses(raw.rows)
    dropped = {
        resolve_reference(reference, addresses, kinds=("data", "heading", "metric")).position
        for reference in manifest.drop_rows
    }
    kept = [row for position, row in enumerate(raw.rows) if position not in dropped]
    if not any(row.kind == "data" for row in kept):
        raise TableFormatError("every data row was dropped")

    last_data = max(index for index, row in enumerate(kept) if row.kind == "data")
    items = []
    trailing = []
    for index, (row, address) in enumerate(zip(kept, build_addresses(kept))):
        if row.kind == "data":
            values, blank = parse_row_values(row)
            items.append(
                LineItem(id=address.id, heading_path=address.heading_path, label=row.label,
                         values=values, blank=blank)
            )
        elif index > last_data or row.kind == "metric":
            trailing.append(row)

    return Statement(corner=raw.corner, periods=raw.header, rows=tuple(items), trailing=tuple(trailing))


def normalize(raw: Union[RawTable, Statement], manifest: Manifest) -> Statement:
    """
    Apply the manifest's sign normalization and return a statement.

    Inversion is tracked on each row, so normalizing an already normalized
    statement with the same manifest changes nothing. A failing zero check is
    not an error; it only leaves `normalized` unset.

    Raises:
        ManifestError: A reference that does not resolve to exactly one row.
    """
    if isinstance(raw, RawTable):
        stmt = _from_raw(raw, manifest)
    else:
        stmt = raw
        addresses = _statement_addresses(stmt)
        drop_ids = set()
        for reference in manifest.drop_rows:
            try:
                drop_ids.add(resolve_reference(reference, addresses).id)
            except ManifestError:
                logger.debug(f"drop reference {reference!r} already absent")
        if drop_ids:
            stmt = stmt.replace_rows(item for item in stmt.rows if item.id not in drop_ids)

    addresses = _statement_addresses(stmt)
    invert_ids = {resolve_reference(reference, addresses).id for reference in manifest.invert_rows}
    bottom_id = resolve_reference(manifest.bottom_line, addresses).id if manifest.bottom_line else None

    rows = []
    for item in stmt.rows:
        if item.id in invert_ids and not item.inverted:
            item = item.with_values(_negate(item.values), inverted=True)
        if item.id == bottom_id:
            item = item.model_copy(update={"role": "bottom_line"})
        elif bottom_id is not None and item.role == "bottom_line":
            item = item.model_copy(update={"role": "data"})
        rows.append(item)

    stmt = stmt.replace_rows(rows, normalized=False)
    check = zero_check(stmt, manifest.tolerance)
    if not check.passed:
        logger.warning(f"Zero check failed after normalization: {check.message}")
    return stmt.replace_rows(stmt.rows, normalized=check.passed)


def statement_from_raw(raw: RawTable, tolerance: float = None) -> Statement:
    """The statement exactly as printed, with no inversions."""
    return normalize(raw, Manifest(tolerance=tolerance or Config.DEFAULT_TOLERANCE))


def column_sums(rows: Sequence[LineItem], periods: int) -> tuple:
    """Per-period sums with math.fsum, so verification does not inherit float drift."""
    return tuple(math.fsum(item.values[p] for item in rows) for p in range(periods))


# --- ZERO CHECK ---

def zero_check(stmt: Statement, tol: float = None) -> ZeroCheckResult:
    """
    Sum every data row per period; the statement passes when no residual
    exceeds the tolerance.
    """
    tol = Config.DEFAULT_TOLERANCE if tol is None else tol
    residuals = column_sums(stmt.rows, len(stmt.periods))
    worst = max((abs(r) for r in residuals), default=0.0)
    passed = worst <= tol

    message = "zero check passes"
    worst_periods = []
    if not passed:
        failing = sorted(
            ((abs(r), p) for p, r in enumerate(residuals) if abs(r) > tol), key=lambda pair: (-pair[0], pair[1])
        )
        worst_periods = [stmt.periods[p] for _, p in failing]
        details = ", ".join(f"{stmt.periods[p]}: {residuals[p]:g}" for _, p in failing[:3])
        message = f"the statement does not add up ({details})"

    return ZeroCheckResult(
        residuals=residuals, passed=passed, tolerance=tol, worst_periods=worst_periods, message=message
    )


# --- GRID CHECKS ---

def _check(name: str, lhs: float, rhs: float, tol: float) -> CheckResult:
    delta = lhs - rhs
    return CheckResult(name=name, lhs=lhs, rhs=rhs, delta=delta, passed=abs(delta) <= tol)


def grid_checks(grid: TotaledGrid, tol: float = None) -> CheckReport:
    """
    Evaluate every redundant-total identity of a totaled grid: each row and
    column total against its body, SUM(R)=SUM(C), SUM(R)=G, SUM(C)=G, and
    SUM(A)=4*G where A is body, row totals, column totals and grand total together.

    Raises:
        GridShapeError: If the body is ragged or the totals do not fit it.
    """
    tol = Config.DEFAULT_TOLERANCE if tol is None else tol
    widths = {len(row) for row in grid.body}
    if len(widths) > 1:
        raise GridShapeError("grid body is not rectangular")
    n_rows, n_cols = len(grid.body), (widths.pop() if widths else 0)
    if len(grid.row_totals) != n_rows or len(grid.col_totals) != n_cols:
        raise GridShapeError(
            f"totals do not match a {n_rows}x{n_cols} body "
            f"({len(grid.row_totals)} row totals, {len(grid.col_totals)} column totals)"
        )

    body = np.array(grid.body, dtype=float).reshape(n_rows, n_cols)
    row_totals = np.array(grid.row_totals, dtype=float)
    col_totals = np.array(grid.col_totals, dtype=float)
    g = float(grid.grand_total)

    checks = []
    for i, total in enumerate(row_totals):
        checks.append(_check(f"R[{i}] = SUM(T row {i})", float(total), math.fsum(body[i, :]), tol))
    for j, total in enumerate(col_totals):
        checks.append(_check(f"C[{j}] = SUM(T column {j})", float(total), math.fsum(body[:, j]), tol))

    sum_r = math.fsum(row_totals)
    sum_c = math.fsum(col_totals)
    sum_a = math.fsum([math.fsum(body.ravel()), sum_r, sum_c, g])
    checks.append(_check("SUM(R) = SUM(C)", sum_r, sum_c, tol))
    checks.append(_check("SUM(R) = G", sum_r, g, tol))
    checks.append(_check("SUM(C) = G", sum_c, g, tol))
    checks.append(_check("SUM(A) = G * 4", sum_a, 4 * g, tol))

    report = CheckReport(checks=checks, tolerance=tol)
    if not report.passed:
        logger.info(f"Grid checks: {len(report.failures)} of {len(checks)} identities fail")
    return report


def grid_from_table(raw: RawTable) -> TotaledGrid:
    """
    Read a totaled grid from a table: the last column holds row totals and the
    last data row holds column totals with the grand total in its last cell.
    """
    data = [parse_row_values(row)[0] for row in raw.data_rows]
    if len(data) < 2 or len(raw.header) < 2:
        raise GridShapeError("a totaled grid needs at least one body row and column plus totals")
    body = tuple(tuple(row[:-1]) for row in data[:-1])
    return TotaledGrid(
        body=body,
        row_totals=tuple(row[-1] for row in data[:-1]),
        col_totals=tuple(data[-1][:-1]),
        grand_total=data[-1][-1],
    )
