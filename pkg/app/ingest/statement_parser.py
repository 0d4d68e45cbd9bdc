"""
Statement table ingestion for Inclusion Audit.

Reads the CSV realisation of a printed financial statement: a header record
``Year,<p1>,<p2>,...`` followed by ``label,c1,...,cn`` records.
"""

import csv
import io
import logging
from pathlib import Path
from typing import List, Sequence, Union

from app.errors import CellParseError, TableFormatError
from app.ingest.cells import format_amount, parse_cell
from app.models import RawRow, RawTable, Statement

logger = logging.getLogger(__name__)


def _indent_of(label: str) -> int:
    expanded = label.expandtabs(4)
    return len(expanded) - len(expanded.lstrip(" "))


def _classify(cells: Sequence[str], line: int) -> str:
    """heading: no cell holds anything; metric: only rates; data: amounts."""
    parsed = [parse_cell(text, row=line, column=column) for column, text in enumerate(cells, start=2)]
    if all(cell.blank for cell in parsed):
        return "heading"
    rates = [cell.is_rate for cell in parsed if not cell.blank]
    if all(rates):
        return "metric"
    if any(rates):
        raise TableFormatError("row mixes rates and currency amounts", row=line)
    return "data"


def parse_statement(table_text: str) -> RawTable:
    """
    Parse statement CSV text into a RawTable.

    Raises:
        TableFormatError: Ragged rows, duplicate or empty period labels, no data rows.
        CellParseError: A cell outside the grammar, with its row and column.
    """
    records = [record for record in csv.reader(io.StringIO(table_text.lstrip("﻿")))]
    records = [record for record in records if any(field.strip() for field in record)]
    if not records:
        raise TableFormatError("empty statement file")

    header = records[0]
    corner = header[0].strip() or "Year"
    periods = [field.strip() for field in header[1:]]
    if not periods:
        raise TableFormatError("header names no periods", row=1)
    if any(not period for period in periods):
        raise TableFormatError("empty period label in header", row=1)
    duplicates = sorted({period for period in periods if periods.count(period) > 1})
    if duplicates:
        raise TableFormatError(f"duplicate period labels: {', '.join(duplicates)}", row=1)

    rows: List[RawRow] = []
    for line, record in enumerate(records[1:], start=2):
        raw_label = record[0]
        cells = [field.strip() for field in record[1:]]
        if len(cells) != len(periods):
            raise TableFormatError(f"expected {len(periods)} cells, found {len(cells)}", row=line)
        label = raw_label.strip()
        if not label:
            raise TableFormatError("empty row label", row=line)
        rows.append(
            RawRow(
                label=label,
                display_label=raw_label.rstrip(),
                indent=_indent_of(raw_label),
                cells=tuple(cells),
                kind=_classify(cells, line),
                line=line,
            )
        )

    table = RawTable(corner=corner, header=tuple(periods), rows=tuple(rows))
    if not table.data_rows:
        raise TableFormatError("zero data rows")

    logger.debug(
        f"Parsed statement: {len(periods)} periods, {len(table.data_rows)} data rows, "
        f"{len(table.heading_rows)} headings"
    )
    return table


def parse_row_values(row: RawRow):
    """Values and blank flags of a data row."""
    parsed = [parse_cell(text, row=row.line, column=column) for column, text in enumerate(row.cells, start=2)]
    return tuple(cell.value for cell in parsed), tuple(cell.blank for cell in parsed)


def parse_vector_file(path: Union[str, Path]) -> List[float]:
    """Read a one-row CSV (header plus a single data row) as a vector."""
    table = parse_statement(read_text(path))
    if len(table.data_rows) != 1:
        raise TableFormatError(f"{path}: expected exactly one data row, found {len(table.data_rows)}")
    values, _ = parse_row_values(table.data_rows[0])
    return list(values)


def read_text(path: Union[str, Path]) -> str:
    return Path(path).read_text(encoding="utf-8-sig")


def load_statement(path: Union[str, Path]) -> RawTable:
    """Read and parse a statement file; errors name the file."""
    try:
        return parse_statement(read_text(path))
    except (TableFormatError, CellParseError) as e:
        raise _with_source(e, path)


def _with_source(error: Exception, path) -> Exception:
    error.args = (f"{path}: {error.args[0] if error.args else error}",)
    return error


def statement_to_csv(statement: Statement, headings: bool = True) -> str:
    """
    Write a statement back to the CSV layout, re-applying the sign conventions.

    Headings are re-emitted from the rows' heading paths.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([statement.corner, *statement.periods])
    open_path = ()
    for item in statement.rows:
        if headings and item.heading_path != open_path:
            common = 0
            while (common < min(len(open_path), len(item.heading_path))
                   and open_path[common] == item.heading_path[common]):
                common += 1
            for depth, heading in enumerate(item.heading_path[common:], start=common):
                writer.writerow(["  " * depth + heading, *([""] * len(statement.periods))])
            open_path = item.heading_path
        blank = item.blank or (False,) * len(item.values)
        writer.writerow([
            "  " * len(item.heading_path) + item.label,
            *(format_amount(value, blank=flag) for value, flag in zip(item.values, blank)),
        ])
    for row in statement.trailing:
        writer.writerow([row.display_label, *row.cells])
    return buffer.getvalue()
