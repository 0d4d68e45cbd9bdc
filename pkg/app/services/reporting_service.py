"""
Report rendering for Inclusion Audit.

Analyses are laid out the way they are worked by hand: the target and its
metric at the top, then the discrepancy lines, the cluster totals, and the
statement rows sorted into their item sections, followed by the original
trailing lines. Lines added by the analysis carry a `*` marker (emphasis in
markdown); double-counted rows carry `!`. JSON output carries the same
content at full precision under a versioned schema.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from app.config import Config
from app.errors import InclusionAuditError
from app.ingest.cells import format_amount, format_rate
from app.models import (
    AuditOutcome,
    CheckReport,
    Diagnosis,
    DiscrepancyReport,
    IRRSolution,
    MetricVerification,
    PartitionResult,
    Statement,
    TargetSpec,
    ZeroCheckResult,
)
from app.services.inclusion_service import (
    ALL_CLUSTERS,
    BOTTOM_PLUS_TARGET,
    INCLUDED_LESS_TARGET,
    INCLUDED_PLUS_EXCLUDED,
    TOP_PLUS_TARGET,
    ratio_targets,
    relevant_vector,
    verify_partition,
)

logger = logging.getLogger(__name__)

FORMATS = ("text", "markdown", "json")
IRR_DECIMALS = 2
RATIO_DECIMALS = 0


@dataclass
class _Line:
    label: str
    cells: List[str] = field(default_factory=list)
    marker: str = ""  # "*" added by the analysis, "!" double counted
    depth: int = 0


# --- LAYOUT ---

def _check_format(fmt: str) -> str:
    if fmt not in FORMATS:
        raise InclusionAuditError(f"unknown format {fmt!r}; choose one of {', '.join(FORMATS)}")
    return fmt


def _render_text(corner: str, header: Sequence[str], lines: List[_Line]) -> str:
    labels = ["  " * line.depth + line.label for line in lines]
    width = max([len(corner)] + [len(label) for label in labels])
    columns = max([len(header)] + [len(line.cells) for line in lines])
    widths = [0] * columns
    for cells in [list(header)] + [line.cells for line in lines]:
        for index, cell in enumerate(cells):
            widths[index] = max(widths[index], len(cell))

    def row(marker: str, label: str, cells: Sequence[str]) -> str:
        text = f"{marker or ' '} {label.ljust(width)}"
        if cells:
            text += "  " + "  ".join(cell.rjust(widths[i]) for i, cell in enumerate(cells))
        return text.rstrip()

    out = [row("", corner, header)]
    out += [row(line.marker, label, line.cells) for line, label in zip(lines, labels)]
    return "\n".join(out) + "\n"


def _render_markdown(corner: str, header: Sequence[str], lines: List[_Line]) -> str:
    columns = max([len(header)] + [len(line.cells) for line in lines])
    head = list(header) + [""] * (columns - len(header))
    out = [
        "| " + " | ".join([corner] + head) + " |",
        "|" + "---|" + "---:|" * columns,
    ]
    for line in lines:
        label = line.label.replace("|", "\\|")
        if line.marker == "*":
            label = f"**{label}**"
        elif line.marker == "!":
            label = f"_{label}_ (double counted)"
        label = "&emsp;" * line.depth + label
        cells = line.cells + [""] * (columns - len(line.cells))
        out.append("| " + " | ".join([label] + cells) + " |")
    return "\n".join(out) + "\n"


def _render(corner: str, header: Sequence[str], lines: List[_Line], fmt: str) -> str:
    if fmt == "markdown":
        return _render_markdown(corner, header, lines)
    return _render_text(corner, header, lines)


def _dump_json(document: Dict[str, Any]) -> str:
    return json.dumps({"schema": Config.SCHEMA_VERSION, **document}, indent=2) + "\n"


# --- BUILDING BLOCKS ---

def _amounts(values: Sequence[float], blanks: Sequence[bool] = (), zero: str = "-") -> List[str]:
    blanks = list(blanks) or [False] * len(values)
    return [format_amount(value, blank=flag, zero=zero) for value, flag in zip(values, blanks)]


def _row_lines(stmt: Statement, row_ids: Sequence[str], marker_of=None) -> List[_Line]:
    """Statement rows in statement order, with their headings re-emitted."""
    wanted = set(row_ids)
    lines: List[_Line] = []
    open_path: Tuple[str, ...] = ()
    for item in stmt.rows:
        if item.id not in wanted:
            continue
        if item.heading_path != open_path:
            common = 0
            while (common < min(len(open_path), len(item.heading_path))
                   and open_path[common] == item.heading_path[common]):
                common += 1
            for depth, heading in enumerate(item.heading_path[common:], start=common):
                lines.append(_Line(label=heading, depth=depth))
            open_path = item.heading_path
        marker = marker_of(item.id) if marker_of else ""
        lines.append(_Line(label=item.label, cells=_amounts(item.values, item.blank), marker=marker,
                           depth=len(item.heading_path)))
    return lines


def _trailing_lines(stmt: Statement) -> List[_Line]:
    return [
        _Line(label=row.label, cells=[cell for cell in row.cells] if row.kind != "heading" else [],
              depth=0)
        for row in stmt.trailing
    ]


def _zero_check_lines(check: Optional[ZeroCheckResult]) -> List[_Line]:
    if check is None or check.passed:
        return []
    return [_Line(label="Zero check", cells=_amounts(check.residuals, zero="0"), marker="*")]


def _metric_lines(check: Optional[MetricVerification], title: str, decimals: int, formula: str = "") -> List[_Line]:
    if check is None:
        return []
    recalculated_label = "calculated from above" if decimals == IRR_DECIMALS else "recalculated from above"
    if formula:
        recalculated_label += f" {formula}"
    discrepancy = format_rate(check.discrepancy, decimals) if check.discrepancy is not None else "n/a"
    lines = [
        _Line(label=title, marker="*"),
        _Line(label=recalculated_label, cells=[format_rate(check.recalculated, decimals)], marker="*", depth=1),
        _Line(label="reported below", cells=[format_rate(check.reported, decimals)], marker="*", depth=1),
        _Line(label="discrepancy", cells=[discrepancy], marker="*", depth=1),
    ]
    if check.note:
        lines.append(_Line(label=f"note: {check.note}", marker="*", depth=1))
    return lines


def _notes(warnings: Sequence[str]) -> List[_Line]:
    if not warnings:
        return []
    return [_Line(label="NOTES", marker="*")] + [_Line(label=text, marker="*", depth=1) for text in warnings]


def statement_document(stmt: Statement, check: Optional[ZeroCheckResult] = None) -> Dict[str, Any]:
    document = {
        "corner": stmt.corner,
        "periods": list(stmt.periods),
        "normalized": stmt.normalized,
        "rows": [
            {
                "id": item.id,
                "label": item.label,
                "heading_path": list(item.heading_path),
                "values": list(item.values),
                "role": item.role,
                "inverted": item.inverted,
            }
            for item in stmt.rows
        ],
    }
    if check is not None:
        document["zero_check"] = check.model_dump(mode="json")
    return document


# --- PARTITION REPORTS ---

def render_two_way(
    stmt: Statement,
    target: TargetSpec,
    result: PartitionResult,
    verification: Optional[DiscrepancyReport] = None,
    fmt: str = "text",
    alternatives: Sequence[PartitionResult] = (),
    diagnosis: Optional[Diagnosis] = None,
    check: Optional[ZeroCheckResult] = None,
) -> str:
    """
    Two-way report: relevant cash flow, metric check, discrepancy lines,
    totals of items, then ITEMS INCLUDED and ITEMS EXCLUDED.
    """
    fmt = _check_format(fmt)
    verification = verification or verify_partition(stmt, target, result)
    if fmt == "json":
        return _dump_json(_partition_document(stmt, target, result, verification, alternatives, diagnosis, check))

    totals = verification.cluster_totals
    lines = _zero_check_lines(check)
    lines.append(_Line(label="Relevant cash flow", cells=_amounts(relevant_vector(stmt, target)), marker="*"))
    lines += _metric_lines(verification.metric_check, target.metric_label or "IRR", IRR_DECIMALS)
    lines += [
        _Line(label="Discrepancy", marker="*"),
        _Line(label="included-relevant cash flow",
              cells=_amounts(verification.discrepancies[INCLUDED_LESS_TARGET], zero="0"), marker="*", depth=1),
        _Line(label="included+excluded",
              cells=_amounts(verification.discrepancies[INCLUDED_PLUS_EXCLUDED], zero="0"), marker="*", depth=1),
        _Line(label="Total of items", marker="*"),
        _Line(label="included", cells=_amounts(totals["included"]), marker="*", depth=1),
        _Line(label="excluded", cells=_amounts(totals["excluded"]), marker="*", depth=1),
        _Line(label="ITEMS INCLUDED", marker="*"),
    ]
    lines += _row_lines(stmt, result.rows_in("included"))
    lines.append(_Line(label="ITEMS EXCLUDED", marker="*"))
    lines += _row_lines(stmt, result.rows_in("excluded"))
    lines += _trailing_lines(stmt)
    lines += _notes(list(result.warnings) + _alternative_notes(alternatives))

    text = _render(stmt.corner, stmt.periods, lines, fmt)
    if diagnosis is not None:
        text += "\n" + render_diagnosis(diagnosis, fmt, stmt)
    return text


def render_three_way(
    stmt: Statement,
    targets: TargetSpec,
    result: PartitionResult,
    verification: Optional[DiscrepancyReport] = None,
    fmt: str = "text",
    alternatives: Sequence[PartitionResult] = (),
    diagnosis: Optional[Diagnosis] = None,
    check: Optional[ZeroCheckResult] = None,
) -> str:
    """
    Three-way report: ratio components, ratio check, the three discrepancy
    lines, totals, then the INCLUDED IN <top>, INCLUDED IN <bottom> and
    EXCLUDED sections. A double-counted row is printed in both included sections.
    """
    fmt = _check_format(fmt)
    verification = verification or verify_partition(stmt, targets, result)
    if fmt == "json":
        return _dump_json(_partition_document(stmt, targets, result, verification, alternatives, diagnosis, check))

    top_name, bottom_name = targets.top_name, targets.bottom_name
    top_target, bottom_target = ratio_targets(stmt, targets)
    totals = verification.cluster_totals
    formula = "(A)/(A+B)" if targets.ratio_definition == "share" else "(A)/(B)"
    double = set(result.double_counted)

    lines = _zero_check_lines(check)
    lines += [
        _Line(label="Ratio components", marker="*"),
        _Line(label=f"top of fraction: {top_name} (A)", cells=_amounts(top_target), marker="*", depth=1),
        _Line(label=f"bottom of fraction: {bottom_name} (B)", cells=_amounts(bottom_target), marker="*", depth=1),
    ]
    lines += _metric_lines(verification.metric_check, targets.metric_label or "Ratio", RATIO_DECIMALS, formula)
    lines += [
        _Line(label="Discrepancies", marker="*"),
        _Line(label=f"included in {top_name} + top of fraction",
              cells=_amounts(verification.discrepancies[TOP_PLUS_TARGET], zero="0"), marker="*", depth=1),
        _Line(label=f"included in {bottom_name} + bottom of fraction",
              cells=_amounts(verification.discrepancies[BOTTOM_PLUS_TARGET], zero="0"), marker="*", depth=1),
        _Line(label=f"included in {top_name} + included in {bottom_name} + excluded",
              cells=_amounts(verification.discrepancies[ALL_CLUSTERS], zero="0"), marker="*", depth=1),
        _Line(label="Totals", marker="*"),
        _Line(label=f"included in {top_name}", cells=_amounts(totals["top"]), marker="*", depth=1),
        _Line(label=f"included in {bottom_name}", cells=_amounts(totals["bottom"]), marker="*", depth=1),
        _Line(label="excluded", cells=_amounts(totals["excluded"]), marker="*", depth=1),
    ]

    def marker_of(row_id: str) -> str:
        return "!" if row_id in double else ""

    lines.append(_Line(label=f"INCLUDED IN {top_name.upper()}", marker="*"))
    lines += _row_lines(stmt, result.rows_in("top"), marker_of)
    lines.append(_Line(label=f"INCLUDED IN {bottom_name.upper()}", marker="*"))
    lines += _row_lines(stmt, result.rows_in("bottom"), marker_of)
    lines.append(_Line(label="EXCLUDED", marker="*"))
    lines += _row_lines(stmt, result.rows_in("excluded"))
    lines += _trailing_lines(stmt)
    lines += _notes(list(result.warnings) + _alternative_notes(alternatives))

    text = _render(stmt.corner, stmt.periods, lines, fmt)
    if diagnosis is not None:
        text += "\n" + render_diagnosis(diagnosis, fmt, stmt)
    return text


def render_partition(stmt: Statement, target: TargetSpec, results: Sequence[PartitionResult], fmt: str = "text",
                     diagnosis: Optional[Diagnosis] = None, check: Optional[ZeroCheckResult] = None) -> str:
    """Render the preferred result; the others travel as alternatives."""
    render = render_three_way if target.kind == "three_way" else render_two_way
    return render(stmt, target, results[0], fmt=fmt, alternatives=results[1:], diagnosis=diagnosis, check=check)


def _alternative_notes(alternatives: Sequence[PartitionResult]) -> List[str]:
    notes = []
    for number, other in enumerate(alternatives, start=2):
        chosen = [f"{row_id} ({cluster})" for row_id, cluster in other.assignment.items() if cluster != "excluded"]
        notes.append(f"alternative {number}: {', '.join(chosen) or 'all rows excluded'}")
    return notes


def _partition_document(stmt, target, result, verification, alternatives, diagnosis, check) -> Dict[str, Any]:
    document = {
        "statement": statement_document(stmt, check),
        "target": target.model_dump(mode="json"),
        "partitions": [r.model_dump(mode="json") for r in [result, *alternatives]],
        "verification": verification.model_dump(mode="json"),
    }
    if diagnosis is not None:
        document["diagnosis"] = diagnosis.model_dump(mode="json")
    return document


# --- DIAGNOSIS ---

def _severity_lines(diag: Diagnosis, periods: Sequence[str], top_name: str, bottom_name: str) -> List[_Line]:
    n = len(periods)
    lines: List[_Line] = []
    if diag.shift_findings:
        lines.append(_Line(label="TIMING SHIFTS", marker="*"))
        for finding in diag.shift_findings:
            sentence = finding.description
            if not finding.restores_zero_check:
                sentence += "; the statement still does not add up"
            lines.append(_Line(label=sentence, depth=1))
    if diag.double_count_findings:
        lines.append(_Line(label="DOUBLE COUNTING", marker="*"))
        for row_id in diag.double_count_findings:
            lines.append(_Line(label=f"row {row_id} is in both the top and the bottom of the ratio", marker="!",
                               depth=1))

    lines.append(_Line(label="RESIDUAL", marker="*"))
    if diag.kind == "three_way" and len(diag.residual) == 2 * n:
        lines.append(_Line(label=f"residual ({top_name})", cells=_amounts(diag.residual[:n], zero="0"), depth=1))
        lines.append(_Line(label=f"residual ({bottom_name})", cells=_amounts(diag.residual[n:], zero="0"), depth=1))
    else:
        lines.append(_Line(label="residual", cells=_amounts(diag.residual, zero="0"), depth=1))
    lines.append(_Line(label=f"residual norm ({diag.norm})", cells=[format_amount(diag.residual_norm, zero="0")],
                       depth=1))

    if diag.adjustments:
        lines.append(_Line(label="ADJUSTMENTS", marker="*"))
        lines += [_Line(label=line.label, cells=_amounts(line.values), marker="*", depth=1) for line in diag.adjustments]

    if diag.best_partition is not None:
        lines.append(_Line(label="CLOSEST PARTITION", marker="*"))
        for cluster in ("included", "top", "bottom", "both"):
            members = [r for r, c in diag.best_partition.assignment.items() if c == cluster]
            if members:
                lines.append(_Line(label=f"{cluster}: {', '.join(members)}", depth=1))

    if diag.decomposition_requests:
        lines.append(_Line(label="DECOMPOSITION REQUESTS", marker="*"))
        lines += [_Line(label=f"split row {row_id} into its components", depth=1)
                  for row_id in diag.decomposition_requests]
    return lines


def render_diagnosis(diag: Diagnosis, fmt: str = "text", stmt: Optional[Statement] = None,
                     target: Optional[TargetSpec] = None) -> str:
    """
    Diagnosis in severity order: timing shifts, double counting, residual,
    adjustments, closest partition, decomposition requests.
    """
    fmt = _check_format(fmt)
    if fmt == "json":
        document: Dict[str, Any] = {"diagnosis": diag.model_dump(mode="json")}
        if stmt is not None:
            document = {"statement": statement_document(stmt), **document}
        if target is not None:
            document["target"] = target.model_dump(mode="json")
        return _dump_json(document)

    n = len(diag.residual) // (2 if diag.kind == "three_way" else 1) if diag.residual else 0
    periods = list(stmt.periods) if stmt is not None else [str(p + 1) for p in range(n)]
    top_name = target.top_name if target is not None else "top"
    bottom_name = target.bottom_name if target is not None else "bottom"

    if diag.exact:
        lines = [_Line(label="DIAGNOSIS: exact, the target is reproduced", marker="*")]
    else:
        lines = [_Line(label="DIAGNOSIS: no exact partition", marker="*")]
        lines += _severity_lines(diag, periods, top_name, bottom_name)
    lines += _notes(diag.warnings)
    return _render(stmt.corner if stmt is not None else "Period", periods, lines, fmt)


# --- CHECKS ---

def render_check(stmt: Statement, check: ZeroCheckResult, fmt: str = "text") -> str:
    """The statement with its zero-check line on top."""
    fmt = _check_format(fmt)
    if fmt == "json":
        return _dump_json({"statement": statement_document(stmt, check)})
    lines = [_Line(label="Zero check", cells=_amounts(check.residuals, zero="0"), marker="*")]
    lines += _row_lines(stmt, stmt.row_ids)
    lines += _trailing_lines(stmt)
    if not check.passed:
        lines += _notes([check.message])
    return _render(stmt.corner, stmt.periods, lines, fmt)


def render_irr(
    flows: Sequence[float],
    solution: Optional[IRRSolution],
    verification: Optional[MetricVerification] = None,
    fmt: str = "text",
    periods: Optional[Sequence[str]] = None,
    error: str = "",
) -> str:
    """The cash flow, its recalculated rate and, when reported, the discrepancy block."""
    fmt = _check_format(fmt)
    if fmt == "json":
        return _dump_json({
            "flows": list(flows),
            "irr": solution.model_dump(mode="json") if solution else None,
            "verification": verification.model_dump(mode="json") if verification else None,
            "error": error or None,
        })
    periods = list(periods) if periods else [str(p) for p in range(len(flows))]
    lines = [_Line(label="Relevant cash flow", cells=_amounts(flows), marker="*")]
    if verification is not None:
        lines += _metric_lines(verification, "IRR", IRR_DECIMALS)
    else:
        rate = format_rate(solution.rate, IRR_DECIMALS) if solution else "n/a"
        lines += [_Line(label="IRR", marker="*"), _Line(label="calculated", cells=[rate], marker="*", depth=1)]
    notes = [error] if error else []
    if solution is not None and solution.possibly_non_unique:
        notes.append(f"{solution.sign_changes} sign changes: the rate may not be unique")
    lines += _notes(notes)
    return _render("Period", periods, lines, fmt)


def render_grid(report: CheckReport, fmt: str = "text") -> str:
    """Every totaled-grid identity with both sides and its delta."""
    fmt = _check_format(fmt)
    if fmt == "json":
        return _dump_json({
            "grid": {
                "passed": report.passed,
                "tolerance": report.tolerance,
                "checks": [check.model_dump(mode="json") for check in report.checks],
            }
        })

    def number(value: float) -> str:
        return format_amount(value, zero="0")

    lines = [
        _Line(label=check.name, cells=[number(check.lhs), number(check.rhs), number(check.delta),
                                       "pass" if check.passed else "FAIL"],
              marker="" if check.passed else "*")
        for check in report.checks
    ]
    return _render("Identity", ["lhs", "rhs", "delta", "status"], lines, fmt)


# --- AUDIT OUTCOMES ---

def outcome_document(stmt: Statement, outcome: AuditOutcome, with_statement: bool = True) -> Dict[str, Any]:
    verification = None
    if outcome.partitions:
        verification = verify_partition(stmt, outcome.target, outcome.partitions[0],
                                        outcome.zero_check.tolerance).model_dump(mode="json")
    document = {
        "target": outcome.target.model_dump(mode="json"),
        "partitions": [result.model_dump(mode="json") for result in outcome.partitions],
        "verification": verification,
        "findings": list(outcome.findings),
    }
    if outcome.diagnosis is not None:
        document["diagnosis"] = outcome.diagnosis.model_dump(mode="json")
    if with_statement:
        document = {"statement": statement_document(stmt, outcome.zero_check), **document}
    return document


def render_outcome(stmt: Statement, outcome: AuditOutcome, fmt: str = "text") -> str:
    """The partition report when one exists, otherwise the statement and its diagnosis."""
    fmt = _check_format(fmt)
    if fmt == "json":
        return _dump_json(outcome_document(stmt, outcome))
    if outcome.partitions:
        return render_partition(stmt, outcome.target, outcome.partitions, fmt, outcome.diagnosis, outcome.zero_check)
    text = render_check(stmt, outcome.zero_check, fmt)
    if outcome.diagnosis is not None:
        text += "\n" + render_diagnosis(outcome.diagnosis, fmt, stmt, outcome.target)
    return text


def render_outcomes(stmt: Statement, outcomes: Sequence[AuditOutcome], fmt: str = "text") -> str:
    """One report per target; JSON puts several targets under `analyses`."""
    fmt = _check_format(fmt)
    if len(outcomes) == 1:
        return render_outcome(stmt, outcomes[0], fmt)
    if fmt == "json":
        return _dump_json({
            "statement": statement_document(stmt, outcomes[0].zero_check if outcomes else None),
            "analyses": [outcome_document(stmt, outcome, with_statement=False) for outcome in outcomes],
        })
    parts = []
    for outcome in outcomes:
        title = outcome.target.name or outcome.target.kind
        heading = f"## {title}\n\n" if fmt == "markdown" else f"=== {title} ===\n"
        parts.append(heading + render_outcome(stmt, outcome, fmt))
    return "\n".join(parts)
