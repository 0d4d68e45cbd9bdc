"""
Diagnostics for Inclusion Audit.

When no combination of statement rows reproduces a target, these probes say
why: a timing shift of one row, a coarse row that needs splitting, rows that
sit on both sides of a ratio, or simply the nearest partition and the
adjustment lines that would close the gap.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from app.errors import DecompositionError
from app.models import (
    AdjustmentLine,
    Decomposition,
    Diagnosis,
    LineItem,
    PartitionResult,
    ShiftFinding,
    SolverOptions,
    SolverStats,
    Statement,
    TargetSpec,
)
from app.services import search_engine
from app.services.inclusion_service import (
    THREE_WAY_CODES,
    TWO_WAY_CODES,
    as_target_spec,
    split_rows,
    partition,
    ratio_targets,
    relevant_vector,
    source_row_ids,
    with_verification,
)
from app.services.statement_service import zero_check

logger = logging.getLogger(__name__)

MAX_DECOMPOSITION_REQUESTS = 5


# --- SEARCH SETUP ---

def _problem(stmt: Statement, spec: TargetSpec, allow_overlap: bool = False):
    """Choice arrays, target vector and code names for the search engine."""
    fixed = source_row_ids(stmt, spec)
    free, zero_rows = split_rows(stmt, fixed)
    if spec.kind == "two_way":
        target = np.asarray(relevant_vector(stmt, spec), dtype=float)
        choices = [np.stack([np.zeros(len(item.values)), np.asarray(item.values, dtype=float)]) for item in free]
        return free, zero_rows, choices, target, TWO_WAY_CODES

    top, bottom = ratio_targets(stmt, spec)
    target = -np.concatenate([np.asarray(top), np.asarray(bottom)])
    choices = []
    for item in free:
        values = np.asarray(item.values, dtype=float)
        zero = np.zeros_like(values)
        options = [np.concatenate([zero, zero]), np.concatenate([values, zero]), np.concatenate([zero, values])]
        if allow_overlap:
            options.append(np.concatenate([values, values]))
        choices.append(np.stack(options))
    return free, zero_rows, choices, target, THREE_WAY_CODES


# --- CLOSEST PARTITION ---

def closest_partition(
    stmt: Statement,
    target: Union[Sequence[float], TargetSpec],
    opts: Optional[SolverOptions] = None,
) -> Diagnosis:
    """
    The assignment whose cluster sums come nearest to the target.

    The residual is target minus the included sum (two-way), or for three-way
    the concatenation of -top_target - sum(top) and -bottom_target - sum(bottom).
    Ties go to fewer non-excluded rows, then statement order. Adjustment lines
    and decomposition requests for the residual are filled in.
    """
    opts = opts or SolverOptions()
    spec = as_target_spec(target)
    periods = len(stmt.periods)
    logger.info(f"--- Closest partition ({opts.norm} norm) ---")

    free, zero_rows, choices, vector, names = _problem(stmt, spec, opts.allow_overlap)
    outcome = search_engine.closest(choices, vector, norm=opts.norm, algorithm=opts.algorithm, ordering=opts.ordering)
    norm_value, residual = search_engine.exact_norm(outcome.codes, choices, vector, opts.norm)

    chosen = dict(zip((item.id for item in free), (names[code] for code in outcome.codes)))
    assignment = {row_id: chosen.get(row_id, "excluded") for row_id in stmt.row_ids}
    best = PartitionResult(
        kind=spec.kind,
        assignment=assignment,
        solver_stats=SolverStats(
            algorithm=outcome.algorithm, nodes_explored=outcome.nodes_explored, solutions_found=len(outcome.ties)
        ),
        double_counted=tuple(row_id for row_id, cluster in assignment.items() if cluster == "both"),
        zero_rows=tuple(zero_rows),
    )
    best = with_verification(stmt, spec, best, opts.tolerance)
    exact = norm_value <= opts.tolerance

    diagnosis = Diagnosis(
        kind=spec.kind,
        exact=exact,
        best_partition=best,
        residual=residual,
        residual_norm=norm_value,
        norm=opts.norm,
    )
    if exact:
        return diagnosis

    adjustments: List[AdjustmentLine] = []
    if spec.kind == "two_way":
        adjustments = synthesize_adjustments(residual, "adjustment", stmt.periods, tolerance=opts.tolerance)
    else:
        adjustments = synthesize_adjustments(residual[:periods], f"{spec.top_name} adjustment", stmt.periods,
                                             tolerance=opts.tolerance)
        adjustments += synthesize_adjustments(residual[periods:], f"{spec.bottom_name} adjustment", stmt.periods,
                                              tolerance=opts.tolerance)

    warnings = []
    if len(adjustments) > opts.max_adjustment_lines:
        warnings.append(
            f"{len(adjustments)} adjustment lines are needed; more than {opts.max_adjustment_lines} "
            "usually means the model is defective"
        )
    return diagnosis.model_copy(
        update={
            "adjustments": adjustments,
            "decomposition_requests": decomposition_requests(free, choices, outcome.codes, residual, opts),
            "warnings": warnings,
        }
    )


def decomposition_requests(
    free: Sequence[LineItem],
    choices: Sequence[np.ndarray],
    codes: Tuple[int, ...],
    residual: Sequence[float],
    opts: SolverOptions,
) -> List[str]:
    """
    Rows whose splitting could close part of the residual.

    A split row may send any share of each period's value to another cluster;
    the request list ranks rows by the residual norm left after the best such
    split, keeping those that improve on the current norm by more than the tolerance.
    """
    residual = np.asarray(residual, dtype=float)
    current = float(search_engine.residual_norm(residual, opts.norm))
    scored = []
    for index, (options, code) in enumerate(zip(choices, codes)):
        best = current
        for other in range(len(options)):
            if other == code:
                continue
            delta = options[other] - options[code]
            with np.errstate(divide="ignore", invalid="ignore"):
                share = np.where(delta != 0, np.clip(residual / delta, 0.0, 1.0), 0.0)
            best = min(best, float(search_engine.residual_norm(residual - share * delta, opts.norm)))
        if current - best > opts.tolerance:
            scored.append((best, index))
    scored.sort()
    return [free[index].id for _, index in scored[:MAX_DECOMPOSITION_REQUESTS]]


# --- DECOMPOSITION ---

def apply_decomposition(stmt: Statement, d: Decomposition) -> Statement:
    """
    Replace a row by sublines that add back to it, at the row's position.

    Raises:
        DecompositionError: Unknown parent, clashing ids, or sublines that do
            not sum exactly to the parent in every period.
    """
    try:
        parent = stmt.row(d.parent_id)
    except KeyError:
        raise DecompositionError(f"no row {d.parent_id!r} to decompose")
    if not d.sublines:
        raise DecompositionError("a decomposition needs at least one subline")

    periods = len(stmt.periods)
    for sub in d.sublines:
        if len(sub.values) != periods:
            raise DecompositionError(f"subline {sub.id!r} has {len(sub.values)} values for {periods} periods")
    for p in range(periods):
        total = sum((Fraction(sub.values[p]) for sub in d.sublines), Fraction(0))
        if total != Fraction(parent.values[p]):
            raise DecompositionError(
                f"sublines of {parent.id!r} sum to {float(total):g} in {stmt.periods[p]}, "
                f"the row holds {parent.values[p]:g}"
            )

    taken = set(stmt.row_ids) - {parent.id}
    for sub in d.sublines:
        if sub.id in taken:
            raise DecompositionError(f"subline id {sub.id!r} is already used")
        taken.add(sub.id)

    rows = []
    for item in stmt.rows:
        if item.id == parent.id:
            rows.extend(sub.model_copy(update={"inverted": parent.inverted}) for sub in d.sublines)
        else:
            rows.append(item)
    logger.info(f"Decomposed {parent.id} into {len(d.sublines)} lines")
    return stmt.replace_rows(rows)


def split_row(stmt: Statement, parent_id: str, parts: Sequence[Tuple[str, Sequence[float]]]) -> Decomposition:
    """Build a decomposition whose sublines sit under the parent's headings."""
    parent = stmt.row(parent_id)
    prefix = "/".join(parent.heading_path)
    sublines = tuple(
        LineItem(
            id=f"{prefix}/{label}" if prefix else label,
            heading_path=parent.heading_path,
            label=label,
            values=tuple(float(v) for v in values),
        )
        for label, values in parts
    )
    return Decomposition(parent_id=parent_id, sublines=sublines)


# --- ADJUSTMENTS ---

def synthesize_adjustments(
    residual: Sequence[float],
    label_hint: str = "adjustment",
    periods: Optional[Sequence[str]] = None,
    max_lines: Optional[int] = None,
    tolerance: Optional[float] = None,
) -> List[AdjustmentLine]:
    """
    Fewest adjustment lines that add up to the residual: one per contiguous run
    of nonzero values equal within `tolerance`. Each period is covered by at
    most one line and keeps its own value, so the lines sum to the residual
    exactly.
    """
    values = [float(v) for v in residual]
    tol = tolerance if tolerance is not None else SolverOptions().tolerance
    labels = list(periods) if periods is not None else [str(p + 1) for p in range(len(values))]
    lines: List[AdjustmentLine] = []
    p = 0
    while p < len(values):
        if values[p] == 0:
            p += 1
            continue
        end = p
        while (end + 1 < len(values) and values[end + 1] != 0
               and math.isclose(values[end + 1], values[p], rel_tol=0.0, abs_tol=tol)):
            end += 1
        span = labels[p] if end == p else f"{labels[p]}-{labels[end]}"
        line = [0.0] * len(values)
        line[p:end + 1] = values[p:end + 1]
        lines.append(AdjustmentLine(label=f"{label_hint} {span}", values=tuple(line)))
        p = end + 1

    limit = max_lines if max_lines is not None else SolverOptions().max_adjustment_lines
    if len(lines) > limit:
        logger.warning(f"{len(lines)} adjustment lines synthesized; more than {limit} is unusual")
    return lines


# --- TIMING SHIFTS ---

def shift_values(values: Sequence[float], offset: int) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """Move values `offset` periods later (earlier when negative); returns (shifted, lost)."""
    n = len(values)
    shifted = [0.0] * n
    lost = []
    for p, value in enumerate(values):
        q = p + offset
        if 0 <= q < n:
            shifted[q] = float(value)
        elif value != 0:
            lost.append(float(value))
    return tuple(shifted), tuple(lost)


def _offsets(window: int) -> List[int]:
    return [sign * k for k in range(1, window + 1) for sign in (-1, 1)]


def detect_shift(
    stmt: Statement,
    target: Union[Sequence[float], TargetSpec],
    window: Optional[int] = None,
    opts: Optional[SolverOptions] = None,
) -> List[ShiftFinding]:
    """
    Shift each row by each offset in +-window and rerun the exact search.

    Probes skip the zero check, since moving one row unbalances the statement;
    each finding records whether the shifted statement adds up again. Returns
    nothing when the unshifted statement already matches.
    """
    opts = opts or SolverOptions()
    spec = as_target_spec(target)
    window = opts.shift_window if window is None else window
    if window <= 0:
        return []

    probe_opts = opts.replace(waive_zero_check=True, max_solutions=1)
    if partition(stmt, spec, probe_opts):
        return []

    logger.info(f"--- Timing-shift probes (window {window}) ---")
    fixed = set(source_row_ids(stmt, spec))
    probes = [
        (index, offset)
        for index, item in enumerate(stmt.rows)
        if item.id not in fixed and not item.is_zero()
        for offset in _offsets(window)
    ]

    def probe(job) -> Optional[ShiftFinding]:
        index, offset = job
        item = stmt.rows[index]
        shifted, lost = shift_values(item.values, offset)
        if shifted == item.values:
            return None
        rows = list(stmt.rows)
        rows[index] = item.with_values(shifted)
        candidate = stmt.replace_rows(rows)
        found = partition(candidate, spec, probe_opts)
        if not found:
            return None
        return ShiftFinding(
            row_id=item.id,
            offset=offset,
            residual_norm=0.0,
            lossy=bool(lost),
            lost_values=lost,
            restores_zero_check=zero_check(candidate, opts.tolerance).passed,
            partition=found[0],
        )

    if opts.workers > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            outcomes = list(pool.map(probe, probes))
    else:
        outcomes = [probe(job) for job in probes]

    order = {row_id: index for index, row_id in enumerate(stmt.row_ids)}
    findings = sorted(
        (finding for finding in outcomes if finding is not None),
        key=lambda f: (f.lossy, not f.restores_zero_check, abs(f.offset), order[f.row_id], f.offset),
    )
    for finding in findings:
        logger.info(f"Shift finding: {finding.description}")
    return findings


# --- DOUBLE COUNTING ---

def detect_double_count(
    stmt: Statement,
    top_target: Union[Sequence[float], float, TargetSpec],
    bottom_target: Optional[Union[Sequence[float], float]] = None,
    opts: Optional[SolverOptions] = None,
) -> Optional[PartitionResult]:
    """
    Rerun three-way search with rows allowed in both top and bottom.

    An overlap-free solution, when one exists, is returned first and carries no
    flags. Otherwise the preferred overlap solution is returned with its "both"
    rows in `double_counted`; None when even overlap cannot reproduce the targets.
    """
    opts = opts or SolverOptions()
    if isinstance(top_target, TargetSpec):
        spec = top_target
    else:
        as_tuple = lambda value: tuple(np.atleast_1d(np.asarray(value, dtype=float)).tolist())
        spec = TargetSpec(kind="three_way", top_target=as_tuple(top_target), bottom_target=as_tuple(bottom_target))

    plain = partition(stmt, spec, opts.replace(allow_overlap=False))
    if plain:
        return plain[0]

    logger.info("--- Double-count search (overlap allowed) ---")
    overlapping = partition(stmt, spec, opts.replace(allow_overlap=True))
    if not overlapping:
        return None
    result = overlapping[0]
    if result.double_counted:
        message = f"double counted on both sides of the ratio: {', '.join(result.double_counted)}"
        logger.warning(message)
        result = result.with_checks(warnings=result.warnings + (message,))
    return result


# --- FULL DIAGNOSIS ---

def diagnose(stmt: Statement, spec: TargetSpec, opts: Optional[SolverOptions] = None) -> Diagnosis:
    """
    Explain a target, most economical explanation first: an exact partition;
    otherwise timing shifts, then double counting (three-way), then the
    closest partition with its adjustments and decomposition requests.
    """
    opts = opts or SolverOptions()
    waived = opts.replace(waive_zero_check=True)
    warnings = []
    check = zero_check(stmt, opts.tolerance)
    if not check.passed:
        warnings.append(check.message)

    exact = partition(stmt, spec, waived)
    if exact:
        best = exact[0]
        return Diagnosis(
            kind=spec.kind,
            exact=True,
            best_partition=best,
            residual=tuple(0.0 for _ in range(len(stmt.periods) * (2 if spec.kind == "three_way" else 1))),
            norm=opts.norm,
            warnings=warnings + list(best.warnings),
        )

    shifts = detect_shift(stmt, spec, opts=waived)
    double_partition = None
    double_rows: List[str] = []
    if spec.kind == "three_way":
        double_partition = detect_double_count(stmt, spec, opts=waived)
        if double_partition is not None:
            double_rows = list(double_partition.double_counted)

    closest = closest_partition(stmt, spec, waived)
    return closest.model_copy(
        update={
            "shift_findings": shifts,
            "double_count_findings": double_rows,
            "double_count_partition": double_partition,
            "warnings": warnings + list(closest.warnings),
        }
    )
