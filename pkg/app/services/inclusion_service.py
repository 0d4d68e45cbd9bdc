"""
Inclusion analysis for Inclusion Audit.

Two-way analysis splits the statement rows into included and excluded so that
the included rows reproduce the relevant cash flow of a metric; three-way
analysis splits them into the top and bottom of a ratio and the rest. Every
result is verified from scratch, independently of the search that found it.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.errors import InclusionAuditError, ManifestError, ZeroCheckError
from app.ingest.references import RowAddress, resolve_reference
from app.models import (
    DiscrepancyReport,
    MetricVerification,
    PartitionResult,
    RatioComponents,
    SolverOptions,
    SolverStats,
    Statement,
    TargetSpec,
)
from app.services import search_engine
from app.services.metrics_service import ratio_value, solve_irr, verify_metric
from app.services.statement_service import zero_check

logger = logging.getLogger(__name__)

Vector = Sequence[float]

TWO_WAY_CODES = {0: "excluded", 1: "included"}
THREE_WAY_CODES = {0: "excluded", 1: "top", 2: "bottom", 3: "both"}

# discrepancy line keys, in report order
INCLUDED_LESS_TARGET = "included-relevant"
INCLUDED_PLUS_EXCLUDED = "included+excluded"
TOP_PLUS_TARGET = "top+top_target"
BOTTOM_PLUS_TARGET = "bottom+bottom_target"
ALL_CLUSTERS = "top+bottom+excluded"


# --- TARGETS ---

def _addresses(stmt: Statement) -> List[RowAddress]:
    return [
        RowAddress(id=item.id, heading_path=item.heading_path, label=item.label, kind="data", position=index)
        for index, item in enumerate(stmt.rows)
    ]


def source_row_ids(stmt: Statement, spec: Optional[TargetSpec]) -> List[str]:
    """Ids of the statement rows a target's relevant vector was taken from."""
    if spec is None or not spec.source_rows:
        return []
    addresses = _addresses(stmt)
    return [resolve_reference(reference, addresses).id for reference in spec.source_rows]


def _fit(vector: Vector, periods: int, name: str) -> Tuple[float, ...]:
    values = tuple(float(v) for v in vector)
    if len(values) == 1 and periods > 1:
        values = values * periods
    if len(values) != periods:
        raise ManifestError(f"{name} has {len(values)} values for {periods} periods")
    return values


def relevant_vector(stmt: Statement, spec: TargetSpec) -> Tuple[float, ...]:
    """
    The two-way target: the inline vector, or the sum of the named source rows.

    Raises:
        ManifestError: Wrong length or unresolved source rows.
    """
    periods = len(stmt.periods)
    if spec.relevant_vector is not None:
        values = tuple(float(v) for v in spec.relevant_vector)
        if len(values) != periods:
            raise ManifestError(f"relevant vector has {len(values)} values for {periods} periods")
        return values
    rows = [stmt.row(row_id) for row_id in source_row_ids(stmt, spec)]
    return tuple(math.fsum(item.values[p] for item in rows) for p in range(periods))


def ratio_targets(stmt: Statement, spec: TargetSpec) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    periods = len(stmt.periods)
    return _fit(spec.top_target, periods, "top target"), _fit(spec.bottom_target, periods, "bottom target")


def as_target_spec(target: Union[Vector, TargetSpec]) -> TargetSpec:
    if isinstance(target, TargetSpec):
        return target
    return TargetSpec(kind="two_way", relevant_vector=tuple(float(v) for v in target))


# --- METRICS ---

def _two_way_metric(included: Tuple[float, ...], spec: TargetSpec) -> Optional[MetricVerification]:
    if spec.reported_metric is None and not spec.metric_kind:
        return None
    kind = spec.effective_metric_kind
    tolerance = spec.effective_metric_tolerance
    try:
        recalculated = solve_irr(included, spec.guess).rate
    except InclusionAuditError as e:
        return MetricVerification(
            kind=kind, reported=spec.reported_metric, tolerance=tolerance, passed=False, note=str(e)
        )
    return verify_metric(recalculated, spec.reported_metric, tolerance, kind=kind)


def ratio_components(top: Tuple[float, ...], bottom: Tuple[float, ...], definition: str = "share") -> RatioComponents:
    """A and B as positive amounts, read off the final period of the cluster totals."""
    return RatioComponents(top=-top[-1], bottom_extra=-bottom[-1], definition=definition)


def _three_way_metric(
    top: Tuple[float, ...], bottom: Tuple[float, ...], spec: TargetSpec
) -> Optional[MetricVerification]:
    if spec.reported_metric is None and not spec.metric_kind:
        return None
    kind = spec.effective_metric_kind
    tolerance = spec.effective_metric_tolerance
    try:
        recalculated = ratio_value(ratio_components(top, bottom, spec.ratio_definition))
    except InclusionAuditError as e:
        return MetricVerification(
            kind=kind, reported=spec.reported_metric, tolerance=tolerance, passed=False, note=str(e)
        )
    return verify_metric(recalculated, spec.reported_metric, tolerance, kind=kind)


# --- VERIFICATION ---

def _sum_rows(stmt: Statement, row_ids: Sequence[str]) -> Tuple[float, ...]:
    rows = [stmt.row(row_id) for row_id in row_ids]
    return tuple(math.fsum(item.values[p] for item in rows) for p in range(len(stmt.periods)))


def _plus(*vectors: Tuple[float, ...]) -> Tuple[float, ...]:
    return tuple(math.fsum(values) for values in zip(*vectors))


def verify_partition(
    stmt: Statement,
    target: Union[Vector, TargetSpec],
    result: PartitionResult,
    tol: Optional[float] = None,
) -> DiscrepancyReport:
    """
    Recompute every cluster total, discrepancy line and the metric for an
    assignment. Nothing is taken from the search; failures come back as deltas.

    Args:
        stmt: The statement the assignment refers to.
        target: Relevant vector, or a full target specification.
        result: The assignment to check.
        tol: Currency tolerance for the discrepancy lines.
    """
    spec = as_target_spec(target)
    tol = SolverOptions().tolerance if tol is None else tol
    failing: List[str] = []

    missing = [row_id for row_id in stmt.row_ids if row_id not in result.assignment]
    unknown = [row_id for row_id in result.assignment if row_id not in set(stmt.row_ids)]
    failing += [f"row {row_id} is not assigned" for row_id in missing]
    failing += [f"row {row_id} is not in the statement" for row_id in unknown]
    assignment = {row_id: cluster for row_id, cluster in result.assignment.items() if row_id not in unknown}

    def rows(*clusters):
        return [row_id for row_id in stmt.row_ids if assignment.get(row_id) in clusters]

    metric_check = None
    if spec.kind == "two_way":
        relevant = relevant_vector(stmt, spec)
        included = _sum_rows(stmt, rows("included"))
        excluded = _sum_rows(stmt, rows("excluded"))
        totals = {"included": included, "excluded": excluded}
        discrepancies = {
            INCLUDED_LESS_TARGET: tuple(a - b for a, b in zip(included, relevant)),
            INCLUDED_PLUS_EXCLUDED: _plus(included, excluded),
        }
        metric_check = _two_way_metric(included, spec)
    else:
        top_target, bottom_target = ratio_targets(stmt, spec)
        top = _sum_rows(stmt, rows("top", "both"))
        bottom = _sum_rows(stmt, rows("bottom", "both"))
        excluded = _sum_rows(stmt, rows("excluded"))
        # each row counted once, "both" rows included
        once = _sum_rows(stmt, rows("top", "bottom", "both", "excluded"))
        totals = {"top": top, "bottom": bottom, "excluded": excluded}
        discrepancies = {
            TOP_PLUS_TARGET: _plus(top, top_target),
            BOTTOM_PLUS_TARGET: _plus(bottom, bottom_target),
            ALL_CLUSTERS: once,
        }
        metric_check = _three_way_metric(top, bottom, spec)

    worst = 0.0
    for name, values in discrepancies.items():
        line_worst = max((abs(v) for v in values), default=0.0)
        worst = max(worst, line_worst)
        if line_worst > tol:
            failing.append(name)
    if metric_check is not None and metric_check.reported is not None and not metric_check.passed:
        failing.append("metric")

    return DiscrepancyReport(
        cluster_totals=totals,
        discrepancies=discrepancies,
        metric_check=metric_check,
        max_discrepancy=worst,
        passed=not failing,
        failing_lines=failing,
    )


def with_verification(stmt: Statement, spec: TargetSpec, result: PartitionResult, tol: float) -> PartitionResult:
    report = verify_partition(stmt, spec, result, tol)
    matched = all(
        name not in report.failing_lines for name in (INCLUDED_LESS_TARGET, TOP_PLUS_TARGET, BOTTOM_PLUS_TARGET)
    )
    return result.with_checks(
        cluster_totals=report.cluster_totals,
        discrepancies=report.discrepancies,
        metric_check=report.metric_check,
        max_discrepancy=report.max_discrepancy,
        exact=matched,
    )


# --- SEARCH ---

def _require_balanced(stmt: Statement, opts: SolverOptions) -> None:
    if opts.waive_zero_check:
        return
    check = zero_check(stmt, opts.tolerance)
    if not check.passed:
        raise ZeroCheckError(check.residuals, opts.tolerance)


def split_rows(stmt: Statement, fixed: Sequence[str]):
    """Rows that take part in the search, plus the all-zero rows parked in excluded."""
    fixed = set(fixed)
    zero_rows = [item.id for item in stmt.rows if item.id not in fixed and item.is_zero()]
    free = [item for item in stmt.rows if item.id not in fixed and item.id not in zero_rows]
    return free, zero_rows


def _multiplicity_warning(solutions: List[Tuple[int, ...]], found: int, free_ids: List[str], names) -> Optional[str]:
    if found <= 1:
        return None
    first, second = solutions[0], solutions[1] if len(solutions) > 1 else None
    text = f"{found} partitions reproduce the target"
    if second is not None:
        differing = [
            f"{row_id} ({names[a]} vs {names[b]})"
            for row_id, a, b in zip(free_ids, first, second) if a != b
        ]
        text += f"; the next preferred differs at {', '.join(differing)}"
    return text


def _run(
    stmt: Statement,
    spec: TargetSpec,
    kind: str,
    choices_of,
    target_vector: np.ndarray,
    names: Dict[int, str],
    opts: SolverOptions,
) -> List[PartitionResult]:
    fixed = source_row_ids(stmt, spec)
    free, zero_rows = split_rows(stmt, fixed)
    choices = [choices_of(np.asarray(item.values, dtype=float)) for item in free]

    outcome = search_engine.search(
        choices,
        target_vector,
        tolerance=opts.tolerance,
        max_solutions=opts.max_solutions,
        algorithm=opts.algorithm,
        workers=opts.workers,
        ordering=opts.ordering,
    )

    warnings = [f"row {row_id} is all zeros and is assigned to excluded" for row_id in zero_rows]
    free_ids = [item.id for item in free]
    multiplicity = _multiplicity_warning(outcome.solutions, outcome.solutions_found, free_ids, names)
    if multiplicity:
        warnings.append(multiplicity)
        logger.warning(multiplicity)
    if outcome.truncated:
        warnings.append(f"search truncated after {outcome.solutions_found} matches")

    stats = SolverStats(
        algorithm=outcome.algorithm,
        nodes_explored=outcome.nodes_explored,
        solutions_found=outcome.solutions_found,
        truncated=outcome.truncated,
    )

    results = []
    for codes in outcome.solutions:
        chosen = dict(zip(free_ids, (names[code] for code in codes)))
        assignment = {row_id: chosen.get(row_id, "excluded") for row_id in stmt.row_ids}
        result = PartitionResult(
            kind=kind,
            assignment=assignment,
            solver_stats=stats,
            double_counted=tuple(row_id for row_id, cluster in assignment.items() if cluster == "both"),
            zero_rows=tuple(zero_rows),
            warnings=tuple(warnings),
        )
        results.append(with_verification(stmt, spec, result, opts.tolerance))

    logger.info(
        f"{kind} search over {len(free)} rows ({outcome.algorithm}): {outcome.solutions_found} solutions, "
        f"{outcome.nodes_explored} nodes"
    )
    return results


def two_way_partition(
    stmt: Statement,
    target: Union[Vector, TargetSpec],
    opts: Optional[SolverOptions] = None,
) -> List[PartitionResult]:
    """
    Find every split of the rows into included and excluded whose included
    rows sum to the relevant vector in each period.

    Args:
        stmt: A normalized statement.
        target: The relevant vector, or a target specification (which also
            supplies source rows and the reported metric to check).
        opts: Solver options.

    Returns:
        Results in preference order; an empty list when no split exists.

    Raises:
        ZeroCheckError: The statement does not add up and the check is not waived.
    """
    opts = opts or SolverOptions()
    spec = as_target_spec(target)
    logger.info(f"--- Two-way inclusion analysis: {len(stmt.rows)} rows, {len(stmt.periods)} periods ---")
    _require_balanced(stmt, opts)
    relevant = np.asarray(relevant_vector(stmt, spec), dtype=float)

    def choices_of(values):
        return np.stack([np.zeros_like(values), values])

    return _run(stmt, spec, "two_way", choices_of, relevant, TWO_WAY_CODES, opts)


def three_way_partition(
    stmt: Statement,
    top_target: Union[Vector, float, TargetSpec],
    bottom_target: Optional[Union[Vector, float]] = None,
    opts: Optional[SolverOptions] = None,
) -> List[PartitionResult]:
    """
    Find every assignment of rows to top, bottom and excluded with
    sum(top) + top_target = 0 and sum(bottom) + bottom_target = 0.

    Scalar targets apply to every period. With `opts.allow_overlap` a row may
    also be assigned "both"; such rows are listed in `double_counted`.

    Raises:
        ZeroCheckError: The statement does not add up and the check is not waived.
    """
    opts = opts or SolverOptions()
    if isinstance(top_target, TargetSpec):
        spec = top_target
    else:
        as_tuple = lambda value: tuple(np.atleast_1d(np.asarray(value, dtype=float)).tolist())
        spec = TargetSpec(kind="three_way", top_target=as_tuple(top_target), bottom_target=as_tuple(bottom_target))
    logger.info(f"--- Three-way inclusion analysis: {len(stmt.rows)} rows, {len(stmt.periods)} periods ---")
    _require_balanced(stmt, opts)
    top, bottom = ratio_targets(stmt, spec)
    target = -np.concatenate([np.asarray(top), np.asarray(bottom)])

    def choices_of(values):
        zero = np.zeros_like(values)
        options = [np.concatenate([zero, zero]), np.concatenate([values, zero]), np.concatenate([zero, values])]
        if opts.allow_overlap:
            options.append(np.concatenate([values, values]))
        return np.stack(options)

    return _run(stmt, spec, "three_way", choices_of, target, THREE_WAY_CODES, opts)


def partition(stmt: Statement, spec: TargetSpec, opts: Optional[SolverOptions] = None) -> List[PartitionResult]:
    """Dispatch on the target kind."""
    if spec.kind == "three_way":
        return three_way_partition(stmt, spec, opts=opts)
    return two_way_partition(stmt, spec, opts)
