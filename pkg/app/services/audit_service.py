"""
Audit pipeline for Inclusion Audit.

Runs an analysis the way it is worked by hand: normalize the statement,
check that it adds up, reproduce the target by partitioning the rows, and
when that fails explain why. Shared by the command line and the HTTP API.
"""

import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from app.errors import ManifestError
from app.ingest.manifest_parser import parse_manifest
from app.ingest.statement_parser import parse_statement
from app.models import AuditOutcome, Manifest, RawTable, SolverOptions, Statement, TargetSpec
from app.services.diagnostics_service import diagnose
from app.services.inclusion_service import partition
from app.services.statement_service import normalize, zero_check

logger = logging.getLogger(__name__)

# exit-code contract: findings are model faults, errors are tool or input faults
EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_ERROR = 2


def exit_code(findings: Iterable[str]) -> int:
    return EXIT_FINDINGS if any(True for _ in findings) else EXIT_OK


def worst_exit_code(outcomes: Sequence[AuditOutcome]) -> int:
    return max((exit_code(outcome.findings) for outcome in outcomes), default=EXIT_OK)


# --- INPUTS ---

def load_inputs(
    statement_text: str,
    manifest_text: str = "",
    base_dir: Optional[Union[str, Path]] = None,
) -> Tuple[RawTable, Manifest]:
    """Parse a statement and its manifest, checking every manifest reference against the table."""
    raw = parse_statement(statement_text)
    manifest = parse_manifest(manifest_text, table=raw, base_dir=base_dir)
    return raw, manifest


def solver_options(manifest: Manifest, **overrides) -> SolverOptions:
    """Manifest options with the manifest tolerance, then any non-None overrides."""
    return manifest.solver_options.replace(**overrides)


def select_targets(
    manifest: Manifest,
    kind: Optional[str] = None,
    top: Optional[Sequence[float]] = None,
    bottom: Optional[Sequence[float]] = None,
    vector: Optional[Sequence[float]] = None,
    reported: Optional[float] = None,
) -> List[TargetSpec]:
    """
    Targets to analyse. Command-line targets replace the manifest's; otherwise
    every manifest target of the requested kind is used (all of them when no
    kind is given).

    Raises:
        ManifestError: Nothing to analyse.
    """
    if top is not None or bottom is not None:
        if top is None or bottom is None:
            raise ManifestError("three-way analysis needs both --top and --bottom")
        base = next((t for t in manifest.all_targets if t.kind == "three_way"), None)
        changes = {"top_target": tuple(top), "bottom_target": tuple(bottom)}
        if reported is not None:
            changes["reported_metric"] = reported
        if base is not None:
            return [base.model_copy(update=changes)]
        return [TargetSpec(kind="three_way", **changes)]

    if vector is not None:
        base = next((t for t in manifest.all_targets if t.kind == "two_way"), None)
        changes = {"relevant_vector": tuple(vector), "source_rows": ()}
        if reported is not None:
            changes["reported_metric"] = reported
        if base is not None:
            return [base.model_copy(update=changes)]
        return [TargetSpec(kind="two_way", **changes)]

    targets = [t for t in manifest.all_targets if kind is None or t.kind == kind]
    if reported is not None:
        targets = [t.model_copy(update={"reported_metric": reported}) for t in targets]
    if not targets:
        wanted = f"{kind.replace('_', '-')} " if kind else ""
        raise ManifestError(f"no {wanted}target to analyse: give one in the manifest or on the command line")
    return targets


# --- PIPELINE ---

def audit_target(
    stmt: Statement,
    spec: TargetSpec,
    opts: SolverOptions,
    always_diagnose: bool = False,
) -> AuditOutcome:
    """
    Analyse one target against a normalized statement.

    A failing zero check is a finding; the search then cannot run (unless the
    check is waived) and the diagnosis explains the target instead.
    """
    logger.info(f"--- Auditing target {spec.name or spec.kind} ---")
    check = zero_check(stmt, opts.tolerance)
    findings: List[str] = []
    partitions = []
    diagnosis = None

    if not check.passed:
        findings.append("zero_check")
        logger.warning(f"Zero check failed: {check.message}")

    if check.passed or opts.waive_zero_check:
        partitions = partition(stmt, spec, opts)

    if partitions:
        best = partitions[0]
        metric = best.metric_check
        if metric is not None and metric.reported is not None and not metric.passed:
            findings.append("metric_mismatch")
        if best.double_counted:
            findings.append("double_count")
        if always_diagnose:
            diagnosis = diagnose(stmt, spec, opts)
    else:
        if check.passed or opts.waive_zero_check:
            findings.append("no_exact_partition")
        diagnosis = diagnose(stmt, spec, opts)
        if diagnosis.double_count_findings:
            findings.append("double_count")

    outcome = AuditOutcome(target=spec, zero_check=check, partitions=partitions, diagnosis=diagnosis,
                           findings=findings)
    logger.info(f"Target {spec.name or spec.kind}: {', '.join(findings) or 'all checks pass'}")
    return outcome


def run_audit(
    raw: Union[RawTable, Statement],
    manifest: Manifest,
    targets: Optional[Sequence[TargetSpec]] = None,
    opts: Optional[SolverOptions] = None,
    always_diagnose: bool = False,
) -> Tuple[Statement, List[AuditOutcome]]:
    """Normalize once, then audit every target against the same statement."""
    stmt = normalize(raw, manifest)
    opts = opts or manifest.solver_options
    targets = list(targets) if targets is not None else select_targets(manifest)
    outcomes = [audit_target(stmt, spec, opts, always_diagnose) for spec in targets]
    return stmt, outcomes
