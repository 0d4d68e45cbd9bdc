"""
Analysis API endpoints for Inclusion Audit.

Each endpoint mirrors a CLI subcommand and answers with the JSON report. Input
errors become 400 responses; analysis findings are part of a 200 response.
"""

import json
import logging
from typing import Optional

from fastapi import APIRouter, HTTPException
from pydantic import ValidationError

from app.errors import InclusionAuditError
from app.ingest import parse_statement
from app.models import AnalysisRequest, AnalysisResponse, GridRequest, IRRRequest
from app.services import audit_service, reporting_service
from app.services.metrics_service import solve_irr, verify_metric
from app.services.statement_service import grid_checks, grid_from_table, normalize, zero_check

logger = logging.getLogger(__name__)

router = APIRouter()


def _bad_request(error: Exception) -> HTTPException:
    logger.warning(f"Rejected request: {error}")
    return HTTPException(status_code=400, detail=str(error))


def _response(report_json: str, findings) -> AnalysisResponse:
    findings = list(findings)
    return AnalysisResponse(
        status="findings" if findings else "pass",
        findings=findings,
        report=json.loads(report_json),
    )


def _analyse(request: AnalysisRequest, kind: Optional[str], always_diagnose: bool = False,
             first_only: bool = True) -> AnalysisResponse:
    try:
        raw, manifest = audit_service.load_inputs(
            request.statement_csv, json.dumps(request.manifest) if request.manifest else ""
        )
        opts = audit_service.solver_options(
            manifest,
            tolerance=request.tolerance,
            max_solutions=request.max_solutions,
            allow_overlap=request.allow_overlap,
            shift_window=request.shift_window,
        )
        targets = audit_service.select_targets(
            manifest, kind, top=request.top, bottom=request.bottom, vector=request.vector,
            reported=request.reported,
        )
        if first_only:
            targets = targets[:1]
        stmt, outcomes = audit_service.run_audit(raw, manifest, targets, opts, always_diagnose)
    except (InclusionAuditError, ValidationError) as e:
        raise _bad_request(e)
    except Exception as e:
        logger.error(f"Error in analysis endpoint: {e}")
        raise HTTPException(status_code=500, detail="analysis failed")

    findings = []
    for outcome in outcomes:
        findings += [finding for finding in outcome.findings if finding not in findings]
    return _response(reporting_service.render_outcomes(stmt, outcomes, "json"), findings)


# --- ENDPOINTS ---

@router.post("/check", response_model=AnalysisResponse)
async def check(request: AnalysisRequest):
    """Normalize the statement and run the zero check."""
    try:
        raw, manifest = audit_service.load_inputs(
            request.statement_csv, json.dumps(request.manifest) if request.manifest else ""
        )
        tolerance = request.tolerance or manifest.tolerance
        stmt = normalize(raw, manifest)
        result = zero_check(stmt, tolerance)
    except (InclusionAuditError, ValidationError) as e:
        raise _bad_request(e)
    return _response(reporting_service.render_check(stmt, result, "json"),
                     [] if result.passed else ["zero_check"])


@router.post("/irr", response_model=AnalysisResponse)
async def irr(request: IRRRequest):
    """Recalculate an IRR and compare it with the reported figure."""
    try:
        solution = solve_irr(request.flows, request.guess)
    except InclusionAuditError as e:
        raise _bad_request(e)
    verification = None
    if request.reported is not None:
        verification = verify_metric(solution.rate, request.reported, request.tolerance, kind="irr")
    findings = ["metric_mismatch"] if verification is not None and not verification.passed else []
    return _response(reporting_service.render_irr(request.flows, solution, verification, "json"), findings)


@router.post("/include", response_model=AnalysisResponse)
async def include(request: AnalysisRequest):
    """Two-way inclusion analysis."""
    return _analyse(request, "two_way")


@router.post("/include3", response_model=AnalysisResponse)
async def include3(request: AnalysisRequest):
    """Three-way inclusion analysis."""
    return _analyse(request, "three_way")


@router.post("/diagnose", response_model=AnalysisResponse)
async def diagnose(request: AnalysisRequest):
    """Timing shifts, double counting, closest partition and adjustments for the first target."""
    return _analyse(request, None, always_diagnose=True)


@router.post("/audit", response_model=AnalysisResponse)
async def audit(request: AnalysisRequest):
    """Every target of the manifest."""
    return _analyse(request, None, first_only=False)


@router.post("/grid", response_model=AnalysisResponse)
async def grid(request: GridRequest):
    """Totaled-grid cross-checks."""
    try:
        report = grid_checks(grid_from_table(parse_statement(request.grid_csv)), request.tolerance)
    except InclusionAuditError as e:
        raise _bad_request(e)
    return _response(reporting_service.render_grid(report, "json"),
                     [] if report.passed else ["grid_check"])
