"""
Command line for Inclusion Audit.

Exit codes are a contract: 0 when every check passes, 1 when the analysis has
findings (the statement does not add up, no exact partition, a metric
mismatch, double counting), 2 for usage and input errors. Reports go to
standard output, errors and logs to standard error.
"""

import json
import logging
import re
import sys
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import List, Optional

import typer
from pydantic import ValidationError

from app.config import Config
from app.errors import InclusionAuditError
from app.ingest import load_manifest, load_statement, parse_cell, parse_vector_file
from app.models import FixtureSpec, Manifest
from app.services import audit_service, fixtures_service, reporting_service
from app.services.audit_service import EXIT_ERROR, EXIT_FINDINGS, EXIT_OK
from app.services.metrics_service import solve_irr, verify_metric
from app.services.statement_service import grid_checks, grid_from_table, normalize, zero_check

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="inclusion-audit",
    help="Black-box verification of financial-model outputs by inclusion analysis.",
    no_args_is_help=True,
    add_completion=False,
)


class OutputFormat(str, Enum):
    text = "text"
    markdown = "markdown"
    json = "json"


class FaultChoice(str, Enum):
    none = "none"
    omission = "omission"
    double_count = "double_count"
    sign_error = "sign_error"
    timing_shift = "timing_shift"


# --- HELPERS ---

def _version_callback(value: bool):
    if value:
        typer.echo(f"inclusion-audit {Config.VERSION} (report schema {Config.SCHEMA_VERSION})")
        raise typer.Exit()


def _positive(value: Optional[float]) -> Optional[float]:
    if value is not None and value <= 0:
        raise typer.BadParameter("must be greater than zero")
    return value


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, Config.LOG_LEVEL, logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )


def parse_vector_option(text: Optional[str], name: str) -> Optional[List[float]]:
    """'(60),60,60,60,-' or '(60) 60 60 60 -' -> [-60, 60, 60, 60, 0]."""
    if text is None:
        return None
    cells = [cell for cell in re.split(r"[,;\s]+", text.strip()) if cell]
    if not cells:
        raise typer.BadParameter(f"{name} needs at least one value")
    try:
        return [parse_cell(cell, column=index + 1).value for index, cell in enumerate(cells)]
    except InclusionAuditError as e:
        raise typer.BadParameter(f"{name}: {e}")


def _rate_option(text: Optional[str]) -> Optional[float]:
    """'83.93%' or '0.8393'."""
    if text is None:
        return None
    try:
        return parse_cell(text.strip()).value
    except InclusionAuditError as e:
        raise typer.BadParameter(str(e))


def _emit(text: str, output: Optional[Path]) -> None:
    if output is None:
        typer.echo(text, nl=False)
    else:
        output.write_text(text, encoding="utf-8")
        logger.info(f"Report written to {output}")


@contextmanager
def _errors_exit_2():
    try:
        yield
    except (InclusionAuditError, ValidationError, OSError) as e:
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(EXIT_ERROR)


def _load(statement: Path, manifest: Optional[Path]):
    raw = load_statement(statement)
    loaded = load_manifest(manifest, raw) if manifest is not None else Manifest()
    return raw, loaded


StatementArg = typer.Argument(..., exists=True, dir_okay=False, readable=True, help="Statement CSV file.")
ManifestOpt = typer.Option(None, "--manifest", "-m", exists=True, dir_okay=False, readable=True,
                           help="Manifest JSON file.")
ToleranceOpt = typer.Option(None, "--tolerance", "-t", callback=_positive,
                            help="Absolute currency tolerance (default INCLUSION_TOLERANCE).")
FormatOpt = typer.Option(OutputFormat.text, "--format", "-f", help="Report format.")
OutputOpt = typer.Option(None, "--output", "-o", dir_okay=False, help="Write the report to a file.")


@app.callback()
def main(
    version: bool = typer.Option(False, "--version", callback=_version_callback, is_eager=True,
                                 help="Print the version and report schema, then exit."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging on standard error."),
):
    """Inclusion analysis for zero-sum statements."""
    _configure_logging(verbose)


# --- COMMANDS ---

@app.command()
def check(
    statement: Path = StatementArg,
    manifest: Optional[Path] = ManifestOpt,
    tolerance: Optional[float] = ToleranceOpt,
    fmt: OutputFormat = FormatOpt,
    output: Optional[Path] = OutputOpt,
):
    """Normalize the statement and run the zero check."""
    with _errors_exit_2():
        raw, loaded = _load(statement, manifest)
        if tolerance is not None:
            loaded = loaded.model_copy(update={"tolerance": tolerance})
        stmt = normalize(raw, loaded)
        result = zero_check(stmt, loaded.tolerance)
        _emit(reporting_service.render_check(stmt, result, fmt.value), output)
    raise typer.Exit(EXIT_OK if result.passed else EXIT_FINDINGS)


@app.command()
def irr(
    flows: Optional[List[str]] = typer.Argument(None, help="Cash flows, e.g. (60) 60 60 60 -"),
    file: Optional[Path] = typer.Option(None, "--file", exists=True, dir_okay=False,
                                        help="One-row CSV holding the cash flow."),
    guess: float = typer.Option(0.10, "--guess", help="Starting rate for the root search."),
    reported: Optional[str] = typer.Option(None, "--reported", help="Reported rate, e.g. 83.93%"),
    tolerance: Optional[float] = typer.Option(None, "--tolerance", "-t", callback=_positive,
                                              help="Rate tolerance (default 0.00005)."),
    fmt: OutputFormat = FormatOpt,
    output: Optional[Path] = OutputOpt,
):
    """Recalculate an IRR and compare it with the reported figure."""
    if bool(flows) == bool(file):
        raise typer.BadParameter("give the cash flows either as arguments or with --file")
    reported_rate = _rate_option(reported)
    values = parse_vector_option(" ".join(flows), "flows") if flows else None
    with _errors_exit_2():
        if file is not None:
            values = parse_vector_file(file)
        solution = solve_irr(values, guess)
        verification = None
        if reported_rate is not None:
            verification = verify_metric(solution.rate, reported_rate, tolerance, kind="irr")
        _emit(reporting_service.render_irr(values, solution, verification, fmt.value), output)
    raise typer.Exit(EXIT_FINDINGS if verification is not None and not verification.passed else EXIT_OK)


def _analyse(
    statement: Path,
    manifest: Optional[Path],
    kind: Optional[str],
    fmt: OutputFormat,
    output: Optional[Path],
    always_diagnose: bool = False,
    first_only: bool = True,
    top: Optional[str] = None,
    bottom: Optional[str] = None,
    vector: Optional[str] = None,
    reported: Optional[str] = None,
    **overrides,
):
    top_values = parse_vector_option(top, "--top")
    bottom_values = parse_vector_option(bottom, "--bottom")
    vector_values = parse_vector_option(vector, "--vector")
    reported_rate = _rate_option(reported)
    with _errors_exit_2():
        raw, loaded = _load(statement, manifest)
        opts = audit_service.solver_options(loaded, **overrides)
        targets = audit_service.select_targets(
            loaded, kind, top=top_values, bottom=bottom_values, vector=vector_values, reported=reported_rate
        )
        if first_only:
            targets = targets[:1]
        stmt, outcomes = audit_service.run_audit(raw, loaded, targets, opts, always_diagnose)
        _emit(reporting_service.render_outcomes(stmt, outcomes, fmt.value), output)
    raise typer.Exit(audit_service.worst_exit_code(outcomes))


@app.command()
def include(
    statement: Path = StatementArg,
    manifest: Optional[Path] = ManifestOpt,
    vector: Optional[str] = typer.Option(None, "--vector", help="Relevant cash flow, e.g. '(60),60,60,60,-'."),
    reported: Optional[str] = typer.Option(None, "--reported", help="Reported IRR, e.g. 83.93%"),
    tolerance: Optional[float] = ToleranceOpt,
    max_solutions: Optional[int] = typer.Option(None, "--max-solutions", min=1),
    shift_window: Optional[int] = typer.Option(None, "--shift-window", min=0),
    workers: Optional[int] = typer.Option(None, "--workers", min=1),
    waive_zero_check: bool = typer.Option(False, "--waive-zero-check"),
    fmt: OutputFormat = FormatOpt,
    output: Optional[Path] = OutputOpt,
):
    """Two-way inclusion analysis: which rows make up the relevant cash flow."""
    _analyse(statement, manifest, "two_way", fmt, output, vector=vector, reported=reported,
             tolerance=tolerance, max_solutions=max_solutions, shift_window=shift_window, workers=workers,
             waive_zero_check=waive_zero_check or None)


@app.command()
def include3(
    statement: Path = StatementArg,
    manifest: Optional[Path] = ManifestOpt,
    top: Optional[str] = typer.Option(None, "--top", help="Top of the fraction (A), scalar or per period."),
    bottom: Optional[str] = typer.Option(None, "--bottom", help="Bottom addition (B), scalar or per period."),
    reported: Optional[str] = typer.Option(None, "--reported", help="Reported ratio, e.g. 89%"),
    allow_overlap: bool = typer.Option(False, "--allow-overlap", help="Let a row sit in top and bottom."),
    tolerance: Optional[float] = ToleranceOpt,
    max_solutions: Optional[int] = typer.Option(None, "--max-solutions", min=1),
    shift_window: Optional[int] = typer.Option(None, "--shift-window", min=0),
    workers: Optional[int] = typer.Option(None, "--workers", min=1),
    fmt: OutputFormat = FormatOpt,
    output: Optional[Path] = OutputOpt,
):
    """Three-way inclusion analysis: top, bottom and excluded rows of a ratio."""
    _analyse(statement, manifest, "three_way", fmt, output, top=top, bottom=bottom, reported=reported,
             tolerance=tolerance, max_solutions=max_solutions, shift_window=shift_window, workers=workers,
             allow_overlap=allow_overlap or None)


@app.command()
def diagnose(
    statement: Path = StatementArg,
    manifest: Optional[Path] = ManifestOpt,
    vector: Optional[str] = typer.Option(None, "--vector", help="Relevant cash flow for a two-way target."),
    top: Optional[str] = typer.Option(None, "--top"),
    bottom: Optional[str] = typer.Option(None, "--bottom"),
    tolerance: Optional[float] = ToleranceOpt,
    shift_window: Optional[int] = typer.Option(None, "--shift-window", min=0),
    norm: Optional[str] = typer.Option(None, "--norm", help="Residual norm: max or l1."),
    fmt: OutputFormat = FormatOpt,
    output: Optional[Path] = OutputOpt,
):
    """Explain a target: timing shifts, double counting, closest partition and adjustments."""
    if norm is not None and norm not in ("max", "l1"):
        raise typer.BadParameter("--norm must be max or l1")
    _analyse(statement, manifest, None, fmt, output, always_diagnose=True, top=top, bottom=bottom, vector=vector,
             tolerance=tolerance, shift_window=shift_window, norm=norm)


@app.command()
def audit(
    statement: Path = StatementArg,
    manifest: Path = typer.Option(..., "--manifest", "-m", exists=True, dir_okay=False, readable=True),
    tolerance: Optional[float] = ToleranceOpt,
    fmt: OutputFormat = FormatOpt,
    output: Optional[Path] = OutputOpt,
):
    """Analyse every target of the manifest; the exit code is the worst over targets."""
    _analyse(statement, manifest, None, fmt, output, first_only=False, tolerance=tolerance)


@app.command()
def grid(
    table: Path = typer.Argument(..., exists=True, dir_okay=False, readable=True,
                                 help="Grid CSV: last column row totals, last row column totals."),
    tolerance: Optional[float] = ToleranceOpt,
    fmt: OutputFormat = FormatOpt,
    output: Optional[Path] = OutputOpt,
):
    """Check the redundant totals of a table, including SUM(A) = G * 4."""
    with _errors_exit_2():
        report = grid_checks(grid_from_table(load_statement(table)), tolerance)
        _emit(reporting_service.render_grid(report, fmt.value), output)
    raise typer.Exit(EXIT_OK if report.passed else EXIT_FINDINGS)


@app.command()
def gen(
    out: Optional[Path] = typer.Option(None, "--out", file_okay=False,
                                       help="Directory for statement.csv, manifest.json and truth.json."),
    seed: int = typer.Option(0, "--seed"),
    rows: int = typer.Option(12, "--rows", min=3),
    periods: int = typer.Option(6, "--periods", min=1),
    value_scale: float = typer.Option(1.0, "--value-scale", callback=_positive),
    kind: str = typer.Option("two_way", "--kind", help="two_way or three_way."),
    fault: FaultChoice = typer.Option(FaultChoice.none, "--fault"),
    offset: int = typer.Option(1, "--offset", help="Periods a timing_shift moves its row."),
    noise: bool = typer.Option(False, "--noise", help="Add float noise below tolerance."),
    benchmark: Optional[int] = typer.Option(None, "--benchmark", min=1,
                                            help="Instead of writing files, measure detection over N seeds."),
):
    """Generate a synthetic statement with a planted partition and an optional fault."""
    if kind not in ("two_way", "three_way"):
        raise typer.BadParameter("--kind must be two_way or three_way")
    if benchmark is None and out is None:
        raise typer.BadParameter("give --out, or --benchmark N")
    with _errors_exit_2():
        if benchmark is not None:
            if fault == FaultChoice.none:
                raise InclusionAuditError("--benchmark needs a --fault")
            result = fixtures_service.run_detection_benchmark(
                fault.value, count=benchmark, rows=rows, periods=periods, seed0=seed, offset=offset
            )
            typer.echo(json.dumps(result.model_dump(mode="json") | {"rate": result.rate}, indent=2))
            raise typer.Exit(EXIT_OK if not result.failing_seeds else EXIT_FINDINGS)

        spec = FixtureSpec(seed=seed, rows=rows, periods=periods, value_scale=value_scale, kind=kind,
                           fault=fault.value, offset=offset, noise=noise)
        faulted = fixtures_service.build(spec)
        out.mkdir(parents=True, exist_ok=True)
        for name, content in fixtures_service.instance_files(faulted).items():
            (out / name).write_text(content, encoding="utf-8")
        typer.echo(f"wrote statement.csv, manifest.json, truth.json to {out}")
    raise typer.Exit(EXIT_OK)


if __name__ == "__main__":
    app()
