"""
Services Package - Inclusion Audit
"""

from . import search_engine
from .statement_service import grid_checks, grid_from_table, normalize, statement_from_raw, zero_check
from .metrics_service import irr, npv, ratio_value, solve_irr, verify_metric
from .inclusion_service import partition, three_way_partition, two_way_partition, verify_partition
from .diagnostics_service import (
    apply_decomposition,
    closest_partition,
    detect_double_count,
    detect_shift,
    diagnose,
    synthesize_adjustments,
)
from .reporting_service import (
    render_check,
    render_diagnosis,
    render_grid,
    render_irr,
    render_outcomes,
    render_partition,
)
from .fixtures_service import generate, inject_fault, run_detection_benchmark
from .audit_service import run_audit, select_targets

__all__ = [
    "search_engine",
    # Statements
    "normalize",
    "statement_from_raw",
    "zero_check",
    "grid_checks",
    "grid_from_table",
    # Metrics
    "npv",
    "irr",
    "solve_irr",
    "ratio_value",
    "verify_metric",
    # Inclusion
    "two_way_partition",
    "three_way_partition",
    "verify_partition",
    "partition",
    # Diagnostics
    "closest_partition",
    "apply_decomposition",
    "synthesize_adjustments",
    "detect_shift",
    "detect_double_count",
    "diagnose",
    # Reporting
    "render_check",
    "render_irr",
    "render_grid",
    "render_partition",
    "render_diagnosis",
    "render_outcomes",
    # Fixtures
    "generate",
    "inject_fault",
    "run_detection_benchmark",
    # Audit
    "run_audit",
    "select_targets",
]
