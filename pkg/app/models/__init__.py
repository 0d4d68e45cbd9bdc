"""
Models Package - Inclusion Audit
"""

from .api_models import (
    AnalysisRequest,
    AnalysisResponse,
    GridRequest,
    HealthResponse,
    IRRRequest,
)
from .fixture_models import (
    DetectionBenchmark,
    FaultedInstance,
    FixtureInstance,
    FixtureSpec,
)
from .manifest_models import (
    Manifest,
    SolverOptions,
    TargetSpec,
)
from .result_models import (
    AdjustmentLine,
    AuditOutcome,
    Decomposition,
    Diagnosis,
    DiscrepancyReport,
    IRRSolution,
    MetricVerification,
    PartitionResult,
    RatioComponents,
    ShiftFinding,
    SolverStats,
)
from .statement_models import (
    CellValue,
    CheckReport,
    CheckResult,
    LineItem,
    RawRow,
    RawTable,
    Statement,
    TotaledGrid,
    ZeroCheckResult,
)

__all__ = [
    # API
    "AnalysisRequest",
    "AnalysisResponse",
    "GridRequest",
    "HealthResponse",
    "IRRRequest",
    # Fixtures
    "DetectionBenchmark",
    "FaultedInstance",
    "FixtureInstance",
    "FixtureSpec",
    # Manifest
    "Manifest",
    "SolverOptions",
    "TargetSpec",
    # Results
    "AdjustmentLine",
    "AuditOutcome",
    "Decomposition",
    "Diagnosis",
    "DiscrepancyReport",
    "IRRSolution",
    "MetricVerification",
    "PartitionResult",
    "RatioComponents",
    "ShiftFinding",
    "SolverStats",
    # Statements
    "CellValue",
    "CheckReport",
    "CheckResult",
    "LineItem",
    "RawRow",
    "RawTable",
    "Statement",
    "TotaledGrid",
    "ZeroCheckResult",
]
