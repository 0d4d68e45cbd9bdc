"""
Result models for Inclusion Audit: metric checks, partitions, and diagnoses.
"""

from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from app.models.manifest_models import TargetSpec
from app.models.statement_models import LineItem, ZeroCheckResult

Cluster = Literal["included", "excluded", "top", "bottom", "both"]


class IRRSolution(BaseModel):
    """A rate of return together with how much to trust its uniqueness."""
    rate: float
    sign_changes: int
    possibly_non_unique: bool = False
    npv_residual: float = 0.0


class RatioComponents(BaseModel):
    """Components of a ratio; `share` is A/(A+B), `cover` is A/B."""
    top: float  # A
    bottom_extra: float  # B
    definition: Literal["share", "cover"] = "share"


class MetricVerification(BaseModel):
    """Recalculated against reported figure, as in 'calculated from above / reported below'."""
    kind: Literal["irr", "ratio"] = "irr"
    recalculated: Optional[float] = None
    reported: Optional[float] = None
    discrepancy: Optional[float] = None
    tolerance: float
    passed: bool
    note: str = ""


class SolverStats(BaseModel):
    algorithm: str
    nodes_explored: int = 0
    solutions_found: int = 0
    truncated: bool = False


class PartitionResult(BaseModel):
    """An assignment of every data row to a cluster, with its checks."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["two_way", "three_way"]
    assignment: Dict[str, Cluster]  # row id -> cluster, in statement order
    cluster_totals: Dict[str, Tuple[float, ...]] = {}
    discrepancies: Dict[str, Tuple[float, ...]] = {}
    metric_check: Optional[MetricVerification] = None
    solver_stats: Optional[SolverStats] = None
    double_counted: Tuple[str, ...] = ()
    zero_rows: Tuple[str, ...] = ()  # all-zero rows parked in excluded by convention
    warnings: Tuple[str, ...] = ()
    exact: bool = True
    max_discrepancy: float = 0.0

    def rows_in(self, *clusters: str) -> List[str]:
        """Row ids whose cluster is one of `clusters`; a "both" row counts for top and bottom."""
        wanted = set(clusters)
        if wanted & {"top", "bottom"}:
            wanted.add("both")
        return [row_id for row_id, cluster in self.assignment.items() if cluster in wanted]

    def with_checks(self, **changes) -> "PartitionResult":
        return self.model_copy(update=changes)


class DiscrepancyReport(BaseModel):
    """Everything `verify_partition` recomputes from scratch."""
    cluster_totals: Dict[str, Tuple[float, ...]]
    discrepancies: Dict[str, Tuple[float, ...]]
    metric_check: Optional[MetricVerification] = None
    max_discrepancy: float
    passed: bool
    failing_lines: List[str] = []


class Decomposition(BaseModel):
    """Replaces one coarse row by components that add back to it."""
    parent_id: str
    sublines: Tuple[LineItem, ...]


class AdjustmentLine(BaseModel):
    """A synthesized row showing a deviation between statement and metric inputs."""
    label: str
    values: Tuple[float, ...]


class ShiftFinding(BaseModel):
    """A single-row timing shift that makes the target reproducible."""
    row_id: str
    offset: int  # negative: moved earlier
    residual_norm: float = 0.0
    lossy: bool = False
    lost_values: Tuple[float, ...] = ()
    restores_zero_check: bool = False
    partition: Optional[PartitionResult] = None

    @property
    def description(self) -> str:
        periods = abs(self.offset)
        unit = "period" if periods == 1 else "periods"
        direction = "earlier" if self.offset < 0 else "later"
        sentence = f"row {self.row_id} matches when moved {periods} {unit} {direction}"
        if self.lossy:
            sentence += " (lossy: values shifted out of the statement)"
        return sentence


class Diagnosis(BaseModel):
    """Why no exact partition exists, and what comes closest."""
    kind: Literal["two_way", "three_way"] = "two_way"
    exact: bool = False
    best_partition: Optional[PartitionResult] = None
    residual: Tuple[float, ...] = ()
    residual_norm: float = 0.0
    norm: Literal["max", "l1"] = "max"
    adjustments: List[AdjustmentLine] = []
    shift_findings: List[ShiftFinding] = []
    decomposition_requests: List[str] = []
    double_count_findings: List[str] = []
    double_count_partition: Optional[PartitionResult] = None
    warnings: List[str] = []


FindingKind = Literal["zero_check", "no_exact_partition", "metric_mismatch", "double_count"]


class AuditOutcome(BaseModel):
    """Everything one target's analysis produced, plus the findings it raised."""
    target: TargetSpec
    zero_check: ZeroCheckResult
    partitions: List[PartitionResult] = []
    diagnosis: Optional[Diagnosis] = None
    findings: List[FindingKind] = []

    @property
    def passed(self) -> bool:
        return not self.findings
