"""
Fixture models for Inclusion Audit: synthetic statements with a planted
partition and seeded faults.
"""

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.manifest_models import TargetSpec
from app.models.result_models import Cluster
from app.models.statement_models import Statement

FaultKind = Literal["none", "omission", "double_count", "sign_error", "timing_shift"]


class FixtureSpec(BaseModel):
    """Recipe for one synthetic instance; identical specs give identical instances."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = 0
    rows: int = Field(default=12, ge=3)
    periods: int = Field(default=6, ge=1)
    value_scale: float = Field(default=1.0, gt=0)
    max_value: int = Field(default=50, ge=1)  # cell magnitudes before scaling
    kind: Literal["two_way", "three_way"] = "two_way"
    fault: FaultKind = "none"
    offset: int = 1  # timing_shift only; positive moves the row later
    noise: bool = False
    tolerance: float = Field(default=0.005, gt=0)

    @model_validator(mode="after")
    def _check_fault(self):
        if self.fault == "timing_shift" and self.offset == 0:
            raise ValueError("a timing shift needs a nonzero offset")
        return self


class FixtureInstance(BaseModel):
    """A statement, the target it is meant to reproduce, and the planted answer."""
    spec: FixtureSpec
    statement: Statement
    target: TargetSpec
    planted: Dict[str, Cluster]


class FaultedInstance(BaseModel):
    """An instance after fault injection, with the finding a detector should produce."""
    instance: FixtureInstance
    base: FixtureInstance  # the unfaulted instance the fault was applied to
    fault: FaultKind
    row_id: str
    offset: int = 0
    expected_finding: str


class DetectionBenchmark(BaseModel):
    """Detection rate of the designated detector for one fault kind."""
    fault: FaultKind
    count: int
    detected: int
    failing_seeds: List[int] = []
    errors: Dict[int, str] = {}

    @property
    def rate(self) -> float:
        return self.detected / self.count if self.count else 1.0

    def summary(self, limit: Optional[int] = 10) -> str:
        text = f"{self.fault}: detected {self.detected}/{self.count} ({self.rate:.1%})"
        if self.failing_seeds:
            shown = self.failing_seeds[:limit] if limit else self.failing_seeds
            text += f"; failing seeds {', '.join(str(s) for s in shown)}"
        return text
