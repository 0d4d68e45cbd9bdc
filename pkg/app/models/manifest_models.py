"""
Manifest models for Inclusion Audit: normalization instructions, the target to
reproduce, and solver options.
"""

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import Config

TargetKind = Literal["two_way", "three_way"]
MetricKind = Literal["irr", "ratio"]
RatioDefinition = Literal["share", "cover"]


class SolverOptions(BaseModel):
    """Knobs for the partition search and the diagnostics built on it."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    tolerance: float = Field(default_factory=lambda: Config.DEFAULT_TOLERANCE, gt=0)
    max_solutions: int = Field(default_factory=lambda: Config.MAX_SOLUTIONS, ge=1)
    allow_overlap: bool = False
    ordering: Literal["fewest_rows", "statement_order"] = "fewest_rows"
    algorithm: Literal["auto", "exhaustive", "meet_in_middle"] = "auto"
    workers: int = Field(default_factory=lambda: Config.WORKERS, ge=1)
    waive_zero_check: bool = False
    shift_window: int = Field(default_factory=lambda: Config.SHIFT_WINDOW, ge=0)
    norm: Literal["max", "l1"] = Field(default_factory=lambda: Config.NORM)
    max_adjustment_lines: int = Field(default_factory=lambda: Config.MAX_ADJUSTMENT_LINES, ge=1)

    def replace(self, **changes) -> "SolverOptions":
        return self.model_copy(update={k: v for k, v in changes.items() if v is not None})


class TargetSpec(BaseModel):
    """The quantity to reproduce from the statement."""
    model_config = ConfigDict(frozen=True)

    name: str = ""
    kind: TargetKind = "two_way"
    relevant_vector: Optional[Tuple[float, ...]] = None  # two-way: the relevant cash flow
    source_rows: Tuple[str, ...] = ()  # statement rows the relevant vector was taken from
    top_target: Optional[Tuple[float, ...]] = None  # three-way
    bottom_target: Optional[Tuple[float, ...]] = None
    reported_metric: Optional[float] = None
    metric_kind: Optional[MetricKind] = None
    ratio_definition: RatioDefinition = "share"
    metric_tolerance: Optional[float] = None
    guess: float = 0.10
    top_name: str = "debt"
    bottom_name: str = "equity"
    metric_label: str = ""

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == "three_way":
            if self.top_target is None or self.bottom_target is None:
                raise ValueError("a three-way target needs both top and bottom targets")
            if len(self.top_target) != len(self.bottom_target):
                raise ValueError("top and bottom targets differ in length")
        elif self.relevant_vector is None and not self.source_rows:
            raise ValueError("a two-way target needs a relevant vector or source rows")
        return self

    @property
    def effective_metric_kind(self) -> MetricKind:
        if self.metric_kind:
            return self.metric_kind
        return "ratio" if self.kind == "three_way" else "irr"

    @property
    def effective_metric_tolerance(self) -> float:
        if self.metric_tolerance is not None:
            return self.metric_tolerance
        return Config.RATE_TOLERANCE if self.effective_metric_kind == "irr" else Config.RATIO_TOLERANCE


class Manifest(BaseModel):
    """Declarative normalization and target instructions for one statement."""
    model_config = ConfigDict(frozen=True)

    invert_rows: Tuple[str, ...] = ()
    bottom_line: Optional[str] = None
    drop_rows: Tuple[str, ...] = ()
    target: Optional[TargetSpec] = None
    targets: Tuple[TargetSpec, ...] = ()
    tolerance: float = Field(default_factory=lambda: Config.DEFAULT_TOLERANCE)
    options: SolverOptions = Field(default_factory=SolverOptions)

    @model_validator(mode="before")
    @classmethod
    def _bottom_line_is_inverted(cls, data):
        # the bottom line closes the statement only once its sign is flipped
        if isinstance(data, dict) and data.get("bottom_line"):
            invert = tuple(data.get("invert_rows") or ())
            folded = {" ".join(label.split()).casefold() for label in invert}
            if " ".join(data["bottom_line"].split()).casefold() not in folded:
                data = {**data, "invert_rows": invert + (data["bottom_line"],)}
        return data

    @field_validator("tolerance")
    @classmethod
    def _positive_tolerance(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("tolerance must be positive")
        return value

    @property
    def all_targets(self) -> List[TargetSpec]:
        found = [self.target] if self.target is not None else []
        return found + list(self.targets)

    @property
    def solver_options(self) -> SolverOptions:
        return self.options.replace(tolerance=self.tolerance)
