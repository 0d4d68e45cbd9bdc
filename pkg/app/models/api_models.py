"""
Pydantic models for the Inclusion Audit HTTP API
"""

from pydantic import BaseModel
from typing import List, Dict, Any, Optional


class AnalysisRequest(BaseModel):
    """Statement plus manifest, as the CLI reads them from files."""
    statement_csv: str  # statement table in the CSV layout of the CLI
    manifest: Optional[Dict[str, Any]] = None  # manifest JSON object
    tolerance: Optional[float] = None
    max_solutions: Optional[int] = None
    allow_overlap: Optional[bool] = None
    shift_window: Optional[int] = None
    vector: Optional[List[float]] = None  # two-way relevant cash flow, overriding the manifest
    top: Optional[List[float]] = None  # three-way targets, overriding the manifest
    bottom: Optional[List[float]] = None
    reported: Optional[float] = None


class IRRRequest(BaseModel):
    flows: List[float]
    guess: float = 0.10
    reported: Optional[float] = None
    tolerance: Optional[float] = None


class GridRequest(BaseModel):
    grid_csv: str  # last column row totals, last row column totals and grand total
    tolerance: Optional[float] = None


class AnalysisResponse(BaseModel):
    """JSON report plus the finding kinds that drive the CLI exit code."""
    status: str  # "pass" or "findings"
    findings: List[str] = []
    report: Dict[str, Any]


class HealthResponse(BaseModel):
    """Health check response model."""
    status: str
    service: str
    timestamp: str
    version: Optional[str] = None
    details: Optional[str] = None
