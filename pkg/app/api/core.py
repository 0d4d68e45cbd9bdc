"""
Basic API endpoints (health check, root, etc.)
"""

from datetime import datetime

from fastapi import APIRouter

from app.config import Config
from app.models import HealthResponse

router = APIRouter()

SERVICE_NAME = "Inclusion Audit API"


@router.get("/")
def read_root():
    """Root endpoint with API information."""
    return {
        "message": "Inclusion Audit - black-box checks of financial-model outputs",
        "version": Config.VERSION,
        "schema": Config.SCHEMA_VERSION,
        "endpoints": {
            "check": "/api/check - Zero check of a statement",
            "irr": "/api/irr - Recalculate an IRR",
            "include": "/api/include - Two-way inclusion analysis",
            "include3": "/api/include3 - Three-way inclusion analysis",
            "diagnose": "/api/diagnose - Explain a target that cannot be reproduced",
            "audit": "/api/audit - Every manifest target",
            "grid": "/api/grid - Totaled-grid cross-checks",
            "health": "/health - Health check",
            "docs": "/docs - API documentation"
        },
        "status": "ready"
    }


@router.get("/health", response_model=HealthResponse)
async def health_check():
    """Health check endpoint; fails when the configuration is unusable."""
    try:
        Config.validate()
    except ValueError as e:
        return HealthResponse(
            status="unhealthy",
            service=SERVICE_NAME,
            timestamp=datetime.now().isoformat(),
            version=Config.VERSION,
            details=f"Configuration error: {e}"
        )
    return HealthResponse(
        status="healthy",
        service=SERVICE_NAME,
        timestamp=datetime.now().isoformat(),
        version=Config.VERSION,
        details=f"tolerance {Config.DEFAULT_TOLERANCE}, {Config.WORKERS} worker(s)"
    )


@router.get("/status")
async def status_check():
    """Simple status check."""
    return {
        "status": "running",
        "service": SERVICE_NAME,
        "timestamp": datetime.now().isoformat(),
        "version": Config.VERSION,
        "message": "API is running"
    }
