"""
API routes for Inclusion Audit
"""

from fastapi import APIRouter

from .core import router as core_router
from .analysis import router as analysis_router

# Create main router instance
router = APIRouter()

# Include all sub-routers
router.include_router(core_router, tags=["core"])
router.include_router(analysis_router, prefix="/api", tags=["analysis"])
