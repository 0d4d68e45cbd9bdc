"""
API Package - Inclusion Audit
"""

from .routes import router

__all__ = ["router"]
