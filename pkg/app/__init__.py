"""
Inclusion Audit - Main Application Package
"""

# Core configuration
from .config import Config

# Expose main components
__all__ = [
    "Config",
]
