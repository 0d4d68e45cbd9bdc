#!/usr/bin/env python3
"""
Startup script for the Inclusion Audit API
"""

import sys
import uvicorn
from pathlib import Path

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from app.config import Config  # noqa: E402


def main():
    """Main startup function"""
    try:
        Config.validate()
    except ValueError as e:
        print(f"Error: {e}")
        print("Fix the INCLUSION_* settings in your .env file (see .env.example).")
        sys.exit(1)

    print("Starting Inclusion Audit API...")
    print(f"   Environment: {Config.ENVIRONMENT}")
    print(f"   Host: {Config.HOST}")
    print(f"   Port: {Config.PORT}")

    uvicorn.run(
        "app.main:app",
        host=Config.HOST,
        port=Config.PORT,
        reload=not Config.is_production(),
        log_level=Config.LOG_LEVEL.lower()
    )


if __name__ == "__main__":
    main()
