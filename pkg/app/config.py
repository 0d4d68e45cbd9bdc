import os
from dotenv import load_dotenv


class Config:
    """Configuration class for Inclusion Audit"""

    # Load environment variables
    load_dotenv()

    VERSION = "1.0.0"
    SCHEMA_VERSION = 1

    # Engine defaults (manifest and CLI flags override these)
    DEFAULT_TOLERANCE = float(os.getenv("INCLUSION_TOLERANCE", "0.005"))
    MAX_SOLUTIONS = int(os.getenv("INCLUSION_MAX_SOLUTIONS", "16"))
    WORKERS = int(os.getenv("INCLUSION_WORKERS", "1"))
    EXHAUSTIVE_LIMIT = int(os.getenv("INCLUSION_EXHAUSTIVE_LIMIT", str(2 ** 24)))
    SOLUTION_CAP = int(os.getenv("INCLUSION_SOLUTION_CAP", "100000"))

    # Diagnostics
    SHIFT_WINDOW = int(os.getenv("INCLUSION_SHIFT_WINDOW", "2"))
    NORM = os.getenv("INCLUSION_NORM", "max").lower()
    MAX_ADJUSTMENT_LINES = int(os.getenv("INCLUSION_MAX_ADJUSTMENT_LINES", "4"))

    # Metric tolerances tied to display precision of the reported figure
    RATE_TOLERANCE = 0.00005   # two-decimal percent, e.g. 83.93%
    RATIO_TOLERANCE = 0.005    # integer percent, e.g. 89%

    # Production Settings
    ENVIRONMENT = os.getenv("ENVIRONMENT", "development")
    HOST = os.getenv("HOST", "0.0.0.0")
    PORT = int(os.getenv("PORT", 8000))
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

    @classmethod
    def is_production(cls):
        """Check if running in production environment"""
        return cls.ENVIRONMENT.lower() == "production"

    @classmethod
    def validate(cls):
        """Validate the numeric engine settings loaded from the environment"""
        checks = [
            ("INCLUSION_TOLERANCE", cls.DEFAULT_TOLERANCE > 0),
            ("INCLUSION_MAX_SOLUTIONS", cls.MAX_SOLUTIONS >= 1),
            ("INCLUSION_WORKERS", cls.WORKERS >= 1),
            ("INCLUSION_EXHAUSTIVE_LIMIT", cls.EXHAUSTIVE_LIMIT >= 1),
            ("INCLUSION_SOLUTION_CAP", cls.SOLUTION_CAP >= 1),
            ("INCLUSION_SHIFT_WINDOW", cls.SHIFT_WINDOW >= 0),
            ("INCLUSION_NORM", cls.NORM in ("max", "l1")),
            ("INCLUSION_MAX_ADJUSTMENT_LINES", cls.MAX_ADJUSTMENT_LINES >= 1),
        ]

        invalid_vars = [name for name, ok in checks if not ok]

        if invalid_vars:
            raise ValueError(f"Invalid configuration values: {', '.join(invalid_vars)}")

        return True
