"""Configuration module for the measurement simulator."""

import os

# Load environment variables
try:
    from dotenv import load_dotenv

    load_dotenv()
except ImportError:
    pass  # dotenv not available


class Settings:
    """Application settings loaded from environment variables."""

    # Output
    QMEAS_OUTPUT_DIR: str = os.environ.get("QMEAS_OUTPUT_DIR", "output")

    # Logging
    LOG_LEVEL: str = os.environ.get("LOG_LEVEL", "INFO")
    LOG_FILE: str = os.environ.get("LOG_FILE", "")

    # Numerical tolerances
    QMEAS_EIG_REL_TOL: float = float(os.environ.get("QMEAS_EIG_REL_TOL", "1e-9"))
    QMEAS_HERMITIAN_TOL: float = float(os.environ.get("QMEAS_HERMITIAN_TOL", "1e-10"))
    QMEAS_STATE_TOL: float = float(os.environ.get("QMEAS_STATE_TOL", "1e-10"))
    QMEAS_PROB_FLOOR: float = float(os.environ.get("QMEAS_PROB_FLOOR", "1e-12"))
    QMEAS_SHARPNESS_TOL: float = float(os.environ.get("QMEAS_SHARPNESS_TOL", "1e-9"))
    QMEAS_COMMUTE_TOL: float = float(os.environ.get("QMEAS_COMMUTE_TOL", "1e-9"))

    # Simulation worker settings
    QMEAS_SIM_WORKERS: int = int(os.environ.get("QMEAS_SIM_WORKERS", "1"))

    # Override settings with environment variables
    def __init__(self):
        """Initialize settings from environment variables."""
        for key, value in os.environ.items():
            if hasattr(self, key):
                attr_type = type(getattr(self, key))
                if attr_type == bool:
                    setattr(self, key, value.lower() == "true")
                elif attr_type == int:
                    setattr(self, key, int(value))
                elif attr_type == float:
                    setattr(self, key, float(value))
                else:
                    setattr(self, key, value)


# Create a singleton instance
settings = Settings()
