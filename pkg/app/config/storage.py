"""Report storage layout and path management."""

import os
from typing import Optional

from app.config import settings

# Report paths relative to the output directory, per experiment
REPORT_PATHS = {
    "epr-demo": "epr/epr_demo",
    "postulate-compare": "measurement/postulate_compare",
    "chsh": "chsh/correlations",
    "window-sweep": "coincidence/window_sweep",
    "condprob": "measurement/conditional_probability",
    "clicks": "coincidence/clicks",
}


def get_report_path(experiment: str, fmt: str, output_dir: Optional[str] = None) -> str:
    """
    Default report path for an experiment.

    Args:
        experiment: Experiment name (or "clicks" for exported click streams)
        fmt: File extension without the dot
        output_dir: Base directory (defaults to ``QMEAS_OUTPUT_DIR``)

    Returns:
        ``<output_dir>/<layout path>.<fmt>``
    """
    base_path = REPORT_PATHS.get(experiment)
    if not base_path:
        raise ValueError(f"Invalid report category: {experiment}")
    root = output_dir if output_dir is not None else settings.QMEAS_OUTPUT_DIR
    return os.path.join(root, f"{base_path}.{fmt}")


def get_meta_path(report_path: str) -> str:
    """Sidecar metadata path for a CSV report."""
    return f"{report_path}.meta.json"
