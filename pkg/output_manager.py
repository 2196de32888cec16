import logging
import os
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from app.config import settings
from app.config.storage import get_meta_path, get_report_path
from app.errors import ReportIOError
from app.services.experiments import ExperimentResult
from app.utils.io import atomic_write_text
from app.utils.serialization import dumps

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
REPORT_FORMATS = ("json", "csv")


class OutputManager:
    def __init__(self, base_dir: Optional[str] = None):
        """
        Initialize the OutputManager.

        Args:
            base_dir: Base directory for reports (defaults to QMEAS_OUTPUT_DIR)
        """
        self.base_dir = base_dir if base_dir is not None else settings.QMEAS_OUTPUT_DIR
        self.written: list = []

    def get_path(self, experiment: str, fmt: str, output_path: Optional[str] = None) -> str:
        """
        Resolve the report path for an experiment.

        Args:
            experiment: Experiment name
            fmt: Report format
            output_path: Explicit path; wins over the default layout

        Returns:
            Path of the report file
        """
        if output_path:
            return output_path
        return get_report_path(experiment, fmt, self.base_dir)

    def save_text(self, content: str, filepath: str) -> str:
        """Write text atomically and remember the path."""
        atomic_write_text(filepath, content)
        self.written.append(filepath)
        logger.info(f"Wrote {filepath}")
        return filepath

    def emit(self, result: ExperimentResult, fmt: str, output_path: Optional[str] = None) -> str:
        path = self.get_path(result.experiment, fmt, output_path)
        return emit_report(result, fmt, path, manager=self)


def _header(result: ExperimentResult) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": result.experiment,
        "seed": result.seed,
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def render_json(result: ExperimentResult) -> str:
    """Schema-versioned JSON report; ``generated_at`` is the only run-dependent field."""
    return dumps({**_header(result), "payload": result.payload})


def render_csv(result: ExperimentResult) -> str:
    """The result table with its fixed header; an empty table gives the header row only."""
    return result.table.to_csv(index=False, float_format="%.17g", lineterminator="\n")


def emit_report(
    result: ExperimentResult,
    fmt: str,
    path: str,
    manager: Optional[OutputManager] = None,
) -> str:
    """
    Write a report as JSON, or as CSV plus a ``<path>.meta.json`` sidecar.

    Args:
        result: Completed experiment result
        fmt: "json" or "csv"
        path: Destination path
        manager: OutputManager recording written files

    Returns:
        The report path
    """
    if fmt not in REPORT_FORMATS:
        raise ReportIOError(f"Unknown report format '{fmt}', expected one of {REPORT_FORMATS}")
    manager = manager or OutputManager(os.path.dirname(path) or ".")

    if fmt == "json":
        return manager.save_text(render_json(result), path)

    manager.save_text(render_csv(result), path)
    meta = {**_header(result), "columns": list(result.table.columns), "summary": result.summary}
    manager.save_text(dumps(meta), get_meta_path(path))
    return path
