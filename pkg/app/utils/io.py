"""Atomic file writes."""

import os
import tempfile

from app.errors import ReportIOError


def atomic_write_text(path: str, content: str) -> str:
    """
    Write text so that readers see either the old file or the complete new one.

    Args:
        path: Destination path; parent directories are created
        content: Text to write (UTF-8)

    Returns:
        The destination path
    """
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(prefix=".tmp_", dir=directory)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                f.write(content)
            os.replace(tmp_path, path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise
    except OSError as e:
        raise ReportIOError(f"Failed to write {path}: {e}") from e
    return path
