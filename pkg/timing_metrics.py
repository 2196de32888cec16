import logging
from contextlib import contextmanager
from datetime import datetime
from typing import Dict, Iterator, Optional

logger = logging.getLogger(__name__)


class TimingMetrics:
    """Wall-clock timing of an experiment run and its phases (validate, compute, write)."""

    def __init__(self, experiment: str = "experiment"):
        self.experiment = experiment
        self.start_time: Optional[datetime] = None
        self.end_time: Optional[datetime] = None
        self.phase_times: Dict[str, float] = {}
        self.total_duration: Optional[float] = None

    def start_run(self):
        self.start_time = datetime.now()
        logger.debug(f"Timing started for {self.experiment}")

    def end_run(self):
        self.end_time = datetime.now()
        if self.start_time:
            self.total_duration = (self.end_time - self.start_time).total_seconds()
            logger.info(f"{self.experiment} completed in {self.total_duration:.2f} seconds")

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        """Time the enclosed block as phase ``name``; the time is kept even if the block raises."""
        started = datetime.now()
        logger.debug(f"Starting phase: {name}")
        try:
            yield
        finally:
            duration = (datetime.now() - started).total_seconds()
            self.phase_times[name] = duration
            logger.info(f"Phase {name} completed in {duration:.2f} seconds")

    def get_metrics(self) -> dict:
        return {
            "experiment": self.experiment,
            "total_duration": self.total_duration,
            "phase_times": dict(self.phase_times),
        }
