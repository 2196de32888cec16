"""Emission events, detector clicks and window-matched pairings.

Streams are stored column-wise in numpy arrays; iterating yields the
per-event records.
"""

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

SIDE_A = "A"
SIDE_B = "B"

# Window value selecting the match-all-in-order mode
INFINITE_WINDOW = math.inf


def _readonly(array: np.ndarray, dtype) -> np.ndarray:
    result = np.array(array, dtype=dtype)
    result.setflags(write=False)
    return result


@dataclass(frozen=True)
class EmissionEvent:
    pair_id: int
    hidden_angle: float
    emission_time: float
    jitter_a: float
    jitter_b: float


class EmissionBatch:
    """Photon pairs produced by the source, ordered by pair_id."""

    __slots__ = ("pair_id", "hidden_angle", "emission_time", "jitter_a", "jitter_b")

    def __init__(self, pair_id, hidden_angle, emission_time, jitter_a, jitter_b):
        self.pair_id = _readonly(pair_id, np.int64)
        self.hidden_angle = _readonly(hidden_angle, np.float64)
        self.emission_time = _readonly(emission_time, np.float64)
        self.jitter_a = _readonly(jitter_a, np.float64)
        self.jitter_b = _readonly(jitter_b, np.float64)

    def __len__(self) -> int:
        return len(self.pair_id)

    def jitter(self, side: str) -> np.ndarray:
        return self.jitter_a if side == SIDE_A else self.jitter_b

    def __iter__(self) -> Iterator[EmissionEvent]:
        for row in zip(self.pair_id, self.hidden_angle, self.emission_time, self.jitter_a, self.jitter_b):
            yield EmissionEvent(int(row[0]), float(row[1]), float(row[2]), float(row[3]), float(row[4]))


@dataclass(frozen=True)
class ClickRecord:
    side: str
    pair_id: int
    setting_angle: float
    outcome: int
    time_tag: float


class ClickStream:
    """Clicks of one detector side at one setting, sorted by time tag."""

    __slots__ = ("side", "setting_angle", "pair_id", "outcome", "time_tag")

    def __init__(self, side: str, setting_angle: float, pair_id, outcome, time_tag):
        order = np.argsort(np.asarray(time_tag, dtype=np.float64), kind="stable")
        self.side = side
        self.setting_angle = float(setting_angle)
        self.pair_id = _readonly(np.asarray(pair_id)[order], np.int64)
        self.outcome = _readonly(np.asarray(outcome)[order], np.int8)
        self.time_tag = _readonly(np.asarray(time_tag)[order], np.float64)

    def __len__(self) -> int:
        return len(self.time_tag)

    def __iter__(self) -> Iterator[ClickRecord]:
        for pair_id, outcome, time_tag in zip(self.pair_id, self.outcome, self.time_tag):
            yield ClickRecord(self.side, int(pair_id), self.setting_angle, int(outcome), float(time_tag))

    def to_bytes(self) -> bytes:
        """Canonical byte image of the stream, used for locality checks."""
        return b"".join(
            [
                self.side.encode("ascii"),
                np.float64(self.setting_angle).tobytes(),
                self.pair_id.tobytes(),
                self.outcome.tobytes(),
                self.time_tag.tobytes(),
            ]
        )


@dataclass(frozen=True)
class CoincidencePairing:
    """Index pairs into the time-sorted streams plus the unmatched leftovers."""

    matched: np.ndarray  # shape (k, 2): (index_a, index_b)
    discarded_a: np.ndarray
    discarded_b: np.ndarray
    window: float

    @property
    def n_matched(self) -> int:
        return int(self.matched.shape[0])
