"""Event-based simulation of a two-detector photon experiment with time-window coincidence counting.

The source emits pairs with a shared hidden polarization angle. Each side turns
its photons into ±1 clicks carrying a time tag, using only its own setting and
its own random stream. Clicks from the two sides are then paired by a time
window ``|t_a − t_b| ≤ W``; the window decides which pairs enter the correlation
estimates.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from app.config import settings
from app.errors import InvalidModelParams, ReportIOError
from app.models.chsh import CorrelationEstimate
from app.models.events import (
    INFINITE_WINDOW,
    SIDE_A,
    SIDE_B,
    ClickRecord,
    ClickStream,
    CoincidencePairing,
    EmissionBatch,
)
from app.services.chsh import chsh_from_samples
from app.services.delay_models import DelayModel, get_delay_model
from app.utils.io import atomic_write_text
from app.utils.rng import SIDE_A_STREAM, SIDE_B_STREAM, SOURCE_STREAM, spawn_generator

logger = logging.getLogger(__name__)

DEFAULT_EMISSION_SPACING = 10e-6

# CHSH order: (a,b), (a,b′), (a′,b), (a′,b′) as (side A index, side B index)
SETTING_KEYS: Tuple[str, ...] = ("ab", "abp", "apb", "apbp")
SETTING_INDICES: Tuple[Tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))

CLICK_COLUMNS = ["side", "pair_id", "setting_deg", "outcome", "time_tag_s"]
SWEEP_COLUMNS = ["window_s", "E_ab", "E_abp", "E_apb", "E_apbp", "S", "stderr_S", "matched_fraction"]

ClickInput = Union[ClickStream, Sequence[ClickRecord], Sequence[float]]


def simulate_source(
    n_pairs: int,
    seed: int,
    jitter_scale: float = 0.0,
    spacing: float = DEFAULT_EMISSION_SPACING,
) -> EmissionBatch:
    """
    Emit ``n_pairs`` photon pairs.

    Args:
        n_pairs: Number of pairs (≥ 1)
        seed: Master seed; the source uses its own stream of it
        jitter_scale: Mean of the exponential per-photon emission jitter in seconds
            (0 means both photons leave at the emission time)
        spacing: Time between consecutive emissions in seconds

    Returns:
        EmissionBatch with hidden angles uniform on [0, 2π)
    """
    if n_pairs < 1:
        raise InvalidModelParams(f"n_pairs must be at least 1, got {n_pairs}")
    if not math.isfinite(jitter_scale) or jitter_scale < 0:
        raise InvalidModelParams(f"jitter_scale must be >= 0, got {jitter_scale}")
    if not math.isfinite(spacing) or spacing <= 0:
        raise InvalidModelParams(f"Emission spacing must be > 0, got {spacing}")

    rng = spawn_generator(seed, SOURCE_STREAM)
    hidden = rng.uniform(0.0, 2 * math.pi, n_pairs)
    if jitter_scale > 0:
        jitter_a = rng.exponential(jitter_scale, n_pairs)
        jitter_b = rng.exponential(jitter_scale, n_pairs)
    else:
        jitter_a = np.zeros(n_pairs)
        jitter_b = np.zeros(n_pairs)

    batch = EmissionBatch(
        pair_id=np.arange(n_pairs),
        hidden_angle=hidden,
        emission_time=spacing * np.arange(1, n_pairs + 1),
        jitter_a=jitter_a,
        jitter_b=jitter_b,
    )
    logger.debug(f"Emitted {n_pairs} pairs (spacing={spacing:g}s, jitter={jitter_scale:g}s)")
    return batch


def detect(
    events: EmissionBatch,
    side: str,
    setting_angle: float,
    delay_model: DelayModel,
    seed: int,
    setting_index: int = 0,
) -> ClickStream:
    """
    Clicks of one side at one analyzer setting.

    The side-B photon is polarized at the hidden angle + π/2. Randomness comes
    from ``(seed, side stream, setting_index)`` only, so this side's clicks do
    not depend on anything chosen for the other side.
    """
    if side not in (SIDE_A, SIDE_B):
        raise InvalidModelParams(f"side must be '{SIDE_A}' or '{SIDE_B}', got '{side}'")
    if not math.isfinite(setting_angle):
        raise InvalidModelParams(f"setting_angle must be finite, got {setting_angle}")

    stream = SIDE_A_STREAM if side == SIDE_A else SIDE_B_STREAM
    rng = spawn_generator(seed, stream, setting_index)
    photon_angle = events.hidden_angle if side == SIDE_A else events.hidden_angle + math.pi / 2
    outcomes, delays = delay_model.respond(photon_angle, setting_angle, rng)

    return ClickStream(
        side=side,
        setting_angle=setting_angle,
        pair_id=events.pair_id,
        outcome=outcomes,
        time_tag=events.emission_time + events.jitter(side) + delays,
    )


def _sorted_times(clicks: ClickInput) -> Tuple[np.ndarray, np.ndarray]:
    """(time tags sorted, positions of those tags in the input)."""
    if isinstance(clicks, ClickStream):
        return np.asarray(clicks.time_tag), np.arange(len(clicks))
    items = list(clicks)
    if items and isinstance(items[0], ClickRecord):
        times = np.array([c.time_tag for c in items], dtype=float)
    else:
        times = np.asarray(items, dtype=float)
    order = np.argsort(times, kind="stable")
    return times[order], order


def _greedy_match(ta: List[float], tb: List[float], window: float):
    matched, discarded_a, discarded_b = [], [], []
    na, nb = len(ta), len(tb)
    i = j = 0
    while i < na and j < nb:
        dt = tb[j] - ta[i]
        if dt < -window:
            discarded_b.append(j)
            j += 1
        elif dt > window:
            discarded_a.append(i)
            i += 1
        elif i + 1 < na and abs(tb[j] - ta[i + 1]) < abs(dt):
            # the next a-click is strictly closer to this b-click
            discarded_a.append(i)
            i += 1
        elif j + 1 < nb and abs(tb[j + 1] - ta[i]) < abs(dt):
            discarded_b.append(j)
            j += 1
        else:
            matched.append((i, j))
            i += 1
            j += 1
    discarded_a.extend(range(i, na))
    discarded_b.extend(range(j, nb))
    return matched, discarded_a, discarded_b


def match_window(clicks_a: ClickInput, clicks_b: ClickInput, window: float) -> CoincidencePairing:
    """
    Pair clicks of the two sides whose time tags differ by at most ``window``.

    Both sides are walked in time order with two pointers. A candidate pair is
    skipped in favour of a strictly closer neighbour on either side; equal
    distances resolve to the earlier b-click. Every click ends up matched once
    or discarded. ``INFINITE_WINDOW`` pairs the k-th a-click with the k-th
    b-click.

    Returns:
        CoincidencePairing with indices into the inputs (for ClickStreams, the
        time-sorted order the stream already holds)
    """
    if math.isnan(window) or window < 0:
        raise InvalidModelParams(f"window must be >= 0, got {window}")

    times_a, order_a = _sorted_times(clicks_a)
    times_b, order_b = _sorted_times(clicks_b)

    if window == INFINITE_WINDOW:
        k = min(len(times_a), len(times_b))
        matched = np.column_stack([np.arange(k), np.arange(k)])
        discarded_a = np.arange(k, len(times_a))
        discarded_b = np.arange(k, len(times_b))
    else:
        pairs, rest_a, rest_b = _greedy_match(times_a.tolist(), times_b.tolist(), window)
        matched = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        discarded_a = np.array(rest_a, dtype=np.int64)
        discarded_b = np.array(rest_b, dtype=np.int64)

    matched = matched.astype(np.int64)
    if len(matched):
        matched = np.column_stack([order_a[matched[:, 0]], order_b[matched[:, 1]]])
    return CoincidencePairing(
        matched=matched,
        discarded_a=np.sort(order_a[discarded_a.astype(np.int64)]),
        discarded_b=np.sort(order_b[discarded_b.astype(np.int64)]),
        window=window,
    )


def matched_outcome_pairs(
    clicks_a: ClickStream, clicks_b: ClickStream, pairing: CoincidencePairing
) -> np.ndarray:
    """``k × 2`` array of (outcome_a, outcome_b) for the matched clicks."""
    if pairing.n_matched == 0:
        return np.empty((0, 2), dtype=np.int8)
    return np.column_stack(
        [clicks_a.outcome[pairing.matched[:, 0]], clicks_b.outcome[pairing.matched[:, 1]]]
    )


def matched_pair_ids(clicks_a: ClickStream, pairing: CoincidencePairing) -> np.ndarray:
    """Source pair ids of the matched side-A clicks, sorted."""
    return np.sort(clicks_a.pair_id[pairing.matched[:, 0]]) if pairing.n_matched else np.empty(0, np.int64)


def jaccard(first: np.ndarray, second: np.ndarray) -> float:
    """|A ∩ B| / |A ∪ B| of two id sets; 1.0 when both are empty."""
    union = np.union1d(first, second)
    if len(union) == 0:
        return 1.0
    return float(len(np.intersect1d(first, second)) / len(union))


@dataclass
class SweepRow:
    window: float
    estimates: List[CorrelationEstimate]
    S: float
    stderr_S: float
    matched_fraction: float
    matched_counts: Dict[str, int]
    pair_ids: Dict[str, np.ndarray] = field(repr=False)
    jaccard_b: Dict[str, float] = field(default_factory=dict)

    def as_table_row(self) -> Dict[str, float]:
        row = {"window_s": self.window}
        for key, estimate in zip(SETTING_KEYS, self.estimates):
            row[f"E_{key}"] = estimate.value
        row.update({"S": self.S, "stderr_S": self.stderr_S, "matched_fraction": self.matched_fraction})
        return row


@dataclass
class WindowSweepResult:
    rows: List[SweepRow]
    n_pairs: int
    angles: Dict[str, float]
    model: Dict[str, object]
    streams_a: List[ClickStream] = field(repr=False)
    streams_b: List[ClickStream] = field(repr=False)


def analyze_window(
    streams_a: Sequence[ClickStream],
    streams_b: Sequence[ClickStream],
    window: float,
    n_pairs: Optional[int] = None,
) -> SweepRow:
    """
    Match the four CHSH setting combinations at one window and estimate S.

    Args:
        streams_a: Side-A streams at settings (a, a′)
        streams_b: Side-B streams at settings (b, b′)
        window: Coincidence window in seconds
        n_pairs: Emitted pairs, the denominator of matched_fraction
            (defaults to the largest stream length)
    """
    if n_pairs is None:
        n_pairs = max(len(s) for s in list(streams_a) + list(streams_b))

    samples, pair_ids, counts = [], {}, {}
    for key, (ia, ib) in zip(SETTING_KEYS, SETTING_INDICES):
        pairing = match_window(streams_a[ia], streams_b[ib], window)
        samples.append(matched_outcome_pairs(streams_a[ia], streams_b[ib], pairing))
        pair_ids[key] = matched_pair_ids(streams_a[ia], pairing)
        counts[key] = pairing.n_matched

    value, std_error, estimates = chsh_from_samples(samples, return_estimates=True)
    fraction = float(np.mean([counts[k] for k in SETTING_KEYS]) / n_pairs)
    row = SweepRow(
        window=window,
        estimates=estimates,
        S=value,
        stderr_S=std_error,
        matched_fraction=fraction,
        matched_counts=counts,
        pair_ids=pair_ids,
        jaccard_b={
            "a": jaccard(pair_ids["ab"], pair_ids["abp"]),
            "a_prime": jaccard(pair_ids["apb"], pair_ids["apbp"]),
        },
    )
    logger.info(
        f"window={window:g}s S={value:.4f}±{std_error:.4f} "
        f"matched_fraction={fraction:.5f}"
    )
    return row


def reanalyze_clicks(
    streams_a: Sequence[ClickStream],
    streams_b: Sequence[ClickStream],
    windows: Sequence[float],
    n_pairs: Optional[int] = None,
) -> List[SweepRow]:
    """Re-run the window analysis on existing (e.g. imported) click streams."""
    return [analyze_window(streams_a, streams_b, w, n_pairs) for w in windows]


def run_window_sweep(
    n_pairs: int,
    seed: int,
    windows: Sequence[float],
    angles: Dict[str, float],
    model_name: str = "reference",
    model_params: Optional[Dict[str, object]] = None,
    jitter_scale: float = 0.0,
    spacing: float = DEFAULT_EMISSION_SPACING,
    workers: Optional[int] = None,
) -> WindowSweepResult:
    """
    Simulate one source run, detect it at every setting and sweep the window.

    Args:
        n_pairs: Emitted pairs
        seed: Master seed
        windows: Coincidence windows in seconds (``INFINITE_WINDOW`` allowed)
        angles: Analyzer angles in radians keyed a, a_prime, b, b_prime
        model_name: Registered delay model
        model_params: Keyword arguments for the model
        jitter_scale: Mean emission jitter in seconds
        spacing: Emission spacing in seconds
        workers: Detection threads (default ``QMEAS_SIM_WORKERS``)

    Returns:
        WindowSweepResult, one row per window in the given order
    """
    for window in windows:
        if math.isnan(window) or window < 0:
            raise InvalidModelParams(f"window must be >= 0, got {window}")
    model = get_delay_model(model_name, **(model_params or {}))
    events = simulate_source(n_pairs, seed, jitter_scale=jitter_scale, spacing=spacing)

    jobs = [
        (SIDE_A, angles["a"], 0),
        (SIDE_A, angles["a_prime"], 1),
        (SIDE_B, angles["b"], 0),
        (SIDE_B, angles["b_prime"], 1),
    ]
    workers = max(1, workers if workers is not None else settings.QMEAS_SIM_WORKERS)
    logger.info(f"Detecting {n_pairs} pairs at 4 settings with {workers} worker(s)")
    if workers == 1:
        streams = [detect(events, side, angle, model, seed, index) for side, angle, index in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(detect, events, side, angle, model, seed, index)
                for side, angle, index in jobs
            ]
            streams = [future.result() for future in futures]

    streams_a, streams_b = streams[:2], streams[2:]
    rows = reanalyze_clicks(streams_a, streams_b, windows, n_pairs)
    return WindowSweepResult(
        rows=rows,
        n_pairs=n_pairs,
        angles=dict(angles),
        model={"name": model_name, **model.params()},
        streams_a=streams_a,
        streams_b=streams_b,
    )


def clicks_to_frame(streams: Sequence[ClickStream]) -> pd.DataFrame:
    """Flatten click streams into the click CSV layout."""
    frames = [
        pd.DataFrame(
            {
                "side": stream.side,
                "pair_id": stream.pair_id,
                "setting_deg": math.degrees(stream.setting_angle),
                "outcome": stream.outcome.astype(int),
                "time_tag_s": stream.time_tag,
            },
            columns=CLICK_COLUMNS,
        )
        for stream in streams
    ]
    if not frames:
        return pd.DataFrame(columns=CLICK_COLUMNS)
    return pd.concat(frames, ignore_index=True)


def clicks_from_frame(frame: pd.DataFrame) -> Dict[Tuple[str, float], ClickStream]:
    """
    Rebuild click streams from the click CSV layout.

    Returns:
        Streams keyed by (side, setting_deg) in order of first appearance
    """
    missing = [c for c in CLICK_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidModelParams(f"Click table is missing columns: {missing}")
    try:
        frame = frame.astype({"pair_id": np.int64, "outcome": np.int64, "setting_deg": float, "time_tag_s": float})
    except (TypeError, ValueError) as e:
        raise InvalidModelParams(f"Click table holds non-numeric values: {e}") from e
    outcomes = set(frame["outcome"].unique().tolist())
    if not outcomes <= {-1, 1}:
        raise InvalidModelParams(f"Click outcomes must be ±1, got {sorted(outcomes)}")

    streams: Dict[Tuple[str, float], ClickStream] = {}
    for (side, setting_deg), group in frame.groupby(["side", "setting_deg"], sort=False):
        if side not in (SIDE_A, SIDE_B):
            raise InvalidModelParams(f"Unknown side '{side}' in click table")
        streams[(side, float(setting_deg))] = ClickStream(
            side=side,
            setting_angle=math.radians(setting_deg),
            pair_id=group["pair_id"].to_numpy(),
            outcome=group["outcome"].to_numpy(),
            time_tag=group["time_tag_s"].to_numpy(dtype=float),
        )
    return streams


def export_clicks(streams: Sequence[ClickStream], path: str) -> str:
    """Write click streams as CSV with round-trip float precision."""
    csv_text = clicks_to_frame(streams).to_csv(index=False, float_format="%.17g")
    return atomic_write_text(path, csv_text)


def load_clicks(path: str) -> Dict[Tuple[str, float], ClickStream]:
    """Read a click CSV written by ``export_clicks`` or recorded externally."""
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ReportIOError(f"Failed to read click table {path}: {e}") from e
    return clicks_from_frame(frame)
