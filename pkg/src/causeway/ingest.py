"""CSV ingestion and preprocessing.

Raw telemetry comes in as a CSV with one timestamp column and numeric channel
columns. The pipeline here is: parse -> resample to a regular grid ->
drop channels with too much missing data -> impute interior gaps -> trim
ragged edges -> standardize. Every step is a pure function.
"""

from __future__ import annotations

import csv
import io
import math
from datetime import datetime, timezone

import numpy as np

from .config import PreprocessConfig
from .errors import (
    AllChannelsDropped,
    AllMissingChannel,
    EmptyInput,
    IngestError,
    MissingTimestampColumn,
    NonMonotonicTimestamps,
)
from .frames import RawFrame, TimeSeriesFrame, ZERO_VARIANCE_EPS

SECONDS_PER_DAY = 86400.0


def _parse_timestamp(token: str) -> float:
    token = token.strip()
    if not token:
        raise ValueError("empty timestamp")
    try:
        return float(token)
    except ValueError:
        pass
    text = token[:-1] + "+00:00" if token.endswith("Z") else token
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _parse_cell(token: str) -> float:
    """Numeric cell value; anything unparseable becomes a missing entry."""
    try:
        return float(token)
    except (TypeError, ValueError):
        return math.nan


def parse_csv(data: bytes | str | io.IOBase, timestamp_column: str = "timestamp") -> RawFrame:
    """Read a header-ed CSV into a RawFrame.

    Timestamps may be ISO-8601 (optional zone suffix, naive treated as UTC) or
    epoch seconds, and must be strictly increasing.
    """
    if isinstance(data, bytes):
        text = data.decode("utf-8")
    elif isinstance(data, str):
        text = data
    else:
        raw = data.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInput("CSV has no header row") from None
    header = [h.strip() for h in header]
    if timestamp_column not in header:
        raise MissingTimestampColumn(
            f"timestamp column {timestamp_column!r} not in header {header}")
    ts_col = header.index(timestamp_column)
    ids = [h for i, h in enumerate(header) if i != ts_col]
    if not ids:
        raise EmptyInput("CSV has no channel columns")

    timestamps: list[float] = []
    columns: list[list[float]] = [[] for _ in ids]
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            ts = _parse_timestamp(row[ts_col])
        except (ValueError, IndexError) as exc:
            raise IngestError(f"row {len(timestamps) + 2}: bad timestamp {row[ts_col]!r}: {exc}")
        timestamps.append(ts)
        k = 0
        for i, cell in enumerate(row):
            if i == ts_col:
                continue
            columns[k].append(_parse_cell(cell))
            k += 1
        for j in range(k, len(ids)):  # short row: trailing cells missing
            columns[j].append(math.nan)

    if not timestamps:
        raise EmptyInput("CSV has no data rows")
    ts = np.asarray(timestamps, dtype=np.float64)
    if np.any(np.diff(ts) <= 0):
        bad = int(np.argmax(np.diff(ts) <= 0)) + 1
        raise NonMonotonicTimestamps(
            f"timestamps must be strictly increasing (violated at row {bad + 1})")
    values = np.asarray(columns, dtype=np.float64)
    return RawFrame(ts, ids, values)


def resample(frame: RawFrame, interval: float) -> RawFrame:
    """Average values into a regular grid of the given interval.

    Buckets are anchored at midnight UTC of the first day so identical inputs
    always land on identical grids; a bucket holds the mean of the samples in
    [bucket_start, bucket_start + interval), empty buckets are missing.
    """
    if interval <= 0:
        raise IngestError(f"interval must be > 0, got {interval}")
    if frame.n_samples == 0:
        raise EmptyInput("cannot resample an empty frame")
    t0, t_last = float(frame.timestamps[0]), float(frame.timestamps[-1])
    anchor = math.floor(t0 / SECONDS_PER_DAY) * SECONDS_PER_DAY
    grid_start = anchor + math.floor((t0 - anchor) / interval) * interval
    n_buckets = int(math.floor((t_last - grid_start) / interval)) + 1

    bucket_idx = np.floor((frame.timestamps - grid_start) / interval).astype(np.int64)
    out = np.full((len(frame.ids), n_buckets), np.nan)
    for c in range(len(frame.ids)):
        vals = frame.values[c]
        ok = ~np.isnan(vals)
        if not ok.any():
            continue
        sums = np.bincount(bucket_idx[ok], weights=vals[ok], minlength=n_buckets)
        counts = np.bincount(bucket_idx[ok], minlength=n_buckets)
        filled = counts > 0
        out[c, filled] = sums[filled] / counts[filled]
    new_ts = grid_start + interval * np.arange(n_buckets, dtype=np.float64)
    return RawFrame(new_ts, list(frame.ids), out)


def drop_sparse_channels(frame: RawFrame, cfg: PreprocessConfig) -> tuple[RawFrame, list[str]]:
    """Remove channels whose missing fraction strictly exceeds the threshold."""
    missing_frac = np.isnan(frame.values).mean(axis=1)
    keep = missing_frac <= cfg.max_missing_fraction
    dropped = [cid for cid, k in zip(frame.ids, keep) if not k]
    if not keep.any():
        raise AllChannelsDropped(
            f"all {len(frame.ids)} channels exceed the "
            f"{cfg.max_missing_fraction:.0%} missing-data threshold")
    kept = RawFrame(frame.timestamps, [cid for cid, k in zip(frame.ids, keep) if k],
                    frame.values[keep])
    return kept, dropped


def _impute_channel(values: np.ndarray, max_ffill_gap: int, channel_id: str) -> np.ndarray:
    observed = np.flatnonzero(~np.isnan(values))
    if observed.size == 0:
        raise AllMissingChannel(f"channel {channel_id!r} has no observed values")
    out = values.copy()
    # Interior gaps only; runs before the first / after the last observation
    # stay missing and are trimmed frame-wide later.
    for left, right in zip(observed[:-1], observed[1:]):
        gap = right - left - 1
        if gap == 0:
            continue
        if gap <= max_ffill_gap:
            out[left + 1:right] = out[left]
        else:
            out[left + 1:right] = out[left] + (out[right] - out[left]) * (
                np.arange(1, gap + 1) / (right - left))
    return out


def impute(frame: RawFrame, cfg: PreprocessConfig) -> RawFrame:
    """Fill interior gaps: forward-fill short runs, linearly interpolate long ones.

    Short means length <= max_ffill_gap. Observed values are never modified.
    """
    filled = np.stack([
        _impute_channel(frame.values[c], cfg.max_ffill_gap, frame.ids[c])
        for c in range(len(frame.ids))
    ])
    return RawFrame(frame.timestamps, list(frame.ids), filled)


def trim_missing_edges(frame: RawFrame) -> RawFrame:
    """Drop leading/trailing rows where any channel is still missing.

    Keeps the frame rectangular without extrapolating past the first or last
    observation of a channel.
    """
    any_missing = np.isnan(frame.values).any(axis=0)
    if not any_missing.any():
        return frame
    present = np.flatnonzero(~any_missing)
    if present.size == 0:
        raise EmptyInput("no rows remain after trimming missing edges")
    lo, hi = int(present[0]), int(present[-1]) + 1
    return RawFrame(frame.timestamps[lo:hi], list(frame.ids), frame.values[:, lo:hi])


def standardize(frame: RawFrame) -> TimeSeriesFrame:
    """Transform each channel to zero mean and unit population variance.

    Requires a fully-imputed regular grid. Channels with (near-)zero variance
    are set to constant 0 and flagged; their raw stats are still recorded.
    """
    if frame.n_samples == 0:
        raise EmptyInput("cannot standardize an empty frame")
    if np.isnan(frame.values).any():
        raise IngestError("standardize requires a fully imputed frame")
    ts = frame.timestamps
    if ts.size < 2:
        raise EmptyInput("need at least 2 samples to establish a grid")
    steps = np.diff(ts)
    interval = float(steps[0])
    if not np.allclose(steps, interval):
        raise IngestError("standardize requires a regular grid; resample first")

    means = frame.values.mean(axis=1)
    stds = np.sqrt(((frame.values - means[:, None]) ** 2).mean(axis=1))
    zero_var = stds < ZERO_VARIANCE_EPS
    scale = np.where(zero_var, 1.0, stds)
    values = (frame.values - means[:, None]) / scale[:, None]
    values[zero_var] = 0.0
    return TimeSeriesFrame(float(ts[0]), interval, list(frame.ids), values,
                           means, stds, zero_var)


def preprocess(raw: RawFrame, cfg: PreprocessConfig) -> tuple[TimeSeriesFrame, list[str]]:
    """Full preprocessing chain; returns the canonical frame and dropped channel ids."""
    regular = resample(raw, cfg.interval)
    kept, dropped = drop_sparse_channels(regular, cfg)
    filled = impute(kept, cfg)
    trimmed = trim_missing_edges(filled)
    return standardize(trimmed), dropped
