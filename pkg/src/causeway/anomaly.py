"""Z-score anomaly detection on the target channel.

The standardized frame already stores values as z-scores against the
full-series mean and population std, so detection is a threshold test plus
optional merging of consecutive over-threshold runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import AnomalyConfig
from .errors import UnknownChannel, ZeroVarianceTarget
from .frames import TimeSeriesFrame, _num


@dataclass
class AnomalyEvent:
    time: float        # epoch seconds of the anchor t_a
    index: int         # grid position in the frame
    z_score: float
    magnitude: float   # raw-unit deviation from the channel mean

    def to_json(self) -> dict:
        return {
            "time": _num(self.time),
            "index": self.index,
            "z_score": self.z_score,
            "magnitude": self.magnitude,
        }


def detect_anomalies(frame: TimeSeriesFrame, cfg: AnomalyConfig) -> list[AnomalyEvent]:
    """Return events where |z| exceeds the threshold, sorted by time.

    With merge_adjacent, a run of consecutive over-threshold samples collapses
    to a single event anchored at the run's maximum |z| (earliest index wins
    ties).
    """
    if cfg.target_channel not in frame.ids:
        raise UnknownChannel(
            f"target channel {cfg.target_channel!r} not in frame (have {frame.ids})")
    c = frame.index_of(cfg.target_channel)
    if frame.zero_variance[c]:
        raise ZeroVarianceTarget(f"target channel {cfg.target_channel!r} is constant")
    z = frame.values[c]
    std = float(frame.stds[c])

    over = np.abs(z) > cfg.z_threshold
    idx = np.flatnonzero(over)
    if idx.size == 0:
        return []

    if cfg.merge_adjacent:
        anchors = []
        run_start = 0
        breaks = np.flatnonzero(np.diff(idx) > 1)
        for b in np.append(breaks, idx.size - 1):
            run = idx[run_start:b + 1]
            anchors.append(int(run[np.argmax(np.abs(z[run]))]))
            run_start = b + 1
    else:
        anchors = [int(i) for i in idx]

    return [
        AnomalyEvent(
            time=frame.time_at(i),
            index=i,
            z_score=float(z[i]),
            magnitude=float(z[i] * std),
        )
        for i in anchors
    ]


def events_to_json(events: list[AnomalyEvent]) -> dict:
    return {"events": [e.to_json() for e in events]}
