"""Container types for multichannel telemetry.

``RawFrame`` holds possibly-irregular, possibly-gappy series straight from a
CSV; ``TimeSeriesFrame`` is the cleaned, regularly-gridded, standardized form
that every downstream stage consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput

# Channels whose population std falls below this are treated as constant.
ZERO_VARIANCE_EPS = 1e-12


@dataclass
class RawFrame:
    """Aligned channel values over an increasing timestamp vector; NaN marks missing."""

    timestamps: np.ndarray          # (n,) epoch seconds, strictly increasing
    ids: list[str]
    values: np.ndarray              # (n_channels, n), float64, NaN = missing

    @property
    def n_samples(self) -> int:
        return int(self.timestamps.shape[0])

    def channel(self, channel_id: str) -> np.ndarray:
        return self.values[self.ids.index(channel_id)]


@dataclass
class TimeSeriesFrame:
    """Regular-grid frame with no missing values and per-channel standardization stats.

    Values are standardized with the population std; channels whose raw std is
    below ``ZERO_VARIANCE_EPS`` are stored as constant zero and flagged so the
    causal stages can skip them while channel indices stay stable.
    """

    start: float                    # epoch seconds of the first sample
    interval: float                 # seconds between samples
    ids: list[str]
    values: np.ndarray              # (n_channels, n), standardized
    means: np.ndarray               # (n_channels,) raw mean at standardization time
    stds: np.ndarray                # (n_channels,) raw population std
    zero_variance: np.ndarray = field(default=None)  # (n_channels,) bool

    def __post_init__(self):
        if self.zero_variance is None:
            self.zero_variance = self.stds < ZERO_VARIANCE_EPS

    @property
    def n_samples(self) -> int:
        return int(self.values.shape[1])

    def index_of(self, channel_id: str) -> int:
        return self.ids.index(channel_id)

    def channel(self, channel_id: str) -> np.ndarray:
        return self.values[self.index_of(channel_id)]

    def time_at(self, index: int) -> float:
        return self.start + index * self.interval

    def index_at(self, time: float) -> int:
        """Nearest grid index for an epoch time (exact for on-grid times)."""
        return int(round((time - self.start) / self.interval))

    def to_json(self) -> dict:
        return {
            "start": _num(self.start),
            "interval": _num(self.interval),
            "channels": [
                {
                    "id": cid,
                    "mean": float(self.means[i]),
                    "std": float(self.stds[i]),
                    "values": [float(v) for v in self.values[i]],
                }
                for i, cid in enumerate(self.ids)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TimeSeriesFrame":
        channels = doc.get("channels", [])
        if not channels:
            raise EmptyInput("frame document has no channels")
        ids = [c["id"] for c in channels]
        values = np.array([c["values"] for c in channels], dtype=np.float64)
        means = np.array([c["mean"] for c in channels], dtype=np.float64)
        stds = np.array([c["std"] for c in channels], dtype=np.float64)
        return cls(float(doc["start"]), float(doc["interval"]), ids, values, means, stds)


def _num(x: float):
    """Ints serialize without a trailing .0 so file names and JSON stay tidy."""
    if isinstance(x, float) and not math.isinf(x) and not math.isnan(x) and x.is_integer():
        return int(x)
    return x


def format_epoch(t: float) -> str:
    """Stable token for file names built from an event time."""
    return str(int(t)) if float(t).is_integer() else repr(float(t))
