"""Domain types for tracks and channels plus the shared numeric primitives.

A track is one complete ground-station communication session: a block of
monitor-item time series recorded at 0.2 to 1 Hz, identified by spacecraft,
antenna, and communication type.  Everything downstream (metrics, compression,
retrieval) consumes the validated, immutable types defined here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateChannel,
    EmptyChannel,
    GridTooSmall,
    NonFinite,
    NonMonotonicTime,
)

# Monitor data items routinely watched by link control operators, in the
# canonical order used for feature vectors and reports.
DEFAULT_MONITOR_ITEMS = (
    "carrier_power",
    "carrier_system_noise_temp",
    "carrier_track_loop_lock",
    "subcarrier_track_loop_lock",
    "symbol_rate",
    "symbol_track_loop_state",
    "telemetry_frame_sync_lock",
)

# Sample standard deviations below this are treated as a constant channel.
CONST_STD_EPS = 1e-12


@dataclass(frozen=True)
class TrackKey:
    """Identity triple; two tracks are the same type iff their keys are equal."""

    spacecraft: str
    antenna: str
    comm_type: str

    def __post_init__(self):
        for name in ("spacecraft", "antenna", "comm_type"):
            if not getattr(self, name):
                raise ValueError(f"TrackKey.{name} must be non-empty")

    def as_dict(self):
        return {
            "spacecraft": self.spacecraft,
            "antenna": self.antenna,
            "comm_type": self.comm_type,
        }


@dataclass(frozen=True)
class ChannelSeries:
    """One monitor item's samples within a track.

    Times are seconds since track start, strictly increasing.  Arrays are
    stored as float64 and never mutated after construction.  uniform_grid
    marks series built on an exactly uniform time grid (reconstructions,
    resampled representations) so hot paths can skip re-interpolation.
    """

    channel_name: str
    times: np.ndarray
    values: np.ndarray
    uniform_grid: bool = False

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class Track:
    """Multi-channel time series block with identity metadata."""

    track_id: str
    key: TrackKey
    start_epoch: float
    channels: dict[str, ChannelSeries]
    dr_refs: tuple[str, ...] = ()

    def channel_names(self):
        return list(self.channels)


@dataclass(frozen=True)
class MonitorItemSet:
    """Ordered, duplicate-free list of channel names used for comparisons."""

    items: tuple[str, ...] = DEFAULT_MONITOR_ITEMS

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise ValueError("MonitorItemSet must not be empty")
        if len(set(items)) != len(items):
            raise ValueError("MonitorItemSet contains duplicate channel names")
        object.__setattr__(self, "items", items)

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)


@dataclass(frozen=True)
class LabeledPair:
    """Track pair with an operator similar/dissimilar ground-truth label.

    `a` and `b` are either inline Track objects or track_id strings to be
    resolved against a store by the consumer.
    """

    a: object
    b: object
    label: str

    def __post_init__(self):
        if self.label not in ("similar", "dissimilar"):
            raise ValueError(f"label must be similar|dissimilar, got {self.label!r}")
        ida = self.a.track_id if isinstance(self.a, Track) else self.a
        idb = self.b.track_id if isinstance(self.b, Track) else self.b
        if ida == idb:
            raise ValueError("a labeled pair must reference two distinct tracks")

    @property
    def track_a(self) -> Track:
        if not isinstance(self.a, Track):
            raise TypeError("pair holds a track_id, not an inline Track")
        return self.a

    @property
    def track_b(self) -> Track:
        if not isinstance(self.b, Track):
            raise TypeError("pair holds a track_id, not an inline Track")
        return self.b


def build_track(track_id, key, start_epoch, channel_list, dr_refs=()) -> Track:
    """Assemble a Track from a list of ChannelSeries, rejecting duplicate names."""
    channels = {}
    for series in channel_list:
        if series.channel_name in channels:
            raise DuplicateChannel(
                f"track {track_id!r}: duplicate channel {series.channel_name!r}"
            )
        channels[series.channel_name] = series
    return Track(
        track_id=track_id,
        key=key,
        start_epoch=float(start_epoch),
        channels=channels,
        dr_refs=tuple(dr_refs),
    )


def validate_track(raw: Track) -> Track:
    """Return the track unchanged iff every type invariant holds.

    Raises NonMonotonicTime, NonFinite, EmptyChannel, or DuplicateChannel
    on the first violated invariant.
    """
    if not raw.track_id:
        raise EmptyChannel("track_id must be non-empty")
    if not raw.channels:
        raise EmptyChannel(f"track {raw.track_id!r} has no channels")
    for name, series in raw.channels.items():
        if name != series.channel_name:
            raise DuplicateChannel(
                f"track {raw.track_id!r}: channel keyed {name!r} "
                f"names itself {series.channel_name!r}"
            )
        if len(series.times) != len(series.values):
            raise EmptyChannel(
                f"channel {name!r}: times/values length mismatch"
            )
        if len(series) < 2:
            raise EmptyChannel(f"channel {name!r} has fewer than 2 samples")
        if not np.all(np.isfinite(series.times)) or not np.all(
            np.isfinite(series.values)
        ):
            raise NonFinite(f"channel {name!r} contains NaN or Inf")
        if np.any(np.diff(series.times) <= 0):
            raise NonMonotonicTime(
                f"channel {name!r}: times not strictly increasing"
            )
    return raw


def resample_to_grid(series: ChannelSeries, n: int) -> np.ndarray:
    """Linearly interpolate onto n uniform times spanning the series' range.

    Endpoints are preserved exactly; a series that is already uniform with
    length n comes back unchanged.
    """
    if n < 2:
        raise GridTooSmall(f"grid size {n} < 2")
    grid = np.linspace(series.times[0], series.times[-1], int(n))
    out = np.interp(grid, series.times, series.values)
    out[0] = series.values[0]
    out[-1] = series.values[-1]
    return out


def resample_values(times, values, n: int) -> np.ndarray:
    """resample_to_grid for bare arrays (same contract)."""
    if n < 2:
        raise GridTooSmall(f"grid size {n} < 2")
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    grid = np.linspace(times[0], times[-1], int(n))
    out = np.interp(grid, times, values)
    out[0] = values[0]
    out[-1] = values[-1]
    return out


def zscore(v) -> tuple[np.ndarray, bool]:
    """Normalize to mean 0 and sample std (n-1 denominator) 1.

    Constant input (std below CONST_STD_EPS) normalizes to all zeros and the
    returned flag is True; lock-status channels sit flat for long spans, so
    this case is routine rather than an error.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size < 2:
        raise EmptyChannel("zscore needs at least 2 samples")
    centered = v - v.mean()
    std = np.sqrt(np.dot(centered, centered) / (v.size - 1))
    if std < CONST_STD_EPS:
        return centered, True
    return centered / std, False
