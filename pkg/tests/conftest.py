import numpy as np
import pytest

from trackdiff.model import ChannelSeries, Track, TrackKey, build_track


@pytest.fixture
def key():
    return TrackKey(spacecraft="VGR2", antenna="DSS-55", comm_type="downlink")


def make_series(name, values, times=None):
    values = np.asarray(values, dtype=float)
    if times is None:
        times = np.arange(len(values), dtype=float)
    return ChannelSeries(channel_name=name, times=np.asarray(times, float), values=values)


def make_track(track_id, key, channels, dr_refs=(), start_epoch=0.0):
    """channels: dict name -> values (uniform 1 Hz) or ChannelSeries."""
    series = []
    for name, v in channels.items():
        series.append(v if isinstance(v, ChannelSeries) else make_series(name, v))
    return build_track(track_id, key, start_epoch, series, dr_refs=dr_refs)
