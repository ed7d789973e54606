"""trackdiff: compressed telemetry track archive and similarity engine."""

from .model import (
    DEFAULT_MONITOR_ITEMS,
    ChannelSeries,
    LabeledPair,
    MonitorItemSet,
    Track,
    TrackKey,
    build_track,
    resample_to_grid,
    validate_track,
    zscore,
)
from .metrics import (
    MetricConfig,
    SimilarityBreakdown,
    calibrate_k,
    compare_tracks,
    dtw,
    euclidean_rms,
    pearson,
    similarity_score,
)

__version__ = "0.1.0"
