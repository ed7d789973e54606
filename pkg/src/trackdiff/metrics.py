"""Similarity measures between tracks and the ensemble similarity score.

Three base measures are computed per channel: Euclidean distance (RMS form),
dynamic time warping (banded, path-length normalized), and Pearson's
correlation.  They combine into the ensemble score

    ss = pc - (ed + dtw) / k

with k a calibration factor restricted to [2, 10].  ED and DTW are per-point
normalized so both live in z-score units regardless of track length;
otherwise no k in range could balance 10k-20k point distance sums against a
correlation in [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .errors import (
    BandTooNarrow,
    InsufficientLabels,
    KOutOfRange,
    LengthMismatch,
    NoSharedChannels,
    TypeMismatch,
)
from .model import MonitorItemSet, Track, resample_values, zscore
from .stats import welch_t

K_MIN = 2.0
K_MAX = 10.0

# Grid scanned by calibrate_k.
K_GRID = tuple(round(2.0 + 0.5 * i, 1) for i in range(17))


@dataclass(frozen=True)
class MetricConfig:
    """Knobs for track comparison.

    channel_weights maps channel name to a non-negative weight; channels not
    listed get weight 1.  allow_cross_type permits comparing tracks whose
    identity keys differ.
    """

    k: float = 4.0
    grid_n: int = 512
    dtw_band_frac: float = 0.1
    channel_weights: dict = field(default_factory=dict)
    allow_cross_type: bool = False

    def __post_init__(self):
        if not (K_MIN <= self.k <= K_MAX):
            raise KOutOfRange(f"k={self.k} outside [{K_MIN}, {K_MAX}]")
        if self.grid_n < 2:
            raise ValueError("grid_n must be >= 2")
        if not (0.0 < self.dtw_band_frac <= 1.0):
            raise ValueError("dtw_band_frac must be in (0, 1]")
        for name, w in self.channel_weights.items():
            if w < 0:
                raise ValueError(f"negative weight for channel {name!r}")

    def weight(self, channel_name):
        return float(self.channel_weights.get(channel_name, 1.0))


@dataclass(frozen=True)
class ChannelMetrics:
    ed: float
    dtw: float
    pc: float
    ss: float

    def as_dict(self):
        return {"ed": self.ed, "dtw": self.dtw, "pc": self.pc, "ss": self.ss}


@dataclass(frozen=True)
class SimilarityBreakdown:
    """Per-channel and aggregate metrics for one track pair.

    Aggregates are weighted arithmetic means over the shared channels;
    channels requested but absent from either track are listed in `missing`.
    """

    per_channel: dict[str, ChannelMetrics]
    aggregate_ed: float
    aggregate_dtw: float
    aggregate_pc: float
    aggregate_ss: float
    missing: tuple[str, ...] = ()

    def as_dict(self):
        return {
            "per_channel": {c: m.as_dict() for c, m in self.per_channel.items()},
            "aggregate_ed": self.aggregate_ed,
            "aggregate_dtw": self.aggregate_dtw,
            "aggregate_pc": self.aggregate_pc,
            "aggregate_ss": self.aggregate_ss,
            "missing": list(self.missing),
        }


def euclidean_rms(x, y):
    """Root-mean-square Euclidean distance between equal-length vectors.

    The 1/n inside the root makes the value length-independent and
    commensurate with the path-normalized DTW distance.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"{x.shape} vs {y.shape}")
    d = x - y
    return float(np.sqrt(np.mean(d * d)))


def pearson(x, y, x_const=False, y_const=False):
    """Pearson product-moment correlation with constant-channel handling.

    Exactly one constant input correlates with nothing: 0.  Two constant
    inputs are identical signals iff their (pre-normalization) means agree,
    so the result is 1 when |mean(x) - mean(y)| < 1e-9 and 0 otherwise.
    Callers therefore pass un-normalized values; Pearson is affine invariant,
    so this changes nothing in the regular case.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"{x.shape} vs {y.shape}")
    if x_const and y_const:
        return 1.0 if abs(x.mean() - y.mean()) < 1e-9 else 0.0
    if x_const or y_const:
        return 0.0
    dx = x - x.mean()
    dy = y - y.mean()
    denom = np.sqrt(np.dot(dx, dx) * np.dot(dy, dy))
    if denom == 0.0:
        return 0.0
    return float(min(1.0, max(-1.0, np.dot(dx, dy) / denom)))


def _band_half_width(band_frac, n, m):
    return max(1, int(math.ceil(band_frac * max(n, m))))


@njit(cache=True)
def _band_row_limits(i, n, m, h):
    # Cells within Chebyshev distance h of the continuous diagonal from
    # (0,0) to (n-1,m-1).  Unlike a per-row band, this stays connected for
    # any length ratio as long as h >= 1.
    tlo = (i - h) / (n - 1.0)
    if tlo < 0.0:
        tlo = 0.0
    thi = (i + h) / (n - 1.0)
    if thi > 1.0:
        thi = 1.0
    jlo = int(math.ceil(tlo * (m - 1.0) - h))
    jhi = int(math.floor(thi * (m - 1.0) + h))
    if jlo < 0:
        jlo = 0
    if jhi > m - 1:
        jhi = m - 1
    return jlo, jhi


@njit(cache=True)
def _dtw_accumulate(x, y, h):
    # Banded DP over (cost, path_length); steps diagonal, right, down with
    # unit weights.  Ties in accumulated cost resolve to the longer path so
    # the normalized value is well defined (and matched by the enumeration
    # oracle in the tests).
    n = x.shape[0]
    m = y.shape[0]
    inf = np.inf
    prev_cost = np.full(m, inf)
    prev_len = np.zeros(m, dtype=np.int64)
    cur_cost = np.full(m, inf)
    cur_len = np.zeros(m, dtype=np.int64)

    for i in range(n):
        jlo, jhi = _band_row_limits(i, n, m, h)
        # reset only the cells this row writes plus those row i+1 will read
        if i + 1 < n:
            nlo, nhi = _band_row_limits(i + 1, n, m, h)
        else:
            nlo, nhi = jlo, jhi
        clo = jlo - 1 if jlo > 0 else 0
        if nlo - 1 < clo:
            clo = nlo - 1 if nlo > 0 else 0
        chi = jhi if jhi > nhi else nhi
        for j in range(clo, chi + 1):
            cur_cost[j] = inf
            cur_len[j] = 0
        for j in range(jlo, jhi + 1):
            d = x[i] - y[j]
            c = d * d
            if i == 0 and j == 0:
                cur_cost[0] = c
                cur_len[0] = 1
                continue
            best_cost = inf
            best_len = 0
            if i > 0 and j > 0:
                best_cost = prev_cost[j - 1]
                best_len = prev_len[j - 1]
            if i > 0:
                pc_ = prev_cost[j]
                if pc_ < best_cost or (pc_ == best_cost and prev_len[j] > best_len):
                    best_cost = pc_
                    best_len = prev_len[j]
            if j > 0:
                cc_ = cur_cost[j - 1]
                if cc_ < best_cost or (cc_ == best_cost and cur_len[j - 1] > best_len):
                    best_cost = cc_
                    best_len = cur_len[j - 1]
            if best_cost < inf:
                cur_cost[j] = best_cost + c
                cur_len[j] = best_len + 1
        prev_cost, cur_cost = cur_cost, prev_cost
        prev_len, cur_len = cur_len, prev_len

    return prev_cost[m - 1], prev_len[m - 1]


@njit(cache=True)
def _dtw_accumulate_path(x, y, h, dirs, row_lo):
    # Same DP as _dtw_accumulate but records the chosen step per cell
    # (1=diagonal, 2=down, 3=right) in band-relative storage for backtracking.
    n = x.shape[0]
    m = y.shape[0]
    inf = np.inf
    prev_cost = np.full(m, inf)
    prev_len = np.zeros(m, dtype=np.int64)
    cur_cost = np.full(m, inf)
    cur_len = np.zeros(m, dtype=np.int64)

    for i in range(n):
        jlo, jhi = _band_row_limits(i, n, m, h)
        row_lo[i] = jlo
        if i + 1 < n:
            nlo, nhi = _band_row_limits(i + 1, n, m, h)
        else:
            nlo, nhi = jlo, jhi
        clo = jlo - 1 if jlo > 0 else 0
        if nlo - 1 < clo:
            clo = nlo - 1 if nlo > 0 else 0
        chi = jhi if jhi > nhi else nhi
        for j in range(clo, chi + 1):
            cur_cost[j] = inf
            cur_len[j] = 0
        for j in range(jlo, jhi + 1):
            d = x[i] - y[j]
            c = d * d
            if i == 0 and j == 0:
                cur_cost[0] = c
                cur_len[0] = 1
                dirs[0, 0] = 0
                continue
            best_cost = inf
            best_len = 0
            step = 0
            if i > 0 and j > 0:
                best_cost = prev_cost[j - 1]
                best_len = prev_len[j - 1]
                step = 1
            if i > 0:
                pc_ = prev_cost[j]
                if pc_ < best_cost or (pc_ == best_cost and prev_len[j] > best_len):
                    best_cost = pc_
                    best_len = prev_len[j]
                    step = 2
            if j > 0:
                cc_ = cur_cost[j - 1]
                if cc_ < best_cost or (cc_ == best_cost and cur_len[j - 1] > best_len):
                    best_cost = cc_
                    best_len = cur_len[j - 1]
                    step = 3
            if best_cost < inf:
                cur_cost[j] = best_cost + c
                cur_len[j] = best_len + 1
                dirs[i, j - jlo] = step
        prev_cost, cur_cost = cur_cost, prev_cost
        prev_len, cur_len = cur_len, prev_len

    return prev_cost[m - 1], prev_len[m - 1]


def dtw(x, y, band_frac=0.1):
    """Banded dynamic time warping distance in per-point units.

    Local cost is the squared difference; allowed steps are diagonal, right,
    and down; the search is restricted to a Sakoe-Chiba band of half-width
    max(1, ceil(band_frac * max(n, m))) around the warped diagonal.  Returns
    sqrt(total_cost / path_length) for the optimal path, so values are
    comparable with euclidean_rms.  band_frac=1 gives the exact full matrix.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, m = len(x), len(y)
    if n < 2 or m < 2:
        raise LengthMismatch("dtw needs at least 2 samples per series")
    h = _band_half_width(band_frac, n, m)
    cost, length = _dtw_accumulate(x, y, h)
    if not np.isfinite(cost):
        raise BandTooNarrow(f"no complete path with half-width {h}")
    return float(np.sqrt(cost / length))


def dtw_with_path(x, y, band_frac=0.1):
    """dtw plus the optimal warping path as an array of (i, j) index pairs."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, m = len(x), len(y)
    if n < 2 or m < 2:
        raise LengthMismatch("dtw needs at least 2 samples per series")
    h = _band_half_width(band_frac, n, m)
    width = 2 * h + int(math.ceil(2.0 * h * (m - 1) / (n - 1))) + 3
    dirs = np.zeros((n, min(width, m)), dtype=np.uint8)
    row_lo = np.zeros(n, dtype=np.int64)
    cost, length = _dtw_accumulate_path(x, y, h, dirs, row_lo)
    if not np.isfinite(cost):
        raise BandTooNarrow(f"no complete path with half-width {h}")
    path = np.empty((length, 2), dtype=np.int64)
    i, j = n - 1, m - 1
    for p in range(length - 1, -1, -1):
        path[p, 0] = i
        path[p, 1] = j
        step = dirs[i, j - row_lo[i]]
        if step == 1:
            i, j = i - 1, j - 1
        elif step == 2:
            i = i - 1
        elif step == 3:
            j = j - 1
    return float(np.sqrt(cost / length)), path


def dtw_envelope(q, band_frac=0.1):
    """Running min/max of q over the band's column window (half-width 2h).

    For equal-length series the band admits |i - j| <= 2h, so the envelope
    window must span 2h each side.  Feeds dtw_lower_bound.
    """
    q = np.asarray(q, dtype=np.float64)
    n = len(q)
    w = 2 * _band_half_width(band_frac, n, n)
    size = 2 * w + 1
    lo = minimum_filter1d(q, size=size, mode="nearest")
    hi = maximum_filter1d(q, size=size, mode="nearest")
    return lo, hi


def dtw_lower_bound(c, env_lo, env_hi):
    """Keogh-style lower bound on the banded, path-normalized DTW distance.

    Every admissible path matches each candidate sample to some query sample
    inside the band window, so summing each sample's squared distance to the
    query envelope under-counts the optimal path cost; dividing by the maximum
    possible path length keeps the bound below sqrt(cost / true_length).
    """
    c = np.asarray(c, dtype=np.float64)
    n = len(c)
    over = np.clip(c - env_hi, 0.0, None)
    under = np.clip(env_lo - c, 0.0, None)
    total = float(np.dot(over, over) + np.dot(under, under))
    return np.sqrt(total / (2 * n - 1))


def similarity_score(pc, ed, dtw_dist, k):
    """Ensemble similarity score: pc - (ed + dtw) / k, not clamped.

    Clamping would destroy the ranking information used by top-K retrieval;
    display layers clamp for presentation instead.
    """
    if not (K_MIN <= k <= K_MAX):
        raise KOutOfRange(f"k={k} outside [{K_MIN}, {K_MAX}]")
    return float(pc - (ed + dtw_dist) / k)


def compare_tracks(a: Track, b: Track, items=None, cfg=None) -> SimilarityBreakdown:
    """Full similarity breakdown between two tracks over a monitor item set.

    Per shared channel, each series is z-scored over its own samples; ED and
    PC run on a grid_n resampling and DTW on the z-scored unresampled series.
    Channels named in items but missing from either track are skipped and
    reported in the breakdown.
    """
    items = items if items is not None else MonitorItemSet()
    cfg = cfg if cfg is not None else MetricConfig()
    if a.key != b.key and not cfg.allow_cross_type:
        raise TypeMismatch(f"{a.key} != {b.key} (set allow_cross_type to override)")

    shared = [c for c in items if c in a.channels and c in b.channels]
    missing = tuple(c for c in items if c not in a.channels or c not in b.channels)
    if not shared:
        raise NoSharedChannels(
            f"tracks {a.track_id!r} and {b.track_id!r} share no channel in {list(items)}"
        )

    def grid(series, values):
        # reconstructions already live on a matching uniform grid
        if series.uniform_grid and len(values) == cfg.grid_n:
            return values
        return resample_values(series.times, values, cfg.grid_n)

    per_channel = {}
    weights = []
    for name in shared:
        sa, sb = a.channels[name], b.channels[name]
        za, fa = zscore(sa.values)
        zb, fb = zscore(sb.values)
        ed = euclidean_rms(grid(sa, za), grid(sb, zb))
        pc = pearson(grid(sa, sa.values), grid(sb, sb.values), fa, fb)
        d = dtw(za, zb, cfg.dtw_band_frac)
        ss = similarity_score(pc, ed, d, cfg.k)
        per_channel[name] = ChannelMetrics(ed=ed, dtw=d, pc=pc, ss=ss)
        weights.append(cfg.weight(name))

    w = np.asarray(weights, dtype=np.float64)
    if w.sum() <= 0:
        raise ValueError("channel weights over shared channels sum to zero")
    w = w / w.sum()

    def agg(attr):
        return float(np.dot(w, [getattr(per_channel[c], attr) for c in shared]))

    return SimilarityBreakdown(
        per_channel=per_channel,
        aggregate_ed=agg("ed"),
        aggregate_dtw=agg("dtw"),
        aggregate_pc=agg("pc"),
        aggregate_ss=agg("ss"),
        missing=missing,
    )


def calibrate_k(pairs, cfg=None, items=None):
    """Pick the k in K_GRID maximizing Welch's t of aggregate_ss between labels.

    `pairs` is a list of LabeledPair with inline tracks.  The base metrics are
    k-independent, so each pair is compared once and the score recomputed per
    grid point.  Ties break toward smaller k.
    """
    cfg = cfg if cfg is not None else MetricConfig()
    items = items if items is not None else MonitorItemSet()
    sim, dis = [], []
    for p in pairs:
        if p.label == "similar":
            sim.append(p)
        elif p.label == "dissimilar":
            dis.append(p)
        else:
            raise ValueError(f"unknown label {p.label!r}")
    if len(sim) < 2 or len(dis) < 2:
        raise InsufficientLabels(
            f"need >= 2 of each label, got {len(sim)} similar / {len(dis)} dissimilar"
        )

    def base_metrics(p):
        bd = compare_tracks(p.track_a, p.track_b, items, cfg)
        shared = list(bd.per_channel)
        w = np.asarray([cfg.weight(c) for c in shared])
        w = w / w.sum()
        pc = np.asarray([bd.per_channel[c].pc for c in shared])
        dist = np.asarray(
            [bd.per_channel[c].ed + bd.per_channel[c].dtw for c in shared]
        )
        return float(np.dot(w, pc)), float(np.dot(w, dist))

    sim_base = [base_metrics(p) for p in sim]
    dis_base = [base_metrics(p) for p in dis]

    best_k, best_t = None, -np.inf
    for k in K_GRID:
        ss_sim = [pc - d / k for pc, d in sim_base]
        ss_dis = [pc - d / k for pc, d in dis_base]
        t, _ = welch_t(ss_sim, ss_dis)
        if t > best_t:
            best_k, best_t = k, t
    return float(best_k)
