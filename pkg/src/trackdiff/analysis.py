"""Operator-facing analyses: top-K retrieval, anomaly detection, stat diff.

Also hosts the seeded synthetic pair generators used for validation studies
and classifier training when operator-labeled data is unavailable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compression import reconstruct_track
from .errors import NoSharedChannels, TargetNotFound
from .metrics import (
    MetricConfig,
    compare_tracks,
    dtw_envelope,
    dtw_lower_bound,
    dtw_with_path,
    euclidean_rms,
    pearson,
)
from .model import (
    DEFAULT_MONITOR_ITEMS,
    ChannelSeries,
    MonitorItemSet,
    Track,
    TrackKey,
    build_track,
    resample_to_grid,
    validate_track,
    zscore,
)
from .stats import t_two_sided_p, welch_t


@dataclass(frozen=True)
class RankedMatch:
    track_id: str
    aggregate_ss: float
    breakdown: object
    dr_refs: tuple[str, ...]

    def as_dict(self):
        return {
            "track_id": self.track_id,
            "aggregate_ss": self.aggregate_ss,
            "breakdown": self.breakdown.as_dict(),
            "dr_refs": list(self.dr_refs),
        }


@dataclass(frozen=True)
class AnomalyInterval:
    channel_name: str
    start_t: float
    end_t: float
    severity: float
    mean_residual: float

    def as_dict(self):
        return {
            "channel_name": self.channel_name,
            "start_t": self.start_t,
            "end_t": self.end_t,
            "severity": self.severity,
            "mean_residual": self.mean_residual,
        }


@dataclass(frozen=True)
class ChannelStats:
    t_stat: float
    dof: float
    p_value: float
    mean_a: float
    mean_b: float
    std_a: float
    std_b: float
    mean_delta: float
    min_delta: float
    max_delta: float

    def as_dict(self):
        return self.__dict__.copy()


@dataclass(frozen=True)
class StatDiffReport:
    per_channel: dict[str, ChannelStats]

    def as_dict(self):
        return {"per_channel": {c: s.as_dict() for c, s in self.per_channel.items()}}


def _grid_representation(track: Track, grid_n: int) -> Track:
    """Resample every channel onto its own uniform grid of grid_n points."""
    channels = {}
    for name, s in track.channels.items():
        grid = np.linspace(s.times[0], s.times[-1], grid_n)
        channels[name] = ChannelSeries(
            channel_name=name,
            times=grid,
            values=resample_to_grid(s, grid_n),
            uniform_grid=True,
        )
    return Track(
        track_id=track.track_id,
        key=track.key,
        start_epoch=track.start_epoch,
        channels=channels,
        dr_refs=track.dr_refs,
    )


def topk_similar(target, k, store, items=None, cfg=None):
    """Rank same-type stored tracks by ensemble similarity to the target.

    `target` is either a stored track_id or an external Track.  Candidates
    come from query_same_type minus the target itself and are compared on
    their grid_n reconstructions; an external raw target is resampled to the
    same grid so all comparisons run at one scale.  Results are sorted by
    aggregate_ss descending (ties by track_id) with each match's DR
    references attached.

    Scanning a large archive is dominated by the warping distance, so each
    candidate first gets a band-envelope lower bound on every channel's DTW;
    that yields an upper bound on its aggregate score, and candidates that
    provably cannot displace the current k-th best skip the full dynamic
    program.  Pruning is strict, so results match an exhaustive scan exactly.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    k = int(k)
    items = items if items is not None else MonitorItemSet()
    cfg = cfg if cfg is not None else MetricConfig()

    if isinstance(target, Track):
        target_id = target.track_id
        target_key = target.key
        target_repr = _grid_representation(validate_track(target), cfg.grid_n)
    else:
        target_id = target
        if target_id not in store:
            raise TargetNotFound(f"track {target_id!r} not in store")
        ct = store.read_compressed(target_id)
        target_key = ct.key
        target_repr = reconstruct_track(ct, cfg.grid_n)

    prep = {}
    for name, s in target_repr.channels.items():
        if name not in items.items:
            continue
        z, flag = zscore(s.values)
        env_lo, env_hi = dtw_envelope(z, cfg.dtw_band_frac)
        prep[name] = (s.values, z, flag, env_lo, env_hi)

    def score_upper_bound(cand):
        shared = [c for c in items if c in prep and c in cand.channels]
        if not shared:
            return None
        ub = 0.0
        wsum = 0.0
        for name in shared:
            tvals, tz, tflag, env_lo, env_hi = prep[name]
            cs = cand.channels[name]
            cz, cflag = zscore(cs.values)
            ed = euclidean_rms(tz, cz)
            pc = pearson(tvals, cs.values, tflag, cflag)
            lb = dtw_lower_bound(cz, env_lo, env_hi)
            w = cfg.weight(name)
            ub += w * (pc - (ed + lb) / cfg.k)
            wsum += w
        return ub / wsum if wsum > 0 else None

    exact: list[RankedMatch] = []
    kth_best = -np.inf
    for cand_id in store.query_same_type(target_key):
        if cand_id == target_id:
            continue
        cand = reconstruct_track(store.read_compressed(cand_id), cfg.grid_n)
        ub = score_upper_bound(cand)
        if ub is None:
            continue
        if len(exact) >= k and ub < kth_best:
            continue
        bd = compare_tracks(target_repr, cand, items, cfg)
        exact.append(
            RankedMatch(
                track_id=cand_id,
                aggregate_ss=bd.aggregate_ss,
                breakdown=bd,
                dr_refs=tuple(store.entry(cand_id).dr_refs),
            )
        )
        if len(exact) >= k:
            kth_best = sorted(m.aggregate_ss for m in exact)[-k]
    exact.sort(key=lambda m: (-m.aggregate_ss, m.track_id))
    return exact[:k]


def _runs_over_threshold(mask, min_run):
    """Maximal runs of True with length >= min_run, then merge near runs."""
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    runs = [(s, e) for s, e in runs if e - s + 1 >= min_run]
    merged = []
    for s, e in runs:
        if merged and s - merged[-1][1] - 1 < min_run:
            merged[-1] = (merged[-1][0], e)
        else:
            merged.append((s, e))
    return merged


def detect_anomalies(target: Track, reference: Track, threshold_z=3.0, min_run=5,
                     items=None, cfg=None):
    """Flag intervals where the target deviates from a reference normal track.

    Both series are z-scored, aligned by the DTW optimal path (tolerating
    timing offsets between sessions), and each target sample's residual is its
    distance from the mean of matched reference samples.  Runs of at least
    min_run consecutive residuals above threshold_z become intervals; runs
    separated by fewer than min_run samples merge.
    """
    if threshold_z <= 0:
        raise ValueError("threshold_z must be positive")
    if min_run < 1:
        raise ValueError("min_run must be >= 1")
    items = items if items is not None else MonitorItemSet()
    cfg = cfg if cfg is not None else MetricConfig()
    shared = [c for c in items if c in target.channels and c in reference.channels]
    if not shared:
        raise NoSharedChannels("target and reference share no requested channel")

    intervals = []
    for name in shared:
        st, sr = target.channels[name], reference.channels[name]
        zx, _ = zscore(st.values)
        zy, _ = zscore(sr.values)
        _, path = dtw_with_path(zx, zy, cfg.dtw_band_frac)

        matched_sum = np.zeros(len(zx))
        matched_cnt = np.zeros(len(zx))
        np.add.at(matched_sum, path[:, 0], zy[path[:, 1]])
        np.add.at(matched_cnt, path[:, 0], 1.0)
        residual = np.abs(zx - matched_sum / matched_cnt)

        times = st.times
        dt = float(np.median(np.diff(times)))
        for s, e in _runs_over_threshold(residual > threshold_z, min_run):
            end_t = float(times[e]) if e > s else float(times[s]) + dt
            intervals.append(
                AnomalyInterval(
                    channel_name=name,
                    start_t=float(times[s]),
                    end_t=end_t,
                    severity=float(residual[s : e + 1].max()),
                    mean_residual=float(residual[s : e + 1].mean()),
                )
            )
    return intervals


def stat_diff(a: Track, b: Track, items=None) -> StatDiffReport:
    """Welch's two-sample t-test per shared channel on raw values."""
    items = items if items is not None else MonitorItemSet()
    shared = [c for c in items if c in a.channels and c in b.channels]
    if not shared:
        raise NoSharedChannels("tracks share no requested channel")
    per_channel = {}
    for name in shared:
        va, vb = a.channels[name].values, b.channels[name].values
        t, dof = welch_t(va, vb)
        per_channel[name] = ChannelStats(
            t_stat=t,
            dof=dof,
            p_value=t_two_sided_p(t, dof),
            mean_a=float(va.mean()),
            mean_b=float(vb.mean()),
            std_a=float(va.std(ddof=1)),
            std_b=float(vb.std(ddof=1)),
            mean_delta=float(va.mean() - vb.mean()),
            min_delta=float(va.min() - vb.min()),
            max_delta=float(va.max() - vb.max()),
        )
    return StatDiffReport(per_channel=per_channel)


# ---------------------------------------------------------------------------
# synthetic pair generation
# ---------------------------------------------------------------------------

SYNTH_KEY = TrackKey(spacecraft="SYNTH", antenna="DSS-99", comm_type="downlink")


@dataclass(frozen=True)
class SynthPairSpec:
    length: int = 2000
    snr: float = 10.0
    correlated: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.length < 16:
            raise ValueError("length too short for a meaningful track")
        if self.snr <= 0:
            raise ValueError("snr must be positive")


def _smooth_signal(rng, length, n_sin=3, n_ramp=2, max_cycles=5.0):
    """Sum of random-phase sinusoids plus ramp events: slow trends with kinks."""
    t = np.arange(length, dtype=float)
    sig = np.zeros(length)
    for _ in range(n_sin):
        cycles = rng.uniform(0.8, max_cycles)
        sig += rng.uniform(0.5, 1.5) * np.sin(
            2 * np.pi * cycles * t / length + rng.uniform(0, 2 * np.pi)
        )
    for _ in range(n_ramp):
        t0 = rng.uniform(0.1, 0.8) * length
        width = rng.uniform(0.05, 0.3) * length
        sig += rng.uniform(-1.5, 1.5) * np.clip((t - t0) / width, 0.0, 1.0)
    return sig


def synth_pair(spec: SynthPairSpec):
    """Two tracks over the 7 default monitor items, correlated or not.

    Correlated mode shares one smooth base signal per channel; both modes add
    per-channel independent Gaussian noise with power base_power/snr.  Output
    is bit-identical for identical specs.
    """
    rng = np.random.default_rng(spec.seed)
    times = np.arange(spec.length, dtype=float)
    chans_a, chans_b = [], []
    for name in DEFAULT_MONITOR_ITEMS:
        base_a = _smooth_signal(rng, spec.length)
        base_b = base_a if spec.correlated else _smooth_signal(rng, spec.length)
        noise_std = np.sqrt(base_a.var() / spec.snr)
        chans_a.append(
            ChannelSeries(name, times, base_a + rng.normal(0.0, noise_std, spec.length))
        )
        chans_b.append(
            ChannelSeries(name, times, base_b + rng.normal(0.0, noise_std, spec.length))
        )
    mode = "corr" if spec.correlated else "uncorr"
    a = build_track(f"synth-{mode}-{spec.seed}-a", SYNTH_KEY, 0.0, chans_a)
    b = build_track(f"synth-{mode}-{spec.seed}-b", SYNTH_KEY, 0.0, chans_b)
    return a, b


def synth_mixed_pair(length, rho, seed, channel="carrier_power", noise_std=0.02,
                     max_cycles=5.0):
    """Single-channel pair whose Pearson correlation targets rho in [-1, 1].

    b mixes a's base with an independent signal so corr(a, b) lands near rho,
    which is how the compression-fidelity sweep covers the full correlation
    range.  max_cycles bounds the sinusoid frequencies; higher values make
    the signals harder to compress.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must be in [-1, 1]")
    rng = np.random.default_rng(seed)
    times = np.arange(length, dtype=float)
    s1 = _smooth_signal(rng, length, n_sin=5, n_ramp=2, max_cycles=max_cycles)
    s2 = _smooth_signal(rng, length, n_sin=5, n_ramp=2, max_cycles=max_cycles)
    s1 = (s1 - s1.mean()) / s1.std()
    s2 = (s2 - s2.mean()) / s2.std()
    # remove the sample correlation between the two bases so the mix is exact
    s2 = s2 - np.dot(s1, s2) / np.dot(s1, s1) * s1
    s2 /= s2.std()
    mixed = rho * s1 + np.sqrt(1.0 - rho * rho) * s2
    va = s1 + rng.normal(0.0, noise_std, length)
    vb = mixed + rng.normal(0.0, noise_std, length)
    a = build_track(f"mix-{seed}-a", SYNTH_KEY, 0.0, [ChannelSeries(channel, times, va)])
    b = build_track(f"mix-{seed}-b", SYNTH_KEY, 0.0, [ChannelSeries(channel, times, vb)])
    return a, b
