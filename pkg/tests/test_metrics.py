import numpy as np
import pytest

from trackdiff.errors import (
    InsufficientLabels,
    KOutOfRange,
    LengthMismatch,
    NoSharedChannels,
    TypeMismatch,
)
from trackdiff.metrics import (
    MetricConfig,
    calibrate_k,
    compare_tracks,
    dtw,
    dtw_with_path,
    euclidean_rms,
    pearson,
    similarity_score,
)
from trackdiff.model import LabeledPair, MonitorItemSet, TrackKey
from trackdiff.stats import welch_t

from conftest import make_track


def enumerate_dtw_oracle(x, y):
    """Exhaustive search over every monotone warping path.

    Minimizes total squared cost; among minimal-cost paths takes the longest,
    matching the DP tie-break.  Returns sqrt(cost / length).
    """
    n, m = len(x), len(y)
    best = [np.inf, 0]  # cost, length

    def walk(i, j, cost, length):
        cost = cost + (x[i] - y[j]) ** 2
        length += 1
        if i == n - 1 and j == m - 1:
            if cost < best[0] or (cost == best[0] and length > best[1]):
                best[0], best[1] = cost, length
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, cost, length)
        if i + 1 < n:
            walk(i + 1, j, cost, length)
        if j + 1 < m:
            walk(i, j + 1, cost, length)

    walk(0, 0, 0.0, 0)
    return np.sqrt(best[0] / best[1])


class TestEuclidean:
    def test_identity(self):
        x = np.arange(5.0)
        assert euclidean_rms(x, x) == 0.0

    def test_direct_value(self):
        assert euclidean_rms([0.0, 0.0], [3.0, 4.0]) == pytest.approx(np.sqrt(12.5), abs=1e-12)

    def test_matches_naive_sum(self):
        rng = np.random.default_rng(0)
        x, y = rng.normal(size=300), rng.normal(size=300)
        naive = 0.0
        for a, b in zip(x, y):
            naive += (a - b) ** 2
        assert euclidean_rms(x, y) == pytest.approx(np.sqrt(naive / 300), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            euclidean_rms([1.0, 2.0], [1.0, 2.0, 3.0])


class TestPearson:
    def test_positive_affine(self):
        x = np.array([1.0, 3.0, 2.0, 5.0])
        assert pearson(x, 2 * x + 1) == pytest.approx(1.0, abs=1e-12)

    def test_negation(self):
        x = np.array([1.0, 3.0, 2.0, 5.0])
        assert pearson(x, -x) == pytest.approx(-1.0, abs=1e-12)

    def test_matches_moment_oracle(self):
        rng = np.random.default_rng(1)
        x, y = rng.normal(size=200), rng.normal(size=200)
        mx, my = x.mean(), y.mean()
        cov = np.sum((x - mx) * (y - my))
        oracle = cov / np.sqrt(np.sum((x - mx) ** 2) * np.sum((y - my) ** 2))
        assert pearson(x, y) == pytest.approx(oracle, abs=1e-12)

    def test_constant_flags(self):
        x = np.full(5, 3.0)
        y = np.arange(5.0)
        assert pearson(x, y, x_const=True) == 0.0
        assert pearson(x, np.full(5, 3.0), x_const=True, y_const=True) == 1.0
        assert pearson(x, np.full(5, 9.0), x_const=True, y_const=True) == 0.0

    def test_affine_invariance_random(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            x, y = rng.normal(size=50), rng.normal(size=50)
            a = rng.uniform(0.1, 5.0)
            b = rng.normal()
            assert pearson(a * x + b, y) == pytest.approx(pearson(x, y), abs=1e-9)


class TestDtw:
    def test_identity(self):
        rng = np.random.default_rng(3)
        for n in (2, 5, 17, 100):
            x = rng.normal(size=n)
            assert dtw(x, x) == 0.0

    def test_constant_series(self):
        assert dtw(np.full(4, 1.5), np.full(7, -2.5), band_frac=1.0) == pytest.approx(4.0, abs=1e-12)

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(500):
            n = int(rng.integers(2, 7))
            m = int(rng.integers(2, 7))
            x = rng.choice([-1.0, 0.0, 1.0], size=n)
            y = rng.choice([-1.0, 0.0, 1.0], size=m)
            assert dtw(x, y, band_frac=1.0) == enumerate_dtw_oracle(x, y)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(2, 40))
            m = int(rng.integers(2, 40))
            x, y = rng.normal(size=n), rng.normal(size=m)
            assert dtw(x, y) == pytest.approx(dtw(y, x), abs=1e-12)

    def test_not_above_euclidean_for_equal_length(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            n = int(rng.integers(2, 60))
            x, y = rng.normal(size=n), rng.normal(size=n)
            assert dtw(x, y) <= euclidean_rms(x, y) + 1e-12

    def test_band_stays_connected_at_extreme_length_ratios(self):
        rng = np.random.default_rng(7)
        for n, m in [(2, 200), (200, 2), (3, 1000), (50, 7)]:
            x, y = rng.normal(size=n), rng.normal(size=m)
            assert np.isfinite(dtw(x, y, band_frac=0.01))

    def test_banded_equals_full_for_aligned_series(self):
        rng = np.random.default_rng(8)
        x = np.sin(np.linspace(0, 6, 300)) + 0.05 * rng.normal(size=300)
        y = np.sin(np.linspace(0, 6, 300)) + 0.05 * rng.normal(size=300)
        assert dtw(x, y, 0.1) == pytest.approx(dtw(x, y, 1.0), rel=1e-9)

    def test_path_endpoints_and_monotonicity(self):
        rng = np.random.default_rng(9)
        x, y = rng.normal(size=30), rng.normal(size=45)
        dist, path = dtw_with_path(x, y)
        assert tuple(path[0]) == (0, 0)
        assert tuple(path[-1]) == (29, 44)
        steps = np.diff(path, axis=0)
        assert np.all(steps >= 0) and np.all(steps <= 1) and np.all(steps.sum(axis=1) >= 1)
        # path cost reproduces the reported distance
        cost = sum((x[i] - y[j]) ** 2 for i, j in path)
        assert dist == pytest.approx(np.sqrt(cost / len(path)), abs=1e-12)
        assert dist == pytest.approx(dtw(x, y), abs=1e-12)


class TestSimilarityScore:
    def test_identical(self):
        for k in (2.0, 4.0, 10.0):
            assert similarity_score(1.0, 0.0, 0.0, k) == 1.0

    def test_direct_substitution(self):
        assert similarity_score(0.9, 0.4, 0.2, 4.0) == pytest.approx(0.75, abs=1e-15)

    def test_k_out_of_range(self):
        with pytest.raises(KOutOfRange):
            similarity_score(0.5, 0.1, 0.1, 1.0)
        with pytest.raises(KOutOfRange):
            similarity_score(0.5, 0.1, 0.1, 10.5)

    def test_never_exceeds_pc(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            pc = rng.uniform(-1, 1)
            ed, dd = rng.uniform(0, 3), rng.uniform(0, 3)
            k = rng.uniform(2, 10)
            ss = similarity_score(pc, ed, dd, k)
            assert ss <= pc
            if ed + dd == 0:
                assert ss == pc


class TestCompareTracks:
    def _pair(self, key, seed=0, shared=True, n=400):
        rng = np.random.default_rng(seed)
        t = np.arange(n, dtype=float)
        base = np.sin(2 * np.pi * t / n * 3) + 0.001 * t
        mk = lambda sig: {"carrier_power": sig + 0.05 * rng.normal(size=n),
                          "symbol_rate": sig * 0.5 + 0.05 * rng.normal(size=n)}
        a = make_track("a", key, mk(base))
        b = make_track("b", key, mk(base if shared else rng.normal(size=n)))
        return a, b

    def test_self_comparison_is_unity(self, key):
        a, _ = self._pair(key)
        items = MonitorItemSet(items=("carrier_power", "symbol_rate"))
        bd = compare_tracks(a, a, items)
        for cm in bd.per_channel.values():
            assert cm.ed == 0.0 and cm.dtw == 0.0
            assert cm.pc == pytest.approx(1.0, abs=1e-12)
            assert cm.ss == pytest.approx(1.0, abs=1e-12)
        assert bd.aggregate_ss == pytest.approx(1.0, abs=1e-12)

    def test_correlated_pair_small_correction(self, key):
        a, b = self._pair(key, seed=1, shared=True)
        items = MonitorItemSet(items=("carrier_power", "symbol_rate"))
        bd = compare_tracks(a, b, items)
        assert bd.aggregate_pc > 0.9
        assert bd.aggregate_pc - bd.aggregate_ss < 0.15

    def test_independent_pair_large_correction(self, key):
        a, b = self._pair(key, seed=2, shared=False)
        items = MonitorItemSet(items=("carrier_power", "symbol_rate"))
        bd = compare_tracks(a, b, items)
        assert abs(bd.aggregate_pc) < 0.3
        assert bd.aggregate_ss < bd.aggregate_pc - 0.1

    def test_symmetry(self, key):
        a, b = self._pair(key, seed=3)
        items = MonitorItemSet(items=("carrier_power", "symbol_rate"))
        ab = compare_tracks(a, b, items)
        ba = compare_tracks(b, a, items)
        assert ab.aggregate_ss == pytest.approx(ba.aggregate_ss, abs=1e-9)
        assert ab.aggregate_ed == pytest.approx(ba.aggregate_ed, abs=1e-9)
        assert ab.aggregate_dtw == pytest.approx(ba.aggregate_dtw, abs=1e-9)
        assert ab.aggregate_pc == pytest.approx(ba.aggregate_pc, abs=1e-9)

    def test_missing_channels_reported(self, key):
        a = make_track("a", key, {"carrier_power": np.arange(10.0)})
        b = make_track("b", key, {"carrier_power": np.arange(10.0) * 2,
                                  "symbol_rate": np.arange(10.0)})
        items = MonitorItemSet(items=("carrier_power", "symbol_rate"))
        bd = compare_tracks(a, b, items)
        assert bd.missing == ("symbol_rate",)
        assert set(bd.per_channel) == {"carrier_power"}

    def test_no_shared_channels(self, key):
        a = make_track("a", key, {"x": np.arange(10.0)})
        b = make_track("b", key, {"y": np.arange(10.0)})
        with pytest.raises(NoSharedChannels):
            compare_tracks(a, b, MonitorItemSet(items=("x", "y")))

    def test_type_mismatch(self, key):
        a = make_track("a", key, {"carrier_power": np.arange(10.0)})
        other = TrackKey("MSL", "DSS-14", "uplink")
        b = make_track("b", other, {"carrier_power": np.arange(10.0)})
        items = MonitorItemSet(items=("carrier_power",))
        with pytest.raises(TypeMismatch):
            compare_tracks(a, b, items)
        bd = compare_tracks(a, b, items, MetricConfig(allow_cross_type=True))
        assert bd.aggregate_ss == pytest.approx(1.0, abs=1e-9)

    def test_weighted_aggregation(self, key):
        a, b = self._pair(key, seed=4)
        items = MonitorItemSet(items=("carrier_power", "symbol_rate"))
        cfg = MetricConfig(channel_weights={"carrier_power": 3.0, "symbol_rate": 1.0})
        bd = compare_tracks(a, b, items, cfg)
        cp, sr = bd.per_channel["carrier_power"], bd.per_channel["symbol_rate"]
        assert bd.aggregate_ss == pytest.approx((3 * cp.ss + sr.ss) / 4, abs=1e-12)

    def test_all_outputs_finite(self, key):
        rng = np.random.default_rng(11)
        items = MonitorItemSet(items=("carrier_power",))
        for trial in range(10):
            na, nb = int(rng.integers(2, 300)), int(rng.integers(2, 300))
            a = make_track("a", key, {"carrier_power": rng.normal(size=na)})
            b = make_track("b", key, {"carrier_power": rng.normal(size=nb)})
            bd = compare_tracks(a, b, items)
            cm = bd.per_channel["carrier_power"]
            assert all(np.isfinite(v) for v in (cm.ed, cm.dtw, cm.pc, cm.ss))


class TestMetricConfig:
    def test_k_range_enforced(self):
        with pytest.raises(KOutOfRange):
            MetricConfig(k=1.0)
        with pytest.raises(KOutOfRange):
            MetricConfig(k=11.0)

    def test_band_frac_range(self):
        with pytest.raises(ValueError):
            MetricConfig(dtw_band_frac=0.0)


class TestCalibrateK:
    def _labeled_set(self, key, n_each=4, seed=0):
        rng = np.random.default_rng(seed)
        items = MonitorItemSet(items=("carrier_power",))
        pairs = []
        t = np.arange(300, dtype=float)
        for i in range(n_each):
            base = np.sin(2 * np.pi * t / 300 * (2 + i))
            a = make_track(f"s{i}a", key, {"carrier_power": base + 0.05 * rng.normal(size=300)})
            b = make_track(f"s{i}b", key, {"carrier_power": base + 0.05 * rng.normal(size=300)})
            pairs.append(LabeledPair(a, b, "similar"))
        for i in range(n_each):
            a = make_track(f"d{i}a", key, {"carrier_power": rng.normal(size=300)})
            b = make_track(f"d{i}b", key, {"carrier_power": rng.normal(size=300)})
            pairs.append(LabeledPair(a, b, "dissimilar"))
        return pairs, items

    def test_result_is_grid_argmax(self, key):
        pairs, items = self._labeled_set(key)
        cfg = MetricConfig()
        k_star = calibrate_k(pairs, cfg, items)
        assert 2.0 <= k_star <= 10.0

        # brute-force re-scan over the same grid
        def t_for_k(k):
            sim, dis = [], []
            for p in pairs:
                bd = compare_tracks(p.track_a, p.track_b, items, cfg)
                ss = bd.aggregate_pc - (bd.aggregate_ed + bd.aggregate_dtw) / k
                (sim if p.label == "similar" else dis).append(ss)
            return welch_t(sim, dis)[0]

        ks = [2.0 + 0.5 * i for i in range(17)]
        ts = {k: t_for_k(k) for k in ks}
        assert ts[k_star] == pytest.approx(max(ts.values()), abs=1e-9)
        # ties broken toward smaller k
        best = min(k for k, t in ts.items() if t >= max(ts.values()) - 1e-12)
        assert k_star == best

    def test_single_class_rejected(self, key):
        pairs, items = self._labeled_set(key)
        only_sim = [p for p in pairs if p.label == "similar"]
        with pytest.raises(InsufficientLabels):
            calibrate_k(only_sim, MetricConfig(), items)
