import numpy as np
import pytest

from trackdiff.compression import (
    choose_knots_greedy,
    compress_track,
    fidelity_report,
    fit_hinges,
    reconstruct,
    reconstruct_track,
)
from trackdiff.errors import KnotSpanError
from trackdiff.metrics import MetricConfig
from trackdiff.model import MonitorItemSet

from conftest import make_series, make_track


def hat_basis_matrix(times, knots):
    """Dense hat-function basis evaluated at the sample times."""
    nk = len(knots)
    idx = np.clip(np.searchsorted(knots, times, side="right") - 1, 0, nk - 2)
    u = (times - knots[idx]) / (knots[idx + 1] - knots[idx])
    B = np.zeros((len(times), nk))
    B[np.arange(len(times)), idx] = 1 - u
    B[np.arange(len(times)), idx + 1] = u
    return B


class TestFitHinges:
    def test_exact_line_two_knots(self):
        t = np.arange(50, dtype=float)
        s = make_series("c", 2.0 * t + 1.0, t)
        cc = fit_hinges(s, [0.0, 49.0])
        assert cc.fit_rms < 1e-10
        assert cc.hinge_values == pytest.approx([1.0, 99.0], abs=1e-9)

    def test_exact_piecewise_linear(self):
        t = np.arange(101, dtype=float)
        v = np.where(t <= 40, t, 80.0 - t)
        s = make_series("c", v, t)
        cc = fit_hinges(s, [0.0, 40.0, 100.0])
        assert cc.fit_rms < 1e-10

    def test_least_squares_optimality_and_orthogonality(self):
        rng = np.random.default_rng(20)
        t = np.sort(rng.uniform(0, 100, size=1000))
        t[0], t[-1] = 0.0, 100.0
        v = np.sin(t / 8.0) + 0.2 * rng.normal(size=1000)
        s = make_series("c", v, t)
        knots = np.linspace(0, 100, 10)
        cc = fit_hinges(s, knots)

        fitted = np.interp(t, cc.hinge_times, cc.hinge_values)
        res = fitted - v
        sse = np.sum(res**2)

        # no perturbed hinge assignment does better
        for _ in range(50):
            pert = cc.hinge_values + rng.normal(scale=0.05, size=len(knots))
            alt = np.interp(t, cc.hinge_times, pert) - v
            assert sse <= np.sum(alt**2) + 1e-9

        # residual orthogonal to every hat basis function
        B = hat_basis_matrix(t, cc.hinge_times)
        proj = B.T @ res
        assert np.max(np.abs(proj)) / max(1.0, np.linalg.norm(res)) < 1e-8

    def test_monotone_improvement_on_nested_knots(self):
        rng = np.random.default_rng(21)
        t = np.arange(500, dtype=float)
        v = np.cos(t / 30.0) + 0.1 * rng.normal(size=500)
        s = make_series("c", v, t)
        coarse = np.linspace(0, 499, 6)
        fine = np.sort(np.concatenate([coarse, [77.0, 200.0, 350.0]]))
        sse = {}
        for label, knots in (("coarse", coarse), ("fine", fine)):
            cc = fit_hinges(s, knots)
            fitted = np.interp(t, cc.hinge_times, cc.hinge_values)
            sse[label] = np.sum((fitted - v) ** 2)
        assert sse["fine"] <= sse["coarse"] + 1e-9

    def test_knot_span_errors(self):
        s = make_series("c", np.arange(10.0))
        with pytest.raises(KnotSpanError):
            fit_hinges(s, [0.0])
        with pytest.raises(KnotSpanError):
            fit_hinges(s, [1.0, 9.0])  # does not start at first sample
        with pytest.raises(KnotSpanError):
            fit_hinges(s, [0.0, 5.0, 5.0, 9.0])

    def test_empty_interval_knot_dropped(self):
        # samples cluster at both ends; middle knots have no support
        t = np.concatenate([np.linspace(0, 10, 20), np.linspace(90, 100, 20)])
        v = np.concatenate([np.zeros(20), np.ones(20)])
        s = make_series("c", v, t)
        cc = fit_hinges(s, [0.0, 40.0, 50.0, 60.0, 100.0])
        assert cc.hinge_count < 5
        assert np.isfinite(cc.hinge_values).all()


class TestGreedyKnots:
    def test_budget_two_returns_endpoints(self):
        s = make_series("c", np.sin(np.arange(100.0) / 5))
        assert choose_knots_greedy(s, 2) == [0.0, 99.0]

    def test_spike_capture(self):
        # flat line with one triangular spike
        t = np.arange(400, dtype=float)
        v = np.zeros(400)
        peak, half = 200, 15
        for i in range(peak - half, peak + half + 1):
            v[i] = 10.0 * (1 - abs(i - peak) / half)
        s = make_series("c", v, t)
        knots = choose_knots_greedy(s, 5)
        assert any(peak - half <= kt <= peak + half for kt in knots[1:-1])
        cc = fit_hinges(s, knots)
        res = np.abs(np.interp(t, cc.hinge_times, cc.hinge_values) - v)
        assert res.max() < 1.0  # 10% of spike height

    def test_ratio_1000_at_20k_points_budget_20(self):
        rng = np.random.default_rng(22)
        t = np.arange(20000, dtype=float)
        v = np.sin(2 * np.pi * t / 9000) + 0.05 * rng.normal(size=20000)
        track = make_track("t", None, {}) if False else None
        s = make_series("carrier_power", v, t)
        knots = choose_knots_greedy(s, 20)
        assert len(knots) == 20
        cc = fit_hinges(s, knots)
        report_ratio = 20000 / cc.hinge_count
        assert report_ratio == 1000.0

    def test_budget_at_raw_length_reproduces_exactly(self):
        rng = np.random.default_rng(23)
        v = rng.normal(size=40)
        s = make_series("c", v)
        knots = choose_knots_greedy(s, 40)
        cc = fit_hinges(s, knots)
        assert cc.fit_rms < 1e-9


class TestCompressTrack:
    def test_ratio_over_channels(self, key):
        rng = np.random.default_rng(24)
        n = 10000
        t = np.arange(n, dtype=float)
        chans = {
            name: np.sin(2 * np.pi * t / (3000 + 500 * i)) + 0.02 * rng.normal(size=n)
            for i, name in enumerate(
                ["carrier_power", "carrier_system_noise_temp", "symbol_rate"]
            )
        }
        track = make_track("t", key, chans)
        ct = compress_track(track, 20)
        for rep in ct.reports.values():
            assert rep.ratio >= 500
            assert rep.ratio == rep.raw_points / rep.hinge_count

    def test_lossless_when_budget_equals_length(self, key):
        track = make_track("t", key, {"carrier_power": np.array([1.0, 5.0, 2.0, 8.0])})
        ct = compress_track(track, 4)
        rep = ct.reports["carrier_power"]
        assert rep.ratio == 1.0
        assert rep.fit_rms < 1e-12

    def test_spike_peaks_survive(self, key):
        rng = np.random.default_rng(25)
        n = 5000
        t = np.arange(n, dtype=float)
        v = 0.3 * np.sin(2 * np.pi * t / 4000) + 0.01 * rng.normal(size=n)
        for peak in (1200, 3600):
            for i in range(peak - 20, peak + 21):
                v[i] += 5.0 * (1 - abs(i - peak) / 20)
        track = make_track("t", key, {"carrier_power": make_series("carrier_power", v, t)})
        ct = compress_track(track, 20)
        recon = np.interp(
            t, ct.channels["carrier_power"].hinge_times, ct.channels["carrier_power"].hinge_values
        )
        for peak in (1200, 3600):
            assert abs(recon[peak] - v[peak]) < 0.5  # 10% of spike amplitude


class TestReconstruct:
    def test_linear_case(self):
        cc = fit_hinges(make_series("c", [0.0, 10.0], [0.0, 10.0]), [0.0, 10.0])
        assert np.allclose(reconstruct(cc, 3), [0.0, 5.0, 10.0])

    def test_exact_at_sample_times_for_pl_data(self):
        t = np.arange(101, dtype=float)
        v = np.where(t <= 60, 0.5 * t, 30.0 - (t - 60))
        s = make_series("c", v, t)
        cc = fit_hinges(s, [0.0, 60.0, 100.0])
        recon = np.interp(t, cc.hinge_times, cc.hinge_values)
        assert np.max(np.abs(recon - v)) < 1e-9

    def test_values_within_bracketing_hinge_envelope(self):
        rng = np.random.default_rng(26)
        v = rng.normal(size=300)
        s = make_series("c", v)
        cc = fit_hinges(s, choose_knots_greedy(s, 12))
        grid = np.linspace(cc.hinge_times[0], cc.hinge_times[-1], 777)
        recon = reconstruct(cc, 777)
        idx = np.clip(
            np.searchsorted(cc.hinge_times, grid, side="right") - 1, 0, cc.hinge_count - 2
        )
        lo = np.minimum(cc.hinge_values[idx], cc.hinge_values[idx + 1])
        hi = np.maximum(cc.hinge_values[idx], cc.hinge_values[idx + 1])
        assert np.all(recon >= lo - 1e-12) and np.all(recon <= hi + 1e-12)


class TestFidelity:
    def _correlated_pair(self, key, seed=30, n=3000):
        rng = np.random.default_rng(seed)
        t = np.arange(n, dtype=float)
        base = np.sin(2 * np.pi * t / 2500) + 0.4 * np.sin(2 * np.pi * t / 900)
        items = ("carrier_power",)
        a = make_track("a", key, {items[0]: base + 0.01 * rng.normal(size=n)})
        b = make_track(
            "b", key, {items[0]: base + 0.15 * np.sin(2 * np.pi * t / 1400) + 0.01 * rng.normal(size=n)}
        )
        return a, b, MonitorItemSet(items=items)

    def test_identity_survives_compression(self, key):
        a, _, items = self._correlated_pair(key)
        rep = fidelity_report(a, a, 10, items, MetricConfig())
        assert rep.raw.aggregate_ss == pytest.approx(1.0, abs=1e-9)
        assert rep.compressed.aggregate_ss == pytest.approx(1.0, abs=1e-9)

    def test_saturation_between_20_and_30_hinges(self, key):
        a, b, items = self._correlated_pair(key)
        cfg = MetricConfig()
        r20 = fidelity_report(a, b, 20, items, cfg).compressed
        r30 = fidelity_report(a, b, 30, items, cfg).compressed
        for attr in ("aggregate_ss", "aggregate_pc", "aggregate_ed", "aggregate_dtw"):
            v20, v30 = getattr(r20, attr), getattr(r30, attr)
            assert abs(v20 - v30) < 0.01 * max(abs(v20), abs(v30), 1e-6)

    def test_low_correlation_pairs_degrade_more(self, key):
        rng = np.random.default_rng(31)
        n = 3000
        t = np.arange(n, dtype=float)

        def smooth(seed):
            r = np.random.default_rng(seed)
            sig = np.zeros(n)
            for _ in range(5):
                sig += r.uniform(0.5, 1.0) * np.sin(
                    2 * np.pi * t / r.uniform(300, 2500) + r.uniform(0, 2 * np.pi)
                )
            return sig

        items = MonitorItemSet(items=("carrier_power",))
        base = smooth(1)
        hi_a = make_track("ha", key, {"carrier_power": base + 0.02 * rng.normal(size=n)})
        hi_b = make_track("hb", key, {"carrier_power": base + 0.02 * rng.normal(size=n)})
        lo_a = make_track("la", key, {"carrier_power": smooth(2) + 0.02 * rng.normal(size=n)})
        lo_b = make_track("lb", key, {"carrier_power": smooth(3) + 0.02 * rng.normal(size=n)})

        cfg = MetricConfig()
        hi = fidelity_report(hi_a, hi_b, 20, items, cfg)
        lo = fidelity_report(lo_a, lo_b, 20, items, cfg)
        hi_err = abs(hi.raw.aggregate_pc - hi.compressed.aggregate_pc)
        lo_err = abs(lo.raw.aggregate_pc - lo.compressed.aggregate_pc)
        assert lo_err > hi_err


def test_reconstruct_track_roundtrip(key):
    rng = np.random.default_rng(32)
    track = make_track(
        "t",
        key,
        {"carrier_power": rng.normal(size=500).cumsum(), "symbol_rate": rng.normal(size=500).cumsum()},
    )
    ct = compress_track(track, 30)
    recon = reconstruct_track(ct, 128)
    assert set(recon.channels) == set(track.channels)
    assert all(len(s) == 128 for s in recon.channels.values())
    assert recon.key == track.key and recon.track_id == track.track_id
