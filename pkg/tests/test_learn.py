import numpy as np
import pytest

from trackdiff.analysis import SynthPairSpec, synth_pair
from trackdiff.errors import SingleClass, TooFewExamples
from trackdiff.learn import (
    auc,
    cross_validate,
    extract_features,
    ffnn_forward_backward,
    fit_knn,
    knn_classify,
    load_model,
    logistic_gradient,
    save_model,
    train_ffnn,
    train_logistic,
)
from trackdiff.metrics import MetricConfig, compare_tracks
from trackdiff.model import LabeledPair, MonitorItemSet

from conftest import make_track


def auc_pair_counting_oracle(scores, labels):
    """O(n^2) concordant-pair count, ties worth half."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestExtractFeatures:
    def test_identical_pair_pattern(self, key):
        rng = np.random.default_rng(80)
        v = rng.normal(size=300).cumsum()
        a = make_track("a", key, {"carrier_power": v, "symbol_rate": v * 2})
        b = make_track("b", key, {"carrier_power": v.copy(), "symbol_rate": v * 2})
        items = MonitorItemSet(items=("carrier_power", "symbol_rate"))
        fv = extract_features(LabeledPair(a, b, "similar"), items=items)
        assert fv.values == pytest.approx([0.0, 0.0, 1.0, 0.0, 0.0, 1.0], abs=1e-9)

    def test_default_items_give_21_features(self):
        a, b = synth_pair(SynthPairSpec(length=300, seed=1))
        fv = extract_features(LabeledPair(a, b, "similar"))
        assert len(fv.values) == 21

    def test_matches_manual_composition(self, key):
        a, b = synth_pair(SynthPairSpec(length=400, seed=2))
        items = MonitorItemSet()
        cfg = MetricConfig()
        fv = extract_features(LabeledPair(a, b, "similar"), items=items, cfg=cfg)
        bd = compare_tracks(a, b, items, cfg)
        manual = []
        for name in items:
            cm = bd.per_channel[name]
            manual.extend([cm.ed, cm.dtw, cm.pc])
        assert fv.values == pytest.approx(manual, abs=0)

    def test_missing_channel_zero_filled(self, key):
        rng = np.random.default_rng(81)
        a = make_track("a", key, {"carrier_power": rng.normal(size=50)})
        b = make_track("b", key, {"carrier_power": rng.normal(size=50),
                                  "symbol_rate": rng.normal(size=50)})
        items = MonitorItemSet(items=("carrier_power", "symbol_rate"))
        fv = extract_features(LabeledPair(a, b, "dissimilar"), items=items)
        assert fv.values[3:] == pytest.approx([0.0, 0.0, 0.0])
        assert fv.missing == ("symbol_rate",)


class TestLogistic:
    def test_separable_1d(self):
        X = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]])
        y = np.array([0, 0, 0, 1, 1, 1.0])
        model = train_logistic(X, y, epochs=300, lr=1.0)
        assert auc(model.predict(X), y) == 1.0

    def test_label_symmetric_data_learns_nothing(self):
        X = np.array([[1.0], [1.0], [2.0], [2.0], [3.0], [3.0]])
        y = np.array([0, 1, 0, 1, 0, 1.0])
        model = train_logistic(X, y, epochs=500, lr=0.5)
        assert np.max(np.abs(model.weights)) < 1e-6
        assert auc(model.predict(X), y) == pytest.approx(0.5)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(82)
        X = rng.normal(size=(40, 6))
        y = (rng.random(40) > 0.5).astype(float)
        Xs = (X - X.mean(axis=0)) / X.std(axis=0)
        w = rng.normal(size=6) * 0.3
        b = 0.1
        _, gw, gb = logistic_gradient(w, b, Xs, y)

        eps = 1e-6
        for i in range(6):
            wp, wm = w.copy(), w.copy()
            wp[i] += eps
            wm[i] -= eps
            num = (logistic_gradient(wp, b, Xs, y)[0] - logistic_gradient(wm, b, Xs, y)[0]) / (2 * eps)
            assert abs(num - gw[i]) / max(abs(num), 1e-8) < 1e-4
        num_b = (logistic_gradient(w, b + eps, Xs, y)[0] - logistic_gradient(w, b - eps, Xs, y)[0]) / (2 * eps)
        assert abs(num_b - gb) / max(abs(num_b), 1e-8) < 1e-4

    def test_loss_decreases_on_separable_data(self):
        X = np.array([[0.0], [1.0], [9.0], [10.0]])
        y = np.array([0, 0, 1, 1.0])
        model = train_logistic(X, y, epochs=12, lr=0.1)
        for a, b in zip(model.loss_history, model.loss_history[1:]):
            assert b <= a + 1e-9

    def test_single_class_rejected(self):
        with pytest.raises(SingleClass):
            train_logistic(np.ones((4, 2)), np.ones(4))


class TestFfnn:
    def test_xor(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0.0, 1.0, 1.0, 0.0])
        model = train_ffnn(X, y, hidden=4, epochs=4000, lr=1.0, seed=3)
        assert model.loss_history[-1] < 0.1

    def test_zero_epochs_is_chance_over_seeds(self):
        rng = np.random.default_rng(83)
        X = rng.normal(size=(60, 5))
        y = (rng.random(60) > 0.5).astype(float)
        aucs = []
        for seed in range(30):
            model = train_ffnn(X, y, hidden=8, epochs=0, lr=0.5, seed=seed)
            aucs.append(auc(model.predict(X), y))
        assert abs(np.mean(aucs) - 0.5) < 0.1

    def test_backprop_matches_finite_differences(self):
        rng = np.random.default_rng(84)
        Xs = rng.normal(size=(25, 4))
        y = (rng.random(25) > 0.5).astype(float)
        w1 = rng.uniform(-0.5, 0.5, size=(4, 3))
        b1 = rng.uniform(-0.5, 0.5, size=3)
        w2 = rng.uniform(-0.5, 0.5, size=3)
        b2 = 0.2
        _, (gw1, gb1, gw2, gb2) = ffnn_forward_backward((w1, b1, w2, b2), Xs, y)

        eps = 1e-6

        def loss_at(*params):
            return ffnn_forward_backward(params, Xs, y)[0]

        for idx in np.ndindex(w1.shape):
            p, m = w1.copy(), w1.copy()
            p[idx] += eps
            m[idx] -= eps
            num = (loss_at(p, b1, w2, b2) - loss_at(m, b1, w2, b2)) / (2 * eps)
            assert abs(num - gw1[idx]) / max(abs(num), 1e-8) < 1e-4
        for i in range(3):
            p, m = w2.copy(), w2.copy()
            p[i] += eps
            m[i] -= eps
            num = (loss_at(w1, b1, p, b2) - loss_at(w1, b1, m, b2)) / (2 * eps)
            assert abs(num - gw2[i]) / max(abs(num), 1e-8) < 1e-4
        num = (loss_at(w1, b1, w2, b2 + eps) - loss_at(w1, b1, w2, b2 - eps)) / (2 * eps)
        assert abs(num - gb2) / max(abs(num), 1e-8) < 1e-4

    def test_deterministic_under_seed(self):
        rng = np.random.default_rng(85)
        X = rng.normal(size=(30, 3))
        y = (X[:, 0] > 0).astype(float)
        m1 = train_ffnn(X, y, hidden=6, epochs=50, seed=7)
        m2 = train_ffnn(X, y, hidden=6, epochs=50, seed=7)
        assert np.array_equal(m1.w1, m2.w1) and np.array_equal(m1.w2, m2.w2)

    def test_loss_decreases_on_separable_data(self):
        X = np.array([[0.0], [1.0], [9.0], [10.0]])
        y = np.array([0, 0, 1, 1.0])
        model = train_ffnn(X, y, hidden=4, epochs=12, lr=0.05, seed=1)
        for a, b in zip(model.loss_history, model.loss_history[1:]):
            assert b <= a + 1e-9


class TestKnn:
    def test_query_on_training_point(self):
        X = np.array([[0.0], [5.0], [10.0]])
        y = np.array([0.0, 1.0, 0.0])
        assert knn_classify(X, y, [5.0], k_nn=1) == 1.0
        assert knn_classify(X, y, [0.0], k_nn=1) == 0.0

    def test_k_equals_train_size_gives_prior(self):
        X = np.arange(10.0).reshape(-1, 1)
        y = np.array([1.0] * 3 + [0.0] * 7)
        assert knn_classify(X, y, [4.0], k_nn=10) == pytest.approx(0.3)

    def test_matches_exhaustive_sort_oracle(self):
        rng = np.random.default_rng(86)
        X = rng.normal(size=(40, 3))
        y = (rng.random(40) > 0.5).astype(float)
        model = fit_knn(X, y, k_nn=7)
        for _ in range(20):
            q = rng.normal(size=3)
            qs = (q - model.mean) / model.std
            dists = [(float(np.sum((row - qs) ** 2)), i) for i, row in enumerate(model.X)]
            dists.sort()
            expect = np.mean([y[i] for _, i in dists[:7]])
            assert knn_classify(X, y, q, k_nn=7) == pytest.approx(expect, abs=1e-12)


class TestAuc:
    def test_perfect_separation(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_known_value(self):
        # concordant pairs: 3 of 4
        assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75

    def test_all_ties(self):
        assert auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_matches_pair_counting_oracle(self):
        rng = np.random.default_rng(87)
        for _ in range(300):
            n = int(rng.integers(4, 60))
            scores = np.round(rng.random(n), 2)  # force ties
            labels = (rng.random(n) > 0.5).astype(int)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            assert auc(scores, labels) == auc_pair_counting_oracle(scores, labels)

    def test_flip_complement(self):
        rng = np.random.default_rng(88)
        scores = rng.random(50)
        labels = (rng.random(50) > 0.4).astype(int)
        labels[:2] = [0, 1]
        assert auc(scores, labels) + auc(scores, 1 - labels) == pytest.approx(1.0, abs=1e-12)

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(89)
        scores = rng.random(50)
        labels = (rng.random(50) > 0.5).astype(int)
        labels[:2] = [0, 1]
        assert auc(np.exp(3 * scores), labels) == pytest.approx(auc(scores, labels), abs=1e-12)

    def test_single_class(self):
        with pytest.raises(SingleClass):
            auc([0.1, 0.2], [1, 1])


class TestCrossValidate:
    def test_separable_data_scores_one(self):
        X = np.concatenate([np.zeros((10, 2)), np.ones((10, 2))])
        y = np.array([0.0] * 10 + [1.0] * 10)
        rep = cross_validate(X, y, "logistic", folds=5, seed=0)
        assert rep.auc == 1.0
        assert rep.auc == pytest.approx(np.mean(rep.fold_aucs), abs=1e-9)

    def test_deterministic(self):
        rng = np.random.default_rng(90)
        X = rng.normal(size=(30, 4))
        y = (X[:, 0] + 0.3 * rng.normal(size=30) > 0).astype(float)
        r1 = cross_validate(X, y, "ffnn", folds=5, seed=3, epochs=50)
        r2 = cross_validate(X, y, "ffnn", folds=5, seed=3, epochs=50)
        assert r1.fold_aucs == r2.fold_aucs

    def test_stratification_balance(self):
        from trackdiff.learn import stratified_folds

        rng = np.random.default_rng(91)
        y = (rng.random(47) > 0.6).astype(float)
        assignment = stratified_folds(y, 5, seed=1)
        global_pos = y.sum()
        for f in range(5):
            fold_y = y[assignment == f]
            expect = global_pos / 5
            assert abs(fold_y.sum() - expect) <= 1.0

    def test_too_few_examples(self):
        X = np.random.default_rng(92).normal(size=(6, 2))
        y = np.array([1.0, 1, 1, 1, 1, 0])
        with pytest.raises(TooFewExamples):
            cross_validate(X, y, "logistic", folds=5)


class TestModelIO:
    def test_roundtrip_all_kinds(self, tmp_path):
        rng = np.random.default_rng(93)
        X = rng.normal(size=(24, 4))
        y = (X[:, 0] > 0).astype(float)
        q = rng.normal(size=(5, 4))
        for kind, train in (
            ("logistic", lambda: train_logistic(X, y, epochs=50)),
            ("ffnn", lambda: train_ffnn(X, y, hidden=4, epochs=50, seed=1)),
            ("knn", lambda: fit_knn(X, y, k_nn=3)),
        ):
            model = train()
            path = tmp_path / f"{kind}.json"
            save_model(model, path)
            back = load_model(path)
            assert back.kind == kind
            assert back.predict(q) == pytest.approx(model.predict(q), abs=1e-12)
