import numpy as np
import pytest

from hetsbm.aggregate import AggregationConfig, aggregate_once
from hetsbm.classify import (ConfusionMatrix, LinearNet, TrainConfig, bayes_aggregated,
                             bayes_raw, bayes_to_linear, confusion, pearson_gain_vs_confusion,
                             split_nodes, train_gcn, train_mlp)
from hetsbm.errors import AssumptionViolation, ConfigError
from hetsbm.hsbm import HsbmParams, pattern_family_a, sample_hsbm


class TestBayes:
    def test_raw_predicts_mean(self, params_a25):
        model = bayes_raw(params_a25)
        np.testing.assert_array_equal(model.predict(params_a25.means), np.arange(5))

    def test_tie_goes_to_lowest_index(self, params_a25):
        x = 0.5 * (params_a25.means[0] + params_a25.means[1])
        assert bayes_raw(params_a25).predict(x)[0] == 0
        lin = bayes_to_linear(bayes_raw(params_a25))
        assert lin.predict(x)[0] == 0

    def test_aggregated_predicts_mean(self, params_a25):
        model = bayes_aggregated(params_a25)
        np.testing.assert_array_equal(model.predict(params_a25.mhat @ params_a25.means), np.arange(5))

    def test_aggregated_needs_zero_noise(self, params_a25):
        with pytest.raises(AssumptionViolation):
            bayes_aggregated(params_a25.replace(delta=0.01))

    @pytest.mark.parametrize("kind", ["raw", "aggregated"])
    def test_linear_equivalence(self, kind):
        p = HsbmParams.synthetic(pattern_family_a(0.25)).replace(eta=[0.3, 0.25, 0.2, 0.15, 0.1])
        model = bayes_raw(p) if kind == "raw" else bayes_aggregated(p)
        lin = bayes_to_linear(model)
        x = np.random.default_rng(1).normal(0.2, 0.5, size=(10 ** 4, 5))
        np.testing.assert_array_equal(lin.predict(x), model.predict(x))
        scaled = LinearNet(lin.weight * 3.7, lin.bias * 3.7)
        np.testing.assert_array_equal(scaled.predict(x), lin.predict(x))

    def test_unequal_degree_conversion_refused(self):
        p = HsbmParams.synthetic(pattern_family_a(0.25), dbar=[20, 25, 25, 25, 30])
        with pytest.raises(AssumptionViolation):
            bayes_to_linear(bayes_aggregated(p))

    def test_small_sigma_is_nearest_mean(self, params_a25):
        p = params_a25.replace(sigma=1e-9)
        x = np.random.default_rng(2).normal(size=(500, 5))
        nearest = np.argmin(((x[:, None, :] - p.means[None]) ** 2).sum(axis=2), axis=1)
        np.testing.assert_array_equal(bayes_to_linear(bayes_raw(p)).predict(x), nearest)

    def test_aggregated_bayes_accuracy(self):
        accs = []
        for seed in range(5):
            p = HsbmParams.synthetic(pattern_family_a(0.25))
            g = sample_hsbm(p, seed)
            xa = aggregate_once(g, g.features)
            accs.append(np.mean(bayes_aggregated(p).predict(xa) == g.labels))
        assert abs(100 * np.mean(accs) - 89) <= 4


class TestConfusion:
    def test_perfect_and_constant(self):
        labels = np.array([0, 1, 2, 2, 1])

        class Fixed:
            def __init__(self, out):
                self.out = out

            def predict(self, x):
                return self.out[: len(x)]
        cm = confusion(Fixed(labels), np.zeros((5, 1)), labels)
        np.testing.assert_array_equal(cm.counts, np.diag([1, 2, 2]))
        cm = confusion(Fixed(np.zeros(5, dtype=int)), np.zeros((5, 1)), labels)
        assert np.count_nonzero(cm.counts.sum(axis=0)) == 1
        np.testing.assert_array_equal(cm.counts.sum(axis=1), [1, 2, 2])
        assert cm.total == 5

    def test_empty_node_set(self):
        with pytest.raises(ConfigError):
            confusion(None, np.zeros((2, 1)), np.array([0, 1]), node_set=[])


class TestPearson:
    def test_perfect_negative(self):
        g = np.array([[0, 1.0, 2.0], [1.0, 0, 3.0], [2.0, 3.0, 0]])
        mlp = ConfusionMatrix(np.zeros((3, 3), dtype=int))
        gcn = ConfusionMatrix(np.array([[0, -1, -2], [0, 0, -3], [0, 0, 0]]))
        res = pearson_gain_vs_confusion(g, gcn, mlp)
        assert res.r == pytest.approx(-1.0) and not res.degenerate

    def test_constant_gains_flagged(self):
        g = np.ones((3, 3))
        cm = ConfusionMatrix(np.array([[5, 1, 0], [2, 5, 1], [0, 3, 5]]))
        res = pearson_gain_vs_confusion(g, cm, ConfusionMatrix(np.eye(3, dtype=int)))
        assert res.degenerate and np.isnan(res.r)


class TestTraining:
    def test_separable_toy(self):
        rng = np.random.default_rng(0)
        x = np.vstack([rng.normal(-3, 0.5, (100, 2)), rng.normal(3, 0.5, (100, 2))])
        y = np.repeat([0, 1], 100)
        res = train_mlp(x, y, split_nodes(200, 0), TrainConfig(epochs=200), 0)
        assert res.accuracy == 1.0

    def test_deterministic(self, graph_a25):
        sp_ = split_nodes(graph_a25.n, 3)
        a = train_mlp(graph_a25.features, graph_a25.labels, sp_, TrainConfig(epochs=50), 3)
        b = train_mlp(graph_a25.features, graph_a25.labels, sp_, TrainConfig(epochs=50), 3)
        assert a.accuracy == b.accuracy and a.selected_hyperparams == b.selected_hyperparams
        np.testing.assert_array_equal(a.confusion.counts, b.confusion.counts)

    def test_split_partition(self):
        s = split_nodes(1000, 0)
        allidx = np.concatenate([s.train, s.val, s.test])
        assert len(s.train) == 600 and len(s.val) == 200 and len(s.test) == 200
        np.testing.assert_array_equal(np.sort(allidx), np.arange(1000))

    def test_gcn_l0_equals_mlp(self, graph_a25):
        sp_ = split_nodes(graph_a25.n, 1)
        cfg = TrainConfig(epochs=60)
        a = train_mlp(graph_a25.features, graph_a25.labels, sp_, cfg, 1)
        b = train_gcn(graph_a25, cfg, AggregationConfig(0), 1, split=sp_)
        assert a.accuracy == b.accuracy

    def test_grid_search_and_metrics_json(self, graph_a25):
        cfg = TrainConfig(hidden_grid=((), (8,)), lr_grid=(0.01, 0.05), epochs=30,
                          dropout_grid=(0.0, 0.2), weight_decay_grid=(0.0, 1e-4))
        res = train_mlp(graph_a25.features, graph_a25.labels, split_nodes(graph_a25.n, 0), cfg, 0)
        d = res.to_dict()
        assert set(d) >= {"accuracy", "confusion", "selected_hyperparams", "seed"}
        assert d["selected_hyperparams"]["hidden"] in ([], [8])
        assert np.array(d["confusion"]).sum() == 200

    def test_second_layer_mode(self, graph_a25):
        cfg = TrainConfig(hidden_grid=((16,),), epochs=150)
        res = train_gcn(graph_a25, cfg, AggregationConfig(1), 0, mode="second_layer")
        assert res.accuracy > 0.8
        with pytest.raises(ConfigError):
            train_gcn(graph_a25, TrainConfig(), AggregationConfig(1), 0, mode="second_layer")

    def test_gd_optimizer(self, graph_a25):
        cfg = TrainConfig(optimizer="gd", lr_grid=(0.5,), epochs=300)
        res = train_gcn(graph_a25, cfg, AggregationConfig(1), 0)
        assert res.accuracy > 0.8

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(lr_grid=())
        with pytest.raises(ConfigError):
            TrainConfig(epochs=0)
        with pytest.raises(ConfigError):
            TrainConfig(optimizer="sgd-momentum")
        grid = TrainConfig.full_grid()
        assert len(list(grid.points())) == 5 * 3 * 4 * 3

    def test_confusion_over_all_nodes(self, graph_a25):
        sp_ = split_nodes(graph_a25.n, 0)
        cfg = TrainConfig(epochs=30)
        test = train_mlp(graph_a25.features, graph_a25.labels, sp_, cfg, 0)
        full = train_mlp(graph_a25.features, graph_a25.labels, sp_, cfg, 0, confusion_nodes="all")
        assert test.confusion.total == 200 and full.confusion.total == graph_a25.n
        assert test.accuracy == full.accuracy
        with pytest.raises(ConfigError):
            train_mlp(graph_a25.features, graph_a25.labels, sp_, cfg, 0, confusion_nodes="val")
