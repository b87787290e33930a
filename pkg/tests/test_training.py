import dataclasses

import numpy as np
import pytest

from hlsdse.cdfg import QorVector
from hlsdse.surrogate.model import EcognnConfig, EcognnModel
from hlsdse.surrogate.training import Adam, TrainConfig, grad_check, rmse_loss, summed_rmse, train
from hlsdse import tape as T
from hlsdse.toy import make_toy_bundle

from conftest import random_graph


def labelled_graph(seed=0, n_nodes=20, latency=1.0):
    g = random_graph(np.random.default_rng(seed), n_nodes)
    return dataclasses.replace(g, label=QorVector(latency=latency, lut=0.2, ff=0.3, dsp=0.1, bram=0.0))


def model(hidden=16, seed=1, **kw):
    return EcognnModel(EcognnConfig(hidden_dim=hidden, seed=seed, **kw), node_dim=6, edge_dim=3)


class TestGradCheck:
    def test_linear_head_exact(self):
        err = grad_check(model(), labelled_graph(), 1e-4, blocks=["head.W2", "head.b2"], entries_per_block=10_000)
        assert err < 1e-8

    @pytest.mark.parametrize("kinds", [("sum", "mean"), ("gcn", "gcn"), ("mean", "sum")])
    def test_full_model(self, kinds):
        m = model(env_kind=kinds[0], action_kind=kinds[1])
        assert grad_check(m, labelled_graph(2), 1e-4, entries_per_block=3) < 1e-3

    def test_output_objective_without_labels(self):
        g = random_graph(np.random.default_rng(4), 10)
        assert grad_check(model(), g, 1e-4, objective="output", entries_per_block=2) < 1e-3

    def test_second_order_convergence(self):
        m, g = model(), labelled_graph(3)
        _, coarse = grad_check(m, g, 1e-2, blocks=["input.W"], entries_per_block=4, return_details=True)
        _, fine = grad_check(m, g, 5e-3, blocks=["input.W"], entries_per_block=4, return_details=True)
        for a, b in zip(coarse, fine):
            e_coarse = abs(a["analytic"] - a["numeric"])
            e_fine = abs(b["analytic"] - b["numeric"])
            if e_coarse > 1e-9:
                assert 3.0 < e_coarse / e_fine < 5.0

    def test_size_limit(self):
        with pytest.raises(ValueError, match="50 nodes"):
            grad_check(model(), labelled_graph(n_nodes=51))


def test_rmse_loss_sum_vs_joint():
    pred = T.Tensor(np.array([[1.0, 2.0], [3.0, 6.0]]))
    y = np.array([[1.0, 0.0], [3.0, 0.0]])
    assert float(rmse_loss(pred, y, "sum").data) == pytest.approx(np.sqrt(20.0))
    assert float(rmse_loss(pred, y, "joint").data) == pytest.approx(np.sqrt(10.0))


def test_adam_first_step_is_lr_times_sign():
    p = T.Tensor(np.array([1.0, -2.0]), requires_grad=True)
    p.grad = np.array([0.5, -3.0])
    Adam({"p": p}, lr=0.1).step()
    np.testing.assert_allclose(p.data, [0.9, -1.9], atol=1e-6)


class TestTrain:
    def setup_method(self):
        self.graphs, self.manifest = make_toy_bundle(8, seed=0)

    def _model(self, seed=0):
        m = self.manifest
        return EcognnModel(EcognnConfig(hidden_dim=8, env_layers=2, seed=seed), m.feature_dim, m.edge_feature_dim)

    def test_zero_lr_keeps_parameters(self):
        m = self._model()
        before = m.param_arrays()
        train(m, self.graphs, [], TrainConfig(epochs=2, lr=0.0, batch_size=3), self.manifest)
        for k, v in m.param_arrays().items():
            np.testing.assert_array_equal(v, before[k])

    def test_history_rows_per_epoch(self):
        r = train(self._model(), self.graphs[:6], self.graphs[6:], TrainConfig(epochs=3), self.manifest)
        assert sorted(summed_rmse(r.history, "train")) == [1, 2, 3]
        assert sorted(summed_rmse(r.history, "val")) == [1, 2, 3]
        assert 1 <= r.best_epoch <= 3 and not r.diverged

    def test_deterministic(self):
        cfg = TrainConfig(epochs=3, batch_size=4, seed=9)
        a = train(self._model(), self.graphs, [], cfg, self.manifest)
        b = train(self._model(), self.graphs, [], cfg, self.manifest)
        assert a.history == b.history
        for k, v in a.model.param_arrays().items():
            np.testing.assert_array_equal(v, b.model.param_arrays()[k])

    def test_loss_decreases(self):
        r = train(self._model(), self.graphs, [], TrainConfig(epochs=30, lr=3e-3), self.manifest)
        s = summed_rmse(r.history, "train")
        assert min(s.values()) < 0.7 * s[1]

    def test_divergence_restores_finite_params(self, caplog):
        m = model(hidden=8)
        before = m.param_arrays()
        with np.errstate(over="ignore", invalid="ignore"):
            r = train(m, [labelled_graph(latency=1e300, n_nodes=8)], [], TrainConfig(epochs=3))
        assert r.diverged
        assert "non-finite" in caplog.text
        for k, v in m.param_arrays().items():
            np.testing.assert_array_equal(v, before[k])

    def test_unlabelled_rejected(self):
        g = random_graph(np.random.default_rng(0), 5)
        with pytest.raises(ValueError, match="no label"):
            train(model(hidden=4), [g], [], TrainConfig(epochs=1))

    def test_bad_config(self):
        with pytest.raises(ValueError):
            TrainConfig(lr=-1)
        with pytest.raises(ValueError):
            TrainConfig(loss="huber")
