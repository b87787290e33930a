import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hlsdse import tape as T
from hlsdse.cdfg import CdfgEdge, CdfgGraph, CdfgNode
from hlsdse.surrogate.metrics import ZeroTargetError, mae, mape, rmse
from hlsdse.surrogate.model import (
    ActionState,
    DimensionError,
    EcognnConfig,
    EcognnModel,
    LayerKind,
    collate,
    edge_weight_construct,
    graph_arrays,
    gumbel_max_sample,
    gumbel_softmax,
    model_forward,
)

import oracles
from conftest import random_graph


def small_model(**kw):
    cfg = dict(hidden_dim=8, env_layers=2, action_layers=2, seed=3)
    cfg.update(kw)
    return EcognnModel(EcognnConfig(**cfg), node_dim=6, edge_dim=3)


def batch_of(*graphs, edge_dim=3):
    return collate([graph_arrays(g, edge_dim) for g in graphs])


def one_hot(states, n=None):
    return np.eye(5)[[int(s) for s in states]]


def test_state_order():
    assert [s.name for s in ActionState] == ["S", "L_IN", "L_OUT", "B", "I"]
    assert LayerKind.parse("beta") is LayerKind.SUM and LayerKind.parse("α") is LayerKind.MEAN


class TestGumbel:
    def test_degenerate(self, rng):
        p = np.eye(5)[2]
        assert all(gumbel_max_sample(p, rng).argmax() == 2 for _ in range(200))

    def test_uniform_frequencies(self):
        rng = np.random.default_rng(0)
        counts = np.zeros(5)
        for _ in range(100_000):
            counts += gumbel_max_sample(np.full(5, 0.2), rng)
        assert np.all(np.abs(counts / 1e5 - 0.2) < 0.01)

    def test_zero_entry_never_drawn(self, rng):
        p = np.array([0.5, 0.0, 0.5, 0.0, 0.0])
        draws = np.array([gumbel_max_sample(p, rng) for _ in range(2000)])
        assert draws[:, [1, 3, 4]].sum() == 0

    def test_invalid(self, rng):
        with pytest.raises(ValueError):
            gumbel_max_sample(np.zeros(5), rng)
        with pytest.raises(ValueError):
            gumbel_max_sample(np.array([np.nan, 1, 0, 0, 0]), rng)
        with pytest.raises(ValueError):
            gumbel_softmax(np.full(5, 0.2), 0.0, rng)

    def test_large_tau_uniform(self, rng):
        out = gumbel_softmax(np.full(5, 0.2), 1e6, rng)
        assert np.allclose(out, 0.2, atol=1e-3)

    @pytest.mark.parametrize("tau", [0.01, 0.001])
    def test_small_tau_near_one_hot(self, tau):
        # max entry > 0.99 whenever the top-two Gumbel gap exceeds tau * ln(4 * 99)
        rng = np.random.default_rng(5)
        n_draws = 4000
        hits = sum(gumbel_softmax(np.full(5, 0.2), tau, rng).max() > 0.99 for _ in range(n_draws))
        assert hits / n_draws >= oracles.gumbel_near_one_hot_bound(5, tau) - 0.01

    @given(st.lists(st.floats(0.01, 1.0), min_size=5, max_size=5), st.floats(0.1, 5.0), st.integers(0, 2**31))
    def test_valid_distribution(self, raw, tau, seed):
        p = np.array(raw) / np.sum(raw)
        out = gumbel_softmax(p, tau, np.random.default_rng(seed))
        assert abs(out.sum() - 1) < 1e-9 and np.all(out >= 0)


class TestEdgeWeights:
    src, dst = np.array([0, 1]), np.array([1, 2])

    def test_all_standard(self):
        w_in, w_out = edge_weight_construct(one_hot([0, 0, 0]), self.src, self.dst)
        assert w_in.data.tolist() == [1, 1] and w_out.data.tolist() == [1, 1]

    def test_isolated_receiver(self):
        w_in, w_out = edge_weight_construct(one_hot([ActionState.S, ActionState.I, ActionState.S]), self.src, self.dst)
        # node 1 neither receives on 0->1 nor broadcasts back, and never broadcasts on 1->2
        assert w_in.data.tolist() == [0, 0] and w_out.data.tolist() == [0, 0]

    def test_listen_in_sender_is_silent(self):
        w_in, w_out = edge_weight_construct(one_hot([ActionState.L_IN, 0, 0]), np.array([0]), np.array([1]))
        assert w_in.data.tolist() == [0]
        # the reverse direction 1 -> 0 needs node 0 to listen on outgoing edges, which L_IN does not
        assert w_out.data.tolist() == [0]

    def test_directional_split(self):
        w_in, w_out = edge_weight_construct(one_hot([ActionState.L_OUT, ActionState.B]), np.array([0]), np.array([1]))
        assert w_in.data.tolist() == [0] and w_out.data.tolist() == [1]

    @given(st.integers(0, 4), st.integers(0, 4))
    def test_hard_samples_binary(self, a, b):
        w_in, w_out = edge_weight_construct(one_hot([a, b]), np.array([0]), np.array([1]))
        assert set(w_in.data.tolist() + w_out.data.tolist()) <= {0.0, 1.0}


class TestLayers:
    def test_no_weights_is_self_transform(self, rng):
        h = T.Tensor(rng.normal(size=(3, 4)))
        Wr, Wn, b = (T.Tensor(rng.normal(size=s)) for s in ((4, 4), (4, 4), (4,)))
        senders, receivers = np.array([0, 1]), np.array([1, 2])
        msgs = T.gather_rows(h, senders)
        zero = T.Tensor(np.zeros((2, 1)))
        for kind in (LayerKind.SUM, LayerKind.MEAN):
            out = EcognnModel.aggregate(kind, h, senders, receivers, msgs, zero, 3, Wr, Wn, b)
            np.testing.assert_allclose(out.data, h.data @ Wr.data + b.data)

    def test_half_weight_halves_message(self, rng):
        h = T.Tensor(rng.normal(size=(2, 3)))
        Wr, Wn, b = T.Tensor(np.zeros((3, 3))), T.Tensor(np.eye(3)), T.Tensor(np.zeros(3))
        msgs = T.gather_rows(h, np.array([0]))
        args = (LayerKind.SUM, h, np.array([0]), np.array([1]), msgs)
        full = EcognnModel.aggregate(*args, T.Tensor(np.ones((1, 1))), 2, Wr, Wn, b)
        half = EcognnModel.aggregate(*args, T.Tensor(np.full((1, 1), 0.5)), 2, Wr, Wn, b)
        np.testing.assert_allclose(half.data[1], 0.5 * full.data[1])

    def test_isolated_node_action_depends_on_itself(self, rng):
        m = small_model()
        g1 = CdfgGraph("a", (CdfgNode(0, tuple(rng.normal(size=6))),), ())
        b = batch_of(g1)
        h = m.layer_norm(T.Tensor(b.x) @ m.params["input.W"] + m.params["input.b"], "norm_in", m.params)
        p = np.exp(m.action_forward(b, 0, h).data)
        assert p.shape == (1, 5) and abs(p.sum() - 1) < 1e-9

    def test_action_rows_sum_to_one(self, rng):
        m = small_model()
        b = batch_of(random_graph(rng, 15))
        h = T.Tensor(rng.normal(size=(15, 8)))
        p = np.exp(m.action_forward(b, 1, h).data)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)

    def test_action_equivariant_on_twins(self):
        # nodes 1 and 2 are twins: same features and each has the single in-neighbour 0
        feat = (0.3, -0.2, 0.1, 0.0, 0.5, 1.0)
        nodes = (CdfgNode(0, (1.0,) * 6), CdfgNode(1, feat), CdfgNode(2, feat))
        edges = (CdfgEdge(0, 1, (1.0, 0.0, 0.0)), CdfgEdge(0, 2, (1.0, 0.0, 0.0)))
        m = small_model()
        b = batch_of(CdfgGraph("t", nodes, edges))
        h = m.layer_norm(T.Tensor(b.x) @ m.params["input.W"] + m.params["input.b"], "norm_in", m.params)
        p = m.action_forward(b, 0, h).data
        np.testing.assert_allclose(p[1], p[2], atol=1e-12)

    def test_action_width_checked(self, rng):
        m = small_model()
        with pytest.raises(DimensionError):
            m.action_forward(batch_of(random_graph(rng, 4)), 0, T.Tensor(np.zeros((4, 3))))


class TestTemperatureAndPooling:
    def test_zero_params_give_softplus_zero(self, rng):
        m = small_model()
        for k in ("temp.W1", "temp.b1", "temp.W2", "temp.b2"):
            m.params[k].data[...] = 0.0
        b = batch_of(random_graph(rng, 5))
        tau = m.learnable_temperature(b, T.Tensor(np.zeros((5, 8))))
        assert tau.data[0, 0] == pytest.approx(oracles.TAU_AT_ZERO)

    @given(st.floats(-1e3, 1e3))
    @settings(max_examples=30)
    def test_tau_clamped(self, scale):
        m = small_model()
        b = batch_of(random_graph(np.random.default_rng(0), 5))
        tau = m.learnable_temperature(b, T.Tensor(np.full((5, 8), scale))).data
        assert np.all((tau >= 0.1) & (tau <= 5.0))

    def test_temperature_gradient_nonzero(self):
        from hlsdse.toy import make_toy_bundle
        from hlsdse.surrogate.training import rmse_loss

        graphs, manifest = make_toy_bundle(8, seed=2)
        m = EcognnModel(EcognnConfig(hidden_dim=8, seed=1, targets=manifest.targets), 9, 3, manifest.normalization)
        b = collate([graph_arrays(g, 3, manifest.targets, manifest) for g in graphs])
        rmse_loss(m.forward(b, mode="sample", rng=np.random.default_rng(0)), b.y).backward()
        assert np.abs(m.params["temp.W2"].grad).max() > 0

    def test_single_node_pool_is_value(self, rng):
        m = small_model()
        b = batch_of(CdfgGraph("a", (CdfgNode(0, (0.0,) * 6),), ()))
        h = T.Tensor(rng.normal(size=(1, 8)))
        pooled, alpha = m.attention_pool(b, h, return_weights=True)
        np.testing.assert_allclose(pooled.data[0], h.data[0] @ m.params["value.W"].data + m.params["value.b"].data)
        assert alpha.data.tolist() == [1.0]

    def test_identical_nodes_equal_weights(self, rng):
        m = small_model()
        g = CdfgGraph("a", tuple(CdfgNode(i, (0.0,) * 6) for i in range(4)), ())
        h = T.Tensor(np.tile(rng.normal(size=8), (4, 1)))
        pooled, alpha = m.attention_pool(batch_of(g), h, return_weights=True)
        np.testing.assert_allclose(alpha.data, 0.25)
        np.testing.assert_allclose(pooled.data[0], h.data[0] @ m.params["value.W"].data + m.params["value.b"].data)

    def test_weights_sum_to_one_per_graph(self, rng):
        m = small_model()
        b = batch_of(random_graph(rng, 7), random_graph(rng, 3))
        _, alpha = m.attention_pool(b, T.Tensor(rng.normal(size=(10, 8))), return_weights=True)
        assert alpha.data[:7].sum() == pytest.approx(1.0, abs=1e-9)
        assert alpha.data[7:].sum() == pytest.approx(1.0, abs=1e-9)

    def test_convex_hull_with_identity_value(self, rng):
        m = small_model()
        m.params["value.W"].data[...] = np.eye(8)
        m.params["value.b"].data[...] = 0.0
        h = rng.normal(size=(6, 8))
        pooled = m.attention_pool(batch_of(random_graph(rng, 6)), T.Tensor(h)).data[0]
        assert np.all(pooled <= h.max(axis=0) + 1e-12) and np.all(pooled >= h.min(axis=0) - 1e-12)


class TestForward:
    def test_deterministic_per_seed(self, rng):
        m = small_model()
        g = random_graph(rng, 10)
        for mode in ("soft", "sample", "hard"):
            assert model_forward(m, g, mode, seed=4) == model_forward(m, g, mode, seed=4)

    def test_permutation_invariance(self, rng):
        m = small_model(env_kind="gcn", action_kind="sum")
        g = random_graph(rng, 14)
        base = m.predict([g])[0].to_dict()
        perm = m.predict([g.permuted(rng.permutation(14))])[0].to_dict()
        for k in base:
            assert abs(base[k] - perm[k]) < 1e-9

    @pytest.mark.parametrize("kind", ["sum", "mean", "gcn"])
    def test_forced_standard_state_matches_plain_mpnn(self, rng, kind):
        m = small_model(env_kind=kind, env_layers=3)
        g = random_graph(rng, 11)
        b = batch_of(g)
        trace = {}
        m.forward(b, force_state=ActionState.S, trace=trace)
        ref = oracles.plain_mpnn_layers(b.x, b.src, b.dst, b.edge_attr, m.param_arrays(), kind, 3)
        for got, want in zip(trace["h"], ref):
            np.testing.assert_allclose(got, want, atol=1e-10)

    def test_dimension_mismatch(self, rng):
        m = small_model()
        with pytest.raises(DimensionError):
            m.predict([random_graph(rng, 5, feature_dim=7)])

    def test_batch_equals_individual(self, rng):
        m = small_model()
        gs = [random_graph(rng, n, graph_id=f"g{n}") for n in (4, 9, 6)]
        together = m.predict(gs)
        alone = [m.predict([g])[0] for g in gs]
        for a, b in zip(together, alone):
            for k in a.to_dict():
                assert a.get(k) == pytest.approx(b.get(k), abs=1e-12)


class TestMetrics:
    def test_identity(self):
        assert rmse([1, 2], [1, 2]) == mae([1, 2], [1, 2]) == mape([1, 2], [1, 2]) == 0

    def test_hand_values(self):
        got = {"rmse": rmse([110], [100]), "mae": mae([110], [100]), "mape": mape([110], [100])}
        assert got == pytest.approx(oracles.METRICS_110_100)

    def test_zero_target(self):
        with pytest.raises(ZeroTargetError, match="MAE"):
            mape([1.0, 2.0], [0.0, 1.0])
        assert mae([1.0, 2.0], [0.0, 1.0]) == 1.0
