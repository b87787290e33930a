"""ECoGNN: cooperative message passing with per-node sampled communication states.

Each environment layer first runs an action network that gives every node a
distribution over five states (standard, listen-in, listen-out, broadcast,
isolate). A Gumbel-softmax relaxation of that distribution gates the edges
the environment network aggregates over. Node embeddings are then pooled
with global attention and mapped to QoR targets by an MLP head.

Batches are disjoint unions of graphs; ``node_graph`` maps nodes to graphs.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .. import tape as T
from ..cdfg import CdfgGraph, DatasetManifest, QorVector

NUM_STATES = 5
LN_EPS = 1e-5


class ActionState(enum.IntEnum):
    S = 0
    L_IN = 1
    L_OUT = 2
    B = 3
    I = 4  # noqa: E741


# columns of the state vector that broadcast / listen along each direction
BROADCAST = np.array([[1.0], [0.0], [0.0], [1.0], [0.0]])
LISTEN_IN = np.array([[1.0], [1.0], [0.0], [0.0], [0.0]])
LISTEN_OUT = np.array([[1.0], [0.0], [1.0], [0.0], [0.0]])


class LayerKind(str, enum.Enum):
    MEAN = "mean"
    SUM = "sum"
    GCN = "gcn"

    @classmethod
    def parse(cls, value: "str | LayerKind") -> "LayerKind":
        aliases = {"alpha": "mean", "beta": "sum", "gamma": "gcn", "α": "mean", "β": "sum", "γ": "gcn"}
        if isinstance(value, LayerKind):
            return value
        return cls(aliases.get(str(value).lower(), str(value).lower()))


GREEK = {LayerKind.MEAN: "alpha", LayerKind.SUM: "beta", LayerKind.GCN: "gamma"}


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class EcognnConfig:
    env_layers: int = 3
    action_layers: int = 2
    hidden_dim: int = 128
    env_kind: LayerKind = LayerKind.SUM
    action_kind: LayerKind = LayerKind.MEAN
    tau_min: float = 0.1
    tau_max: float = 5.0
    targets: tuple[str, ...] = ("latency", "lut", "ff", "dsp", "bram")
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "env_kind", LayerKind.parse(self.env_kind))
        object.__setattr__(self, "action_kind", LayerKind.parse(self.action_kind))
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.env_layers < 1 or self.action_layers < 1:
            raise ValueError("layer counts must be >= 1")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if not 0 < self.tau_min <= self.tau_max:
            raise ValueError("need 0 < tau_min <= tau_max")
        if not self.targets:
            raise ValueError("at least one target is required")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["env_kind"] = self.env_kind.value
        d["action_kind"] = self.action_kind.value
        d["targets"] = list(self.targets)
        return d


@dataclass
class GraphBatch:
    x: np.ndarray  # (N, F)
    src: np.ndarray  # (M,)
    dst: np.ndarray  # (M,)
    edge_attr: np.ndarray  # (M, Fe)
    node_graph: np.ndarray  # (N,)
    num_graphs: int
    y: np.ndarray | None = None  # (G, T) normalized targets
    graph_ids: list[str] = field(default_factory=list)

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]


@dataclass
class GraphArrays:
    x: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    edge_attr: np.ndarray
    y: np.ndarray | None
    graph_id: str


def graph_arrays(
    graph: CdfgGraph,
    edge_dim: int,
    targets: Sequence[str] = (),
    manifest: DatasetManifest | None = None,
) -> GraphArrays:
    if graph.num_nodes == 0:
        raise DimensionError(f"graph {graph.graph_id} has no nodes")
    src, dst, ea = graph.edge_arrays(edge_dim)
    y = None
    if graph.label is not None and targets:
        vals = [graph.label.get(t) for t in targets]
        if manifest is not None:
            vals = [manifest.normalize_target(t, v) for t, v in zip(targets, vals)]
        y = np.array(vals, dtype=float)
    return GraphArrays(graph.node_matrix(), src, dst, ea, y, graph.graph_id)


def collate(items: Sequence[GraphArrays]) -> GraphBatch:
    xs, srcs, dsts, eas, ng, ys = [], [], [], [], [], []
    offset = 0
    for gi, it in enumerate(items):
        xs.append(it.x)
        srcs.append(it.src + offset)
        dsts.append(it.dst + offset)
        eas.append(it.edge_attr)
        ng.append(np.full(it.x.shape[0], gi, dtype=np.int64))
        ys.append(it.y)
        offset += it.x.shape[0]
    y = np.stack(ys) if all(v is not None for v in ys) else None
    return GraphBatch(
        x=np.concatenate(xs),
        src=np.concatenate(srcs).astype(np.int64),
        dst=np.concatenate(dsts).astype(np.int64),
        edge_attr=np.concatenate(eas),
        node_graph=np.concatenate(ng),
        num_graphs=len(items),
        y=y,
        graph_ids=[it.graph_id for it in items],
    )


def _uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class EcognnModel:
    """Parameter container plus the forward computation.

    ``params`` maps block names to leaf tensors; the insertion order is the
    canonical order used by checkpoints and gradient checks.
    """

    def __init__(
        self,
        config: EcognnConfig,
        node_dim: int,
        edge_dim: int = 0,
        normalization: dict[str, tuple[float, float]] | None = None,
        init: bool = True,
    ):
        self.config = config
        self.node_dim = node_dim
        self.edge_dim = edge_dim
        self.normalization = dict(normalization or {})
        self.params: dict[str, T.Tensor] = {}
        if init:
            self._init_params(np.random.default_rng(config.seed))

    # -- parameters ---------------------------------------------------------

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        c, H = self.config, self.config.hidden_dim
        shapes: dict[str, tuple[int, ...]] = {
            "input.W": (self.node_dim, H),
            "input.b": (H,),
            "norm_in.gamma": (H,),
            "norm_in.beta": (H,),
        }
        if self.edge_dim:
            shapes["edge_env.W"] = (self.edge_dim, H)
            shapes["edge_act.W"] = (self.edge_dim, H)
        for l in range(c.env_layers):
            for j in range(c.action_layers):
                out = NUM_STATES if j == c.action_layers - 1 else H
                if c.action_kind != LayerKind.GCN:
                    shapes[f"action{l}.{j}.root"] = (H, out)
                shapes[f"action{l}.{j}.nbr"] = (H, out)
                shapes[f"action{l}.{j}.b"] = (out,)
            if c.env_kind != LayerKind.GCN:
                shapes[f"env{l}.root"] = (H, H)
            shapes[f"env{l}.nbr"] = (H, H)
            shapes[f"env{l}.b"] = (H,)
        shapes.update({
            "norm_out.gamma": (H,),
            "norm_out.beta": (H,),
            "temp.W1": (H, H),
            "temp.b1": (H,),
            "temp.W2": (H, 1),
            "temp.b2": (1,),
            "attn.W1": (H, H),
            "attn.b1": (H,),
            "attn.W2": (H, 1),
            "attn.b2": (1,),
            "value.W": (H, H),
            "value.b": (H,),
            "head.W1": (H, H),
            "head.b1": (H,),
            "head.W2": (H, len(c.targets)),
            "head.b2": (len(c.targets),),
        })
        return shapes

    def _init_params(self, rng: np.random.Generator) -> None:
        for name, shape in self.param_shapes().items():
            if name.endswith(".gamma"):
                data = np.ones(shape)
            elif len(shape) == 1:
                data = np.zeros(shape)
            else:
                data = _uniform(rng, shape[0], shape)
            self.params[name] = T.Tensor(data, requires_grad=True, name=name)

    def set_params(self, arrays: dict[str, np.ndarray]) -> None:
        shapes = self.param_shapes()
        if set(arrays) != set(shapes):
            raise DimensionError(f"parameter blocks differ: {sorted(set(arrays) ^ set(shapes))}")
        self.params = {}
        for name, shape in shapes.items():
            arr = np.array(arrays[name], dtype=float).reshape(shape)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"parameter block {name} has non-finite entries")
            self.params[name] = T.Tensor(arr, requires_grad=True, name=name)

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def num_parameters(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    # -- building blocks ----------------------------------------------------

    def _p(self, name: str, params) -> T.Tensor:
        return params[name]

    def layer_norm(self, h: T.Tensor, prefix: str, params) -> T.Tensor:
        mu = T.mean(h, axis=1, keepdims=True)
        centered = h - mu
        var = T.mean(centered * centered, axis=1, keepdims=True)
        hn = centered / T.sqrt(var + LN_EPS)
        return hn * params[f"{prefix}.gamma"] + params[f"{prefix}.beta"]

    @staticmethod
    def aggregate(
        kind: LayerKind,
        h: T.Tensor,
        senders: np.ndarray,
        receivers: np.ndarray,
        messages: T.Tensor,
        weights: T.Tensor | None,
        num_nodes: int,
        W_root: T.Tensor | None,
        W_nbr: T.Tensor,
        b: T.Tensor,
    ) -> T.Tensor:
        """One message-passing update (pre-activation) for a weighted message list."""
        if weights is None:
            weights = T.Tensor(np.ones((len(receivers), 1)))
        if kind == LayerKind.SUM:
            agg = T.segment_sum(messages * weights, receivers, num_nodes)
            return h @ W_root + agg @ W_nbr + b
        if kind == LayerKind.MEAN:
            total = T.segment_sum(messages * weights, receivers, num_nodes)
            count = T.maximum(T.segment_sum(weights, receivers, num_nodes), 1.0)
            return h @ W_root + (total / count) @ W_nbr + b
        # symmetric normalisation with a self loop of weight one
        deg = T.segment_sum(weights, receivers, num_nodes) + 1.0
        inv_sqrt = 1.0 / T.sqrt(deg)
        coef = weights * T.gather_rows(inv_sqrt, senders) * T.gather_rows(inv_sqrt, receivers)
        agg = T.segment_sum(messages * coef, receivers, num_nodes) + h / deg
        return agg @ W_nbr + b

    def action_forward(
        self,
        batch: GraphBatch,
        layer_index: int,
        h: T.Tensor,
        params=None,
        edge_act: T.Tensor | None = None,
    ) -> T.Tensor:
        """Log-probabilities (N, 5) over node states from the action network of one layer."""
        params = params or self.params
        c = self.config
        if h.shape[1] != c.hidden_dim:
            raise DimensionError(f"action network expects width {c.hidden_dim}, got {h.shape[1]}")
        senders = np.concatenate([batch.src, batch.dst])
        receivers = np.concatenate([batch.dst, batch.src])
        if edge_act is None:
            edge_act = self._edge_projection(batch, "edge_act", params)
        z = h
        for j in range(c.action_layers):
            msgs = T.gather_rows(z, senders)
            if edge_act is not None:
                msgs = msgs + edge_act
            pre = self.aggregate(
                c.action_kind, z, senders, receivers, msgs, None, batch.num_nodes,
                params.get(f"action{layer_index}.{j}.root"),
                params[f"action{layer_index}.{j}.nbr"],
                params[f"action{layer_index}.{j}.b"],
            )
            z = pre if j == c.action_layers - 1 else T.silu(pre)
        return T.log_softmax(z, axis=1)

    def _edge_projection(self, batch: GraphBatch, name: str, params) -> T.Tensor | None:
        if not self.edge_dim or batch.edge_attr.shape[0] == 0:
            return None
        # both message directions of an edge share its projected feature
        e = T.Tensor(batch.edge_attr) @ params[f"{name}.W"]
        return T.concat_rows(e, e)

    def learnable_temperature(self, batch: GraphBatch, h: T.Tensor, params=None) -> T.Tensor:
        """Per-graph Gumbel-softmax temperature (G, 1) from mean-pooled node features."""
        params = params or self.params
        c = self.config
        counts = np.bincount(batch.node_graph, minlength=batch.num_graphs).astype(float)[:, None]
        pooled = T.segment_sum(h, batch.node_graph, batch.num_graphs) / counts
        z = T.silu(pooled @ params["temp.W1"] + params["temp.b1"]) @ params["temp.W2"] + params["temp.b2"]
        return T.clip(T.softplus(z) + c.tau_min, c.tau_min, c.tau_max)

    def attention_pool(self, batch: GraphBatch, h: T.Tensor, params=None, return_weights: bool = False):
        params = params or self.params
        if batch.num_nodes == 0:
            raise DimensionError("cannot pool an empty graph")
        score = T.silu(h @ params["attn.W1"] + params["attn.b1"]) @ params["attn.W2"] + params["attn.b2"]
        alpha = T.segment_softmax(T.reshape(score, (-1,)), batch.node_graph, batch.num_graphs)
        value = h @ params["value.W"] + params["value.b"]
        pooled = T.segment_sum(value * T.reshape(alpha, (-1, 1)), batch.node_graph, batch.num_graphs)
        return (pooled, alpha) if return_weights else pooled

    # -- full forward ---------------------------------------------------------

    def forward(
        self,
        batch: GraphBatch,
        mode: str = "soft",
        rng: np.random.Generator | None = None,
        force_state: ActionState | None = None,
        params: dict[str, T.Tensor] | None = None,
        trace: dict | None = None,
    ) -> T.Tensor:
        """Normalized predictions (G, targets).

        ``mode``: ``"soft"`` uses the noise-free relaxation softmax(log p / tau);
        ``"sample"`` adds seeded Gumbel noise (training); ``"hard"`` takes the
        Gumbel-max one-hot sample.
        """
        params = params or self.params
        c = self.config
        if batch.x.shape[1] != self.node_dim:
            raise DimensionError(f"node features have dim {batch.x.shape[1]}, model expects {self.node_dim}")
        if self.edge_dim and batch.edge_attr.shape[0] and batch.edge_attr.shape[1] != self.edge_dim:
            raise DimensionError(f"edge features have dim {batch.edge_attr.shape[1]}, model expects {self.edge_dim}")
        if mode not in ("soft", "sample", "hard"):
            raise ValueError(f"unknown mode {mode}")
        if mode != "soft" and rng is None and force_state is None:
            raise ValueError(f"mode {mode} needs an rng")

        n, m = batch.num_nodes, len(batch.src)
        senders = np.concatenate([batch.src, batch.dst])
        receivers = np.concatenate([batch.dst, batch.src])
        edge_env = self._edge_projection(batch, "edge_env", params)
        edge_act = self._edge_projection(batch, "edge_act", params)

        h = T.Tensor(batch.x) @ params["input.W"] + params["input.b"]
        h = self.layer_norm(h, "norm_in", params)
        if trace is not None:
            trace["h"] = [h.data.copy()]
            trace["states"] = []
            trace["tau"] = []

        for l in range(c.env_layers):
            if force_state is not None:
                s = T.Tensor(np.tile(np.eye(NUM_STATES)[int(force_state)], (n, 1)))
            else:
                logp = self.action_forward(batch, l, h, params, edge_act)
                tau = T.gather_rows(self.learnable_temperature(batch, h, params), batch.node_graph)
                if trace is not None:
                    trace["tau"].append(tau.data[:, 0].copy())
                if mode == "soft":
                    s = T.softmax(logp / tau, axis=1)
                else:
                    g = sample_gumbel(rng, (n, NUM_STATES))
                    if mode == "sample":
                        s = T.softmax((logp + g) / tau, axis=1)
                    else:
                        s = T.Tensor(np.eye(NUM_STATES)[np.argmax(logp.data + g, axis=1)])
            if trace is not None:
                trace["states"].append(s.data.copy())
            w_in, w_out = edge_weight_construct(s, batch.src, batch.dst)
            weights = T.reshape(T.concat_rows(w_in, w_out), (-1, 1)) if m else None
            msgs = T.gather_rows(h, senders)
            if edge_env is not None:
                msgs = msgs + edge_env
            pre = self.aggregate(
                c.env_kind, h, senders, receivers, msgs, weights, n,
                params.get(f"env{l}.root"), params[f"env{l}.nbr"], params[f"env{l}.b"],
            )
            h = T.silu(pre)
            if trace is not None:
                trace["h"].append(h.data.copy())

        h = self.layer_norm(h, "norm_out", params)
        pooled = self.attention_pool(batch, h, params)
        hidden = T.silu(pooled @ params["head.W1"] + params["head.b1"])
        return hidden @ params["head.W2"] + params["head.b2"]

    def predict(self, graphs: Sequence[CdfgGraph], mode: str = "soft", seed: int = 0) -> list[QorVector]:
        """Denormalized QoR predictions, one per graph."""
        items = [graph_arrays(g, self.edge_dim) for g in graphs]
        batch = collate(items)
        frozen = {k: T.Tensor(v.data) for k, v in self.params.items()}
        rng = np.random.default_rng(seed)
        out = self.forward(batch, mode=mode, rng=rng, params=frozen).data
        preds = []
        for row in out:
            values = {}
            for t, v in zip(self.config.targets, row):
                scale, offset = self.normalization.get(t, (1.0, 0.0))
                values[t] = float(v * scale + offset)
            preds.append(QorVector(**values))
        return preds


def sample_gumbel(rng: np.random.Generator, shape) -> np.ndarray:
    u = rng.uniform(np.finfo(float).tiny, 1.0, size=shape)
    return -np.log(-np.log(u))


def _check_probs(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0 or not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("probability vector must be finite and non-negative")
    if abs(p.sum() - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {p.sum()}, not 1")
    return p


def gumbel_max_sample(p, rng: np.random.Generator) -> np.ndarray:
    p = _check_probs(p)
    with np.errstate(divide="ignore"):
        score = np.log(p) + sample_gumbel(rng, p.shape)
    out = np.zeros_like(p)
    out[int(np.argmax(score))] = 1.0
    return out


def gumbel_softmax(p, tau: float, rng: np.random.Generator) -> np.ndarray:
    p = _check_probs(p)
    if not tau > 0:
        raise ValueError("temperature must be positive")
    with np.errstate(divide="ignore"):
        z = (np.log(p) + sample_gumbel(rng, p.shape)) / tau
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def edge_weight_construct(states, src: np.ndarray, dst: np.ndarray) -> tuple[T.Tensor, T.Tensor]:
    """Per-edge gates from node state vectors.

    For an edge u -> v, ``in`` gates the message u -> v (u broadcasts, v listens
    to incoming edges) and ``out`` gates the reverse message v -> u (v
    broadcasts, u listens to outgoing edges).
    """
    s = T.as_tensor(states)
    bcast = T.reshape(s @ BROADCAST, (-1,))
    lin = T.reshape(s @ LISTEN_IN, (-1,))
    lout = T.reshape(s @ LISTEN_OUT, (-1,))
    w_in = T.gather_rows(bcast, src) * T.gather_rows(lin, dst)
    w_out = T.gather_rows(bcast, dst) * T.gather_rows(lout, src)
    return w_in, w_out


def model_forward(model: EcognnModel, graph: CdfgGraph, mode: str = "soft", seed: int = 0) -> QorVector:
    return model.predict([graph], mode=mode, seed=seed)[0]
