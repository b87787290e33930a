"""Small synthetic CDFG bundles for smoke tests and demos.

Node feature layout (9 columns):
    0      pragma slot value (0 on ordinary nodes)
    1..4   node type one-hot: instruction, variable, constant, pragma
    5..8   latency, LUT, DSP, FF estimates of the node

Edge features are a 3-way one-hot over control / data / call flow.
Labels are an analytic function of node estimates and pragma values.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .cdfg import (
    CdfgEdge,
    CdfgGraph,
    CdfgNode,
    Configuration,
    DatasetManifest,
    DesignSpace,
    FeatureBlock,
    Knob,
    QorVector,
    apply_configuration,
)

FEATURE_DIM = 9
EDGE_DIM = 3


def toy_space() -> DesignSpace:
    return DesignSpace((
        Knob("UNROLL_L0", (1, 2, 4, 8)),
        Knob("UNROLL_L1", (1, 2, 4)),
        Knob("PIPELINE", ("off", "cg", "fg")),
        Knob("PARTITION", (1, 2, 4, 8)),
    ))


def toy_manifest(split_seed: int = 7) -> DatasetManifest:
    return DatasetManifest(
        feature_dim=FEATURE_DIM,
        edge_feature_dim=EDGE_DIM,
        targets=("latency", "lut", "ff", "dsp", "bram"),
        normalization={"latency": (1000.0, 0.0)},
        split_seed=split_seed,
        onehot_blocks=(FeatureBlock("node_type", 1, 4, ("instruction", "variable", "constant", "pragma")),),
        numeric_columns=(0, 5, 6, 7, 8),
        pragma_feature_index=0,
    )


def toy_qor(graph: CdfgGraph, space: DesignSpace) -> QorVector:
    x = graph.node_matrix()
    pos = graph.node_index()
    knob_val = {k.name: x[pos[graph.pragma_slots[k.name]], 0] for k in space.knobs}
    u0, u1 = knob_val["UNROLL_L0"], knob_val["UNROLL_L1"]
    pipe = knob_val["PIPELINE"]  # domain index 0, 1, 2
    part = knob_val["PARTITION"]
    work = x[:, 5].sum()
    lut_base, dsp_base, ff_base = x[:, 6].sum(), x[:, 7].sum(), x[:, 8].sum()
    par = u0 * u1 * (1.0 + 0.5 * pipe)
    latency = 50.0 + 40.0 * work / min(par, 2.0 * part) + 5.0 * graph.num_nodes
    lut = min(1.0, 0.002 * lut_base * math.sqrt(par) + 0.01 * part)
    ff = min(1.0, 0.001 * ff_base * math.sqrt(par) + 0.005 * pipe)
    dsp = min(1.0, 0.004 * dsp_base * u0 * u1)
    bram = min(1.0, 0.02 * part + 0.01 * len(graph.edges) / 10.0)
    return QorVector(latency=latency, lut=lut, ff=ff, dsp=dsp, bram=bram)


def make_toy_graph(
    rng: np.random.Generator, graph_id: str, space: DesignSpace, min_nodes: int = 8, max_nodes: int = 16
) -> CdfgGraph:
    n_plain = int(rng.integers(min_nodes, max_nodes + 1))
    nodes = []
    for i in range(n_plain):
        ntype = int(rng.integers(0, 3))
        feat = [0.0] * FEATURE_DIM
        feat[1 + ntype] = 1.0
        if ntype == 0:
            feat[5] = float(rng.integers(1, 6))
            feat[6] = float(rng.integers(0, 20))
            feat[7] = float(rng.integers(0, 3))
            feat[8] = float(rng.integers(0, 40))
        nodes.append(CdfgNode(i, tuple(feat)))
    slots = {}
    for k in space.knobs:
        nid = len(nodes)
        feat = [0.0] * FEATURE_DIM
        feat[4] = 1.0
        nodes.append(CdfgNode(nid, tuple(feat), is_pragma_node=True))
        slots[k.name] = nid
    edges = []
    for i in range(1, n_plain):
        j = int(rng.integers(0, i))
        kind = int(rng.integers(0, 2))
        edges.append(CdfgEdge(j, i, tuple(1.0 if c == kind else 0.0 for c in range(EDGE_DIM))))
    for extra in range(n_plain // 3):
        a, b = rng.choice(n_plain, 2, replace=False)
        edges.append(CdfgEdge(int(a), int(b), (0.0, 1.0, 0.0)))
    for name, nid in slots.items():
        target = int(rng.integers(0, n_plain))
        edges.append(CdfgEdge(nid, target, (0.0, 0.0, 1.0)))
    return CdfgGraph(graph_id, tuple(nodes), tuple(edges), pragma_slots=slots, benchmark_id="toy")


def labelled(graph: CdfgGraph, space: DesignSpace, config: Configuration) -> CdfgGraph:
    g = apply_configuration(graph, space, config)
    return replace(g, label=toy_qor(g, space))


def make_toy_bundle(n_graphs: int = 20, seed: int = 0, n_kernels: int = 4) -> tuple[list[CdfgGraph], DatasetManifest]:
    """``n_graphs`` labelled graphs: a few random kernels under random configurations."""
    rng = np.random.default_rng(seed)
    space = toy_space()
    kernels = [make_toy_graph(rng, f"kernel{k}", space) for k in range(n_kernels)]
    graphs = []
    for i in range(n_graphs):
        base = kernels[i % n_kernels]
        g = labelled(base, space, space.random_config(rng))
        graphs.append(replace(g, graph_id=f"{base.graph_id}_cfg{i}", benchmark_id=base.graph_id))
    return graphs, toy_manifest()
