"""Control-data-flow graphs, design spaces and the JSON-lines dataset bundle.

A bundle's first line is a manifest record ``{"manifest": {...}}``; every
following line is one graph record. Graphs are immutable once loaded;
:func:`apply_configuration` returns modified copies.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

QOR_FIELDS = ("latency", "lut", "ff", "dsp", "bram", "cp", "power")
REQUIRED_QOR_FIELDS = ("latency", "lut", "ff", "dsp", "bram")
DEFAULT_ENUMERATION_CAP = 10**6


class DatasetError(ValueError):
    """Base class for bundle and design-space problems."""


class ParseError(DatasetError):
    """A record could not be decoded."""


class SchemaError(DatasetError):
    """A record decoded but violates a structural invariant."""


class ConfigurationError(ValueError):
    """A configuration or design space is inconsistent."""


class SpaceTooLargeError(ConfigurationError):
    pass


@dataclass(frozen=True)
class QorVector:
    """QoR metrics; any subset may be present (post-implementation labels carry no latency)."""

    latency: float | None = None
    lut: float | None = None
    ff: float | None = None
    dsp: float | None = None
    bram: float | None = None
    cp: float | None = None
    power: float | None = None

    def __post_init__(self):
        for name in QOR_FIELDS:
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise SchemaError(f"QoR field {name} is not finite: {value}")

    def get(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise KeyError(f"QoR field {name} is not present")
        return value

    def to_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in QOR_FIELDS if getattr(self, k) is not None}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "QorVector":
        unknown = set(data) - set(QOR_FIELDS)
        if unknown:
            raise SchemaError(f"unknown QoR fields {sorted(unknown)}")
        if not any(v is not None for v in data.values()):
            raise SchemaError("QoR record has no fields")
        return cls(**{k: float(v) for k, v in data.items() if v is not None})


@dataclass(frozen=True)
class CdfgNode:
    id: int
    feature: tuple[float, ...]
    is_pragma_node: bool = False


@dataclass(frozen=True)
class CdfgEdge:
    src: int
    dst: int
    feature: tuple[float, ...] = ()


@dataclass(frozen=True)
class CdfgGraph:
    graph_id: str
    nodes: tuple[CdfgNode, ...]
    edges: tuple[CdfgEdge, ...]
    label: QorVector | None = None
    pragma_slots: dict[str, int] = field(default_factory=dict)
    benchmark_id: str = ""

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise SchemaError(f"graph {self.graph_id}: duplicate node ids")
        known = set(ids)
        for e in self.edges:
            for end in (e.src, e.dst):
                if end not in known:
                    raise SchemaError(f"graph {self.graph_id}: unknown node {end}")
        for name, nid in self.pragma_slots.items():
            if nid not in known:
                raise SchemaError(f"graph {self.graph_id}: slot {name} points at unknown node {nid}")

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def node_index(self) -> dict[int, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    def node_matrix(self) -> np.ndarray:
        if not self.nodes:
            return np.zeros((0, 0))
        return np.array([n.feature for n in self.nodes], dtype=float)

    def edge_arrays(self, edge_dim: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (src_index, dst_index, edge_features) in positional node indices."""
        pos = self.node_index()
        src = np.array([pos[e.src] for e in self.edges], dtype=np.int64)
        dst = np.array([pos[e.dst] for e in self.edges], dtype=np.int64)
        if edge_dim is None:
            edge_dim = len(self.edges[0].feature) if self.edges else 0
        feats = np.array([e.feature for e in self.edges], dtype=float).reshape(len(self.edges), edge_dim)
        return src, dst, feats

    def permuted(self, order: Sequence[int]) -> "CdfgGraph":
        """Reorder the node list; ids and edges are untouched, so the graph is isomorphic."""
        return replace(self, nodes=tuple(self.nodes[i] for i in order))


@dataclass(frozen=True)
class FeatureBlock:
    """A one-hot block of node-feature columns (start, size)."""

    name: str
    start: int
    size: int
    vocabulary: tuple[str, ...] = ()


@dataclass(frozen=True)
class DatasetManifest:
    feature_dim: int
    edge_feature_dim: int = 0
    targets: tuple[str, ...] = REQUIRED_QOR_FIELDS
    normalization: dict[str, tuple[float, float]] = field(default_factory=dict)
    split_seed: int = 0
    split_fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)
    onehot_blocks: tuple[FeatureBlock, ...] = ()
    numeric_columns: tuple[int, ...] = ()
    pragma_feature_index: int = 0
    allow_self_loops: bool = False

    def __post_init__(self):
        if self.feature_dim < 1:
            raise SchemaError("feature_dim must be positive")
        if not math.isclose(sum(self.split_fractions), 1.0, abs_tol=1e-9):
            raise SchemaError(f"split fractions {self.split_fractions} do not sum to 1")
        if any(f < 0 for f in self.split_fractions):
            raise SchemaError("split fractions must be non-negative")
        for t in self.targets:
            if t not in QOR_FIELDS:
                raise SchemaError(f"unknown target {t}")
        for b in self.onehot_blocks:
            if b.start < 0 or b.start + b.size > self.feature_dim:
                raise SchemaError(f"one-hot block {b.name} exceeds feature_dim")
        if not 0 <= self.pragma_feature_index < self.feature_dim:
            raise SchemaError("pragma_feature_index outside the feature vector")

    def scale_offset(self, target: str) -> tuple[float, float]:
        return self.normalization.get(target, (1.0, 0.0))

    def normalize_target(self, target: str, value: float) -> float:
        scale, offset = self.scale_offset(target)
        return (value - offset) / scale

    def denormalize_target(self, target: str, value: float) -> float:
        scale, offset = self.scale_offset(target)
        return value * scale + offset

    def to_dict(self) -> dict[str, Any]:
        return {
            "feature_dim": self.feature_dim,
            "edge_feature_dim": self.edge_feature_dim,
            "targets": list(self.targets),
            "normalization": {k: [float(s), float(o)] for k, (s, o) in sorted(self.normalization.items())},
            "split_seed": self.split_seed,
            "split_fractions": [float(f) for f in self.split_fractions],
            "onehot_blocks": [
                {"name": b.name, "start": b.start, "size": b.size, "vocabulary": list(b.vocabulary)}
                for b in self.onehot_blocks
            ],
            "numeric_columns": list(self.numeric_columns),
            "pragma_feature_index": self.pragma_feature_index,
            "allow_self_loops": self.allow_self_loops,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DatasetManifest":
        known = {
            "feature_dim", "edge_feature_dim", "targets", "normalization", "split_seed",
            "split_fractions", "onehot_blocks", "numeric_columns", "pragma_feature_index",
            "allow_self_loops",
        }
        unknown = set(data) - known
        if unknown:
            raise SchemaError(f"unknown manifest keys {sorted(unknown)}")
        if "feature_dim" not in data:
            raise SchemaError("manifest missing feature_dim")
        try:
            return cls(
                feature_dim=int(data["feature_dim"]),
                edge_feature_dim=int(data.get("edge_feature_dim", 0)),
                targets=tuple(data.get("targets", REQUIRED_QOR_FIELDS)),
                normalization={k: (float(v[0]), float(v[1])) for k, v in data.get("normalization", {}).items()},
                split_seed=int(data.get("split_seed", 0)),
                split_fractions=tuple(float(f) for f in data.get("split_fractions", (0.7, 0.15, 0.15))),
                onehot_blocks=tuple(
                    FeatureBlock(b["name"], int(b["start"]), int(b["size"]), tuple(b.get("vocabulary", ())))
                    for b in data.get("onehot_blocks", ())
                ),
                numeric_columns=tuple(int(c) for c in data.get("numeric_columns", ())),
                pragma_feature_index=int(data.get("pragma_feature_index", 0)),
                allow_self_loops=bool(data.get("allow_self_loops", False)),
            )
        except (TypeError, KeyError, IndexError) as exc:
            raise SchemaError(f"malformed manifest: {exc}") from exc


# --- design spaces ---------------------------------------------------------


@dataclass(frozen=True)
class Knob:
    name: str
    domain: tuple[Any, ...]


@dataclass(frozen=True)
class DesignSpace:
    knobs: tuple[Knob, ...]

    def __post_init__(self):
        names = [k.name for k in self.knobs]
        if len(set(names)) != len(names):
            raise ConfigurationError("duplicate knob names")
        for k in self.knobs:
            if not k.domain:
                raise ConfigurationError(f"knob {k.name} has an empty domain")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DesignSpace":
        return cls(tuple(Knob(str(k["name"]), tuple(k["domain"])) for k in data["knobs"]))

    def to_dict(self) -> dict[str, Any]:
        return {"knobs": [{"name": k.name, "domain": list(k.domain)} for k in self.knobs]}

    @property
    def names(self) -> list[str]:
        return [k.name for k in self.knobs]

    @property
    def size(self) -> int:
        return math.prod(len(k.domain) for k in self.knobs)

    @property
    def radices(self) -> list[int]:
        return [len(k.domain) for k in self.knobs]

    def validate(self, config: "Configuration") -> None:
        if len(config.values) != len(self.knobs):
            raise ConfigurationError(
                f"configuration has {len(config.values)} values, space has {len(self.knobs)} knobs"
            )
        for knob, value in zip(self.knobs, config.values):
            if value not in knob.domain:
                raise ConfigurationError(f"value {value!r} not in domain of {knob.name}")

    def contains(self, config: "Configuration") -> bool:
        try:
            self.validate(config)
        except ConfigurationError:
            return False
        return True

    def indices(self, config: "Configuration") -> tuple[int, ...]:
        return tuple(k.domain.index(v) for k, v in zip(self.knobs, config.values))

    def from_indices(self, idx: Iterable[int]) -> "Configuration":
        return Configuration(tuple(k.domain[i] for k, i in zip(self.knobs, idx)))

    def config_id(self, config: "Configuration") -> int:
        """Position of ``config`` in lexicographic enumeration order."""
        cid = 0
        for radix, i in zip(self.radices, self.indices(config)):
            cid = cid * radix + i
        return cid

    def from_config_id(self, cid: int) -> "Configuration":
        idx = []
        for radix in reversed(self.radices):
            cid, r = divmod(cid, radix)
            idx.append(r)
        return self.from_indices(reversed(idx))

    def random_config(self, rng: np.random.Generator) -> "Configuration":
        return self.from_indices(int(rng.integers(r)) for r in self.radices)


@dataclass(frozen=True)
class Configuration:
    values: tuple[Any, ...]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)


def load_space(path: str | Path) -> DesignSpace:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return DesignSpace.from_dict(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: malformed design space ({exc})") from exc


def save_space(space: DesignSpace, path: str | Path) -> None:
    Path(path).write_text(json.dumps(space.to_dict()) + "\n", encoding="utf-8")


def enumerate_space(space: DesignSpace, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[Configuration]:
    """Yield every configuration once, lexicographic in knob order."""
    if space.size > cap:
        raise SpaceTooLargeError(f"design space has {space.size} configurations, above the cap of {cap}")
    for values in itertools.product(*(k.domain for k in space.knobs)):
        yield Configuration(values)


# --- bundle I/O ------------------------------------------------------------


def _graph_from_record(rec: dict[str, Any], lineno: int) -> CdfgGraph:
    try:
        nodes = tuple(
            CdfgNode(int(n["id"]), tuple(float(x) for x in n["feat"]), bool(n.get("pragma", False)))
            for n in rec["nodes"]
        )
        edges = tuple(
            CdfgEdge(int(e["src"]), int(e["dst"]), tuple(float(x) for x in e.get("feat", ())))
            for e in rec.get("edges", ())
        )
        label = QorVector.from_dict(rec["label"]) if rec.get("label") is not None else None
        slots = {str(k): int(v) for k, v in rec.get("slots", {}).items()}
        return CdfgGraph(
            graph_id=str(rec["id"]),
            nodes=nodes,
            edges=edges,
            label=label,
            pragma_slots=slots,
            benchmark_id=str(rec.get("benchmark", "")),
        )
    except SchemaError as exc:
        raise SchemaError(f"line {lineno}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"line {lineno}: malformed graph record ({exc!r})") from exc


def graph_to_record(graph: CdfgGraph) -> dict[str, Any]:
    rec: dict[str, Any] = {
        "id": graph.graph_id,
        "nodes": [{"id": n.id, "feat": list(n.feature), "pragma": n.is_pragma_node} for n in graph.nodes],
        "edges": [{"src": e.src, "dst": e.dst, "feat": list(e.feature)} for e in graph.edges],
        "label": graph.label.to_dict() if graph.label is not None else None,
        "slots": dict(graph.pragma_slots),
    }
    if graph.benchmark_id:
        rec["benchmark"] = graph.benchmark_id
    return rec


def validate_graph(graph: CdfgGraph, manifest: DatasetManifest) -> None:
    for n in graph.nodes:
        if len(n.feature) != manifest.feature_dim:
            raise SchemaError(
                f"graph {graph.graph_id}: node {n.id} has {len(n.feature)}-dim features, "
                f"manifest declares {manifest.feature_dim}"
            )
        if not all(math.isfinite(x) for x in n.feature):
            raise SchemaError(f"graph {graph.graph_id}: node {n.id} has non-finite features")
        for block in manifest.onehot_blocks:
            chunk = n.feature[block.start:block.start + block.size]
            ones = sum(1 for x in chunk if x == 1.0)
            zeros = sum(1 for x in chunk if x == 0.0)
            if zeros + ones != block.size or ones > 1:
                raise SchemaError(f"graph {graph.graph_id}: node {n.id} block {block.name} is not one-hot")
        for col in manifest.numeric_columns:
            if n.feature[col] < 0:
                raise SchemaError(f"graph {graph.graph_id}: node {n.id} numeric column {col} is negative")
    for e in graph.edges:
        if len(e.feature) != manifest.edge_feature_dim:
            raise SchemaError(
                f"graph {graph.graph_id}: edge {e.src}->{e.dst} has {len(e.feature)}-dim features, "
                f"manifest declares {manifest.edge_feature_dim}"
            )
        if e.src == e.dst and not manifest.allow_self_loops:
            raise SchemaError(f"graph {graph.graph_id}: self-loop on node {e.src} not allowed by manifest")


def load_dataset(path: str | Path) -> tuple[list[CdfgGraph], DatasetManifest]:
    path = Path(path)
    manifest: DatasetManifest | None = None
    graphs: list[CdfgGraph] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: {exc.msg}") from exc
            if not isinstance(rec, dict):
                raise ParseError(f"line {lineno}: expected a JSON object")
            if manifest is None:
                if "manifest" not in rec:
                    raise ParseError(f"line {lineno}: bundle must start with a manifest record")
                manifest = DatasetManifest.from_dict(rec["manifest"])
                continue
            graph = _graph_from_record(rec, lineno)
            try:
                validate_graph(graph, manifest)
            except SchemaError as exc:
                raise SchemaError(f"line {lineno}: {exc}") from exc
            graphs.append(graph)
    if manifest is None:
        raise ParseError(f"{path}: empty bundle")
    return graphs, manifest


def dumps_bundle(graphs: Sequence[CdfgGraph], manifest: DatasetManifest) -> str:
    lines = [json.dumps({"manifest": manifest.to_dict()}, separators=(",", ":"))]
    lines += [json.dumps(graph_to_record(g), separators=(",", ":")) for g in graphs]
    return "\n".join(lines) + "\n"


def save_dataset(graphs: Sequence[CdfgGraph], manifest: DatasetManifest, path: str | Path) -> None:
    Path(path).write_text(dumps_bundle(graphs, manifest), encoding="utf-8")


# --- operations ------------------------------------------------------------


def split_dataset(
    graphs: Sequence[CdfgGraph], manifest: DatasetManifest
) -> tuple[list[CdfgGraph], list[CdfgGraph], list[CdfgGraph]]:
    """Seeded (train, test, validation) partition.

    Test and validation sizes are floored; the remainder goes to train.
    """
    n = len(graphs)
    if n < 3:
        raise DatasetError(f"need at least 3 graphs to split, got {n}")
    _, f_test, f_val = manifest.split_fractions
    n_test = math.floor(n * f_test + 1e-9)
    n_val = math.floor(n * f_val + 1e-9)
    order = np.random.default_rng(manifest.split_seed).permutation(n)
    test = [graphs[i] for i in order[:n_test]]
    val = [graphs[i] for i in order[n_test:n_test + n_val]]
    train = [graphs[i] for i in order[n_test + n_val:]]
    return train, test, val


def slot_value(knob: Knob, value: Any) -> float:
    """Numeric encoding written into a pragma slot: the value itself when numeric, else its domain index."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return float(knob.domain.index(value))
    return float(value)


def apply_configuration(
    graph: CdfgGraph, space: DesignSpace, config: Configuration, feature_index: int = 0
) -> CdfgGraph:
    space.validate(config)
    missing = [k.name for k in space.knobs if k.name not in graph.pragma_slots]
    if missing:
        raise ConfigurationError("no slot for " + ", ".join(missing))
    writes = {graph.pragma_slots[k.name]: slot_value(k, v) for k, v in zip(space.knobs, config.values)}
    nodes = []
    changed = False
    for n in graph.nodes:
        if n.id in writes and n.feature[feature_index] != writes[n.id]:
            feat = list(n.feature)
            feat[feature_index] = writes[n.id]
            n = replace(n, feature=tuple(feat))
            changed = True
        nodes.append(n)
    if not changed:
        return graph
    # the stored label described the old configuration
    return replace(graph, nodes=tuple(nodes), label=None)
