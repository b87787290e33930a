"""JSON checkpoint container for trained surrogates.

Parameter blocks are stored row-major with their declared shapes. The file is
written with sorted keys and shortest-repr floats, so identical models yield
identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .model import EcognnConfig, EcognnModel

FORMAT = "ecognn-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def checkpoint_dict(
    model: EcognnModel,
    history: list[dict] | None = None,
    seed: int | None = None,
    run_config: dict[str, Any] | None = None,
) -> dict[str, Any]:
    return {
        "format": FORMAT,
        "version": VERSION,
        "config": model.config.to_dict(),
        "node_dim": model.node_dim,
        "edge_dim": model.edge_dim,
        "normalization": {k: [s, o] for k, (s, o) in sorted(model.normalization.items())},
        "params": {
            name: {"shape": list(t.data.shape), "data": [float(x) for x in t.data.reshape(-1)]}
            for name, t in model.params.items()
        },
        "seed": model.config.seed if seed is None else seed,
        "history": history or [],
        "run_config": run_config or {},
    }


def dumps_checkpoint(model: EcognnModel, **kwargs) -> str:
    return json.dumps(checkpoint_dict(model, **kwargs), sort_keys=True, separators=(",", ":")) + "\n"


def save_checkpoint(path: str | Path, model: EcognnModel, **kwargs) -> None:
    Path(path).write_text(dumps_checkpoint(model, **kwargs), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[EcognnModel, dict[str, Any]]:
    """Return the model and the raw container (history, seed, run config)."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return model_from_dict(data), data


def model_from_dict(data: dict[str, Any]) -> EcognnModel:
    if data.get("format") != FORMAT:
        raise CheckpointError("not an ECoGNN checkpoint")
    if data.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {data.get('version')}")
    cfg = dict(data["config"])
    cfg["targets"] = tuple(cfg["targets"])
    model = EcognnModel(
        EcognnConfig(**cfg),
        node_dim=int(data["node_dim"]),
        edge_dim=int(data["edge_dim"]),
        normalization={k: (float(v[0]), float(v[1])) for k, v in data.get("normalization", {}).items()},
        init=False,
    )
    arrays = {}
    for name, block in data["params"].items():
        arr = np.array(block["data"], dtype=float)
        if arr.size != int(np.prod(block["shape"])):
            raise CheckpointError(f"block {name}: {arr.size} values for shape {block['shape']}")
        arrays[name] = arr.reshape(block["shape"])
    try:
        model.set_params(arrays)
    except ValueError as exc:
        raise CheckpointError(str(exc)) from exc
    return model
