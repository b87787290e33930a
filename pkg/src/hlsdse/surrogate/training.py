"""Adam training on summed per-target RMSE, and a finite-difference gradient check."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .. import tape as T
from ..cdfg import CdfgGraph, DatasetManifest
from .metrics import mae, rmse, safe_mape
from .model import EcognnModel, GraphArrays, GraphBatch, collate, graph_arrays

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    # "sum": RMSE per target, summed; "joint": one RMSE over all target entries
    loss: str = "sum"

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr < 0:
            raise ValueError("invalid training hyperparameters")
        if self.loss not in ("sum", "joint"):
            raise ValueError(f"unknown loss mode {self.loss}")

    def to_dict(self) -> dict:
        return asdict(self)


class Adam:
    def __init__(self, params: dict[str, T.Tensor], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, p in self.params.items():
            if p.grad is None:
                continue
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * p.grad
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * p.grad**2
            p.data = p.data - self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def rmse_loss(pred: T.Tensor, target: np.ndarray, mode: str = "sum") -> T.Tensor:
    diff = pred - target
    sq = diff * diff
    if mode == "joint":
        return T.sqrt(T.mean(sq) + 1e-12)
    per_target = T.sqrt(T.mean(sq, axis=0) + 1e-12)
    return T.sum(per_target)


@dataclass
class TrainResult:
    model: EcognnModel
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    diverged: bool = False


def _prepare(model: EcognnModel, graphs: Sequence[CdfgGraph], manifest: DatasetManifest | None) -> list[GraphArrays]:
    items = []
    for g in graphs:
        if g.label is None:
            raise ValueError(f"graph {g.graph_id} has no label")
        items.append(graph_arrays(g, model.edge_dim, model.config.targets, manifest))
    return items


def evaluate_split(model: EcognnModel, items: Sequence[GraphArrays], chunk: int = 256) -> dict[str, dict]:
    """Per-target metrics in normalized units (noise-free soft mode)."""
    frozen = {k: T.Tensor(v.data) for k, v in model.params.items()}
    preds, ys = [], []
    for i in range(0, len(items), chunk):
        batch = collate(items[i:i + chunk])
        preds.append(model.forward(batch, mode="soft", params=frozen).data)
        ys.append(batch.y)
    pred, y = np.concatenate(preds), np.concatenate(ys)
    out = {}
    for j, t in enumerate(model.config.targets):
        out[t] = {"rmse": rmse(pred[:, j], y[:, j]), "mae": mae(pred[:, j], y[:, j]), "mape": safe_mape(pred[:, j], y[:, j])}
    return out


def _history_rows(epoch: int, split: str, metrics: dict[str, dict]) -> list[dict]:
    return [{"epoch": epoch, "split": split, "target": t, **m} for t, m in metrics.items()]


def summed_rmse(history: list[dict], split: str) -> dict[int, float]:
    out: dict[int, float] = {}
    for row in history:
        if row["split"] == split:
            out[row["epoch"]] = out.get(row["epoch"], 0.0) + row["rmse"]
    return out


def train(
    model: EcognnModel,
    train_set: Sequence[CdfgGraph],
    val_set: Sequence[CdfgGraph],
    config: TrainConfig,
    manifest: DatasetManifest | None = None,
) -> TrainResult:
    if not train_set:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(config.seed)
    train_items = _prepare(model, train_set, manifest)
    val_items = _prepare(model, val_set, manifest) if val_set else []
    opt = Adam(model.params, config.lr, config.beta1, config.beta2, config.eps)
    result = TrainResult(model)
    best_score = math.inf
    best_params = model.param_arrays()
    last_finite = model.param_arrays()

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_items))
        for start in range(0, len(order), config.batch_size):
            batch = collate([train_items[i] for i in order[start:start + config.batch_size]])
            model.zero_grad()
            pred = model.forward(batch, mode="sample", rng=rng)
            loss = rmse_loss(pred, batch.y, config.loss)
            if not np.isfinite(loss.data):
                log.warning("loss became non-finite at epoch %d; restoring last finite parameters", epoch)
                model.set_params(last_finite)
                result.diverged = True
                break
            loss.backward()
            opt.step()
        if result.diverged:
            break
        if not all(np.all(np.isfinite(p.data)) for p in model.params.values()):
            model.set_params(last_finite)
            result.diverged = True
            break
        last_finite = model.param_arrays()

        result.history += _history_rows(epoch, "train", evaluate_split(model, train_items))
        if val_items:
            val_metrics = evaluate_split(model, val_items)
            result.history += _history_rows(epoch, "val", val_metrics)
            score = sum(m["rmse"] for m in val_metrics.values())
        else:
            score = summed_rmse(result.history, "train")[epoch]
        if score < best_score:
            best_score, result.best_epoch = score, epoch
            best_params = model.param_arrays()
    if config.epochs and result.best_epoch:
        model.set_params(best_params)
        # the optimizer holds references to the replaced leaves
        opt.params = model.params
    return result


# -- gradient check ---------------------------------------------------------


def _objective(model: EcognnModel, batch: GraphBatch, params, seed: int, objective: str) -> T.Tensor:
    pred = model.forward(batch, mode="sample", rng=np.random.default_rng(seed), params=params)
    if objective == "output":
        return T.sum(pred)
    return rmse_loss(pred, batch.y)


def grad_check(
    model: EcognnModel,
    graph: CdfgGraph | Sequence[CdfgGraph],
    epsilon: float = 1e-4,
    blocks: Sequence[str] | None = None,
    entries_per_block: int = 6,
    seed: int = 0,
    objective: str = "loss",
    manifest: DatasetManifest | None = None,
    floor: float = 1e-7,
    return_details: bool = False,
):
    """Compare tape gradients against central differences.

    The Gumbel noise is re-drawn from the same seed for every evaluation, so the
    objective is a smooth deterministic function of the parameters. Relative
    error per entry is ``|a - n| / max(|a|, |n|, floor)``.
    """
    graphs = [graph] if isinstance(graph, CdfgGraph) else list(graph)
    if any(g.num_nodes > 50 for g in graphs):
        raise ValueError("gradient check is limited to graphs of at most 50 nodes")
    if objective == "loss":
        items = _prepare(model, graphs, manifest)
    else:
        items = [graph_arrays(g, model.edge_dim) for g in graphs]
    batch = collate(items)
    names = list(blocks) if blocks is not None else list(model.params)

    model.zero_grad()
    _objective(model, batch, model.params, seed, objective).backward()
    analytic = {k: (model.params[k].grad if model.params[k].grad is not None else np.zeros_like(model.params[k].data)) for k in names}

    base = {k: T.Tensor(v.data.copy()) for k, v in model.params.items()}
    pick = np.random.default_rng(seed + 1)
    worst = 0.0
    details = []
    for name in names:
        flat = base[name].data.reshape(-1)
        count = flat.size
        idx = np.arange(count) if count <= entries_per_block else pick.choice(count, entries_per_block, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + epsilon
            f_plus = float(_objective(model, batch, base, seed, objective).data)
            flat[i] = orig - epsilon
            f_minus = float(_objective(model, batch, base, seed, objective).data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2 * epsilon)
            a = float(analytic[name].reshape(-1)[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, rel)
            details.append({"block": name, "index": int(i), "analytic": a, "numeric": numeric, "rel_error": rel})
    model.zero_grad()
    return (worst, details) if return_details else worst
