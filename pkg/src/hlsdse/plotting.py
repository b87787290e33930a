"""PNG figures written next to the CSV outputs. Uses the non-interactive Agg backend."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .dse.pareto import FrontEntry  # noqa: E402


def _save(fig, path: str | Path, meta: dict[str, Any] | None) -> None:
    # provenance travels in the PNG text chunk; the version-stamped Software key is dropped
    info = {"Software": None}
    if meta is not None:
        info["Description"] = json.dumps(meta, sort_keys=True, default=str)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=info)
    plt.close(fig)


def loss_curve(history: Sequence[dict], path: str | Path, meta: dict[str, Any] | None = None) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for split in ("train", "val"):
        per_epoch: dict[int, float] = {}
        for row in history:
            if row["split"] == split:
                per_epoch[row["epoch"]] = per_epoch.get(row["epoch"], 0.0) + row["rmse"]
        if per_epoch:
            epochs = sorted(per_epoch)
            ax.plot(epochs, [per_epoch[e] for e in epochs], label=split)
    ax.set_xlabel("epoch")
    ax.set_ylabel("summed RMSE (normalized)")
    ax.set_yscale("log")
    ax.legend()
    _save(fig, path, meta)


def front_scatter(
    evaluated: Sequence[FrontEntry],
    front: Sequence[FrontEntry],
    path: str | Path,
    reference: Sequence[FrontEntry] | None = None,
    title: str = "",
    meta: dict[str, Any] | None = None,
) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    if evaluated:
        ax.scatter([e.objectives.latency for e in evaluated], [e.objectives.area for e in evaluated],
                   s=6, c="0.75", label="evaluated")
    if reference:
        ref = sorted(reference, key=lambda e: e.objectives.latency)
        ax.step([e.objectives.latency for e in ref], [e.objectives.area for e in ref],
                where="post", c="k", lw=1, label="reference")
    pts = sorted(front, key=lambda e: e.objectives.latency)
    ax.plot([e.objectives.latency for e in pts], [e.objectives.area for e in pts], "o-", ms=3, c="C3", label="front")
    ax.set_xlabel("latency (cycles)")
    ax.set_ylabel("area (mean utilization)")
    if title:
        ax.set_title(title)
    ax.legend()
    _save(fig, path, meta)


def parity_plot(rows: Sequence[dict], targets: Sequence[str], path: str | Path, meta: dict[str, Any] | None = None) -> None:
    """Predicted against labelled values, one panel per target."""
    fig, axes = plt.subplots(1, len(targets), figsize=(3 * len(targets), 3), squeeze=False)
    for ax, t in zip(axes[0], targets):
        xs = [r[f"label_{t}"] for r in rows if r.get(f"label_{t}") is not None]
        ys = [r[f"pred_{t}"] for r in rows if r.get(f"label_{t}") is not None]
        ax.scatter(xs, ys, s=8)
        if xs:
            lo, hi = min(xs + ys), max(xs + ys)
            ax.plot([lo, hi], [lo, hi], c="k", lw=0.8)
        ax.set_title(t)
        ax.set_xlabel("label")
    axes[0][0].set_ylabel("prediction")
    _save(fig, path, meta)
