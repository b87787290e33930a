"""Front CSV emission and parsing.

Files may start with ``#`` provenance lines; readers skip them. Columns are
``config_id,<knob names>,area,latency,lut,ff,dsp,bram``.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Sequence

from ..cdfg import Configuration, DesignSpace, QorVector
from .pareto import FrontEntry, Objectives

QOR_COLUMNS = ("lut", "ff", "dsp", "bram")


class FrontFormatError(ValueError):
    pass


def provenance_line(meta: dict[str, Any]) -> str:
    return "# " + json.dumps(meta, sort_keys=True, separators=(",", ":"), default=str) + "\n"


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def dumps_front(space: DesignSpace, front: Sequence[FrontEntry], meta: dict[str, Any] | None = None) -> str:
    buf = io.StringIO()
    if meta is not None:
        buf.write(provenance_line(meta))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["config_id", *space.names, "area", "latency", *QOR_COLUMNS])
    for e in front:
        qor = e.objectives.qor
        writer.writerow([
            space.config_id(e.config),
            *e.config.values,
            _fmt(e.objectives.area),
            _fmt(e.objectives.latency),
            *(_fmt(getattr(qor, k) if qor is not None else None) for k in QOR_COLUMNS),
        ])
    return buf.getvalue()


def write_front(path: str | Path, space: DesignSpace, front: Sequence[FrontEntry], meta: dict[str, Any] | None = None) -> None:
    Path(path).write_text(dumps_front(space, front, meta), encoding="utf-8")


def read_front(path: str | Path) -> list[FrontEntry]:
    """Entries with the knob values kept as strings; only ``area`` and ``latency`` are required."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
            fields = rows[0].keys() if rows else []
    except OSError as exc:
        raise FrontFormatError(f"cannot read front {path}: {exc}") from exc
    if not rows:
        raise FrontFormatError(f"{path}: front file has no entries")
    if "area" not in fields or "latency" not in fields:
        raise FrontFormatError(f"{path}: needs area and latency columns")
    skip = {"config_id", "area", "latency", *QOR_COLUMNS}
    knobs = [f for f in fields if f not in skip]
    out = []
    for lineno, row in enumerate(rows, start=2):
        try:
            area, lat = float(row["area"]), float(row["latency"])
            qor = {k: float(row[k]) for k in QOR_COLUMNS if row.get(k)}
        except (TypeError, ValueError) as exc:
            raise FrontFormatError(f"{path}: bad number in data row {lineno}: {exc}") from exc
        cfg = Configuration(tuple(row[k] for k in knobs))
        out.append(FrontEntry(cfg, Objectives(area, lat, QorVector(latency=lat, **qor))))
    return out
