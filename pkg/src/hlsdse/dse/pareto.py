"""Objectives, dominance, Pareto filtering, ADRS and NSGA-II ranking helpers.

Dominance minimises (area, latency in cycles). The reciprocal latency metric
only appears inside the ADRS distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from ..cdfg import Configuration, QorVector


@dataclass(frozen=True)
class DeviceCapacities:
    lut: float = 230_400.0
    ff: float = 460_800.0
    bram: float = 312.0
    dsp: float = 1_728.0

    @classmethod
    def unit(cls) -> "DeviceCapacities":
        """For QoR vectors that already hold utilization fractions."""
        return cls(1.0, 1.0, 1.0, 1.0)

    @classmethod
    def from_dict(cls, data: dict[str, float]) -> "DeviceCapacities":
        unknown = set(data) - {"lut", "ff", "bram", "dsp"}
        if unknown:
            raise ValueError(f"unknown capacity keys {sorted(unknown)}")
        caps = cls(**{k: float(v) for k, v in data.items()})
        if min(caps.lut, caps.ff, caps.bram, caps.dsp) <= 0:
            raise ValueError("device capacities must be positive")
        return caps

    def to_dict(self) -> dict[str, float]:
        return {"lut": self.lut, "ff": self.ff, "bram": self.bram, "dsp": self.dsp}


@dataclass(frozen=True)
class Objectives:
    area: float
    latency: float
    qor: QorVector | None = None

    @property
    def l_metric(self) -> float:
        return 1.0 / self.latency

    @classmethod
    def from_qor(cls, qor: QorVector, caps: DeviceCapacities) -> "Objectives":
        missing = [k for k in ("latency", "lut", "ff", "dsp", "bram") if getattr(qor, k) is None]
        if missing:
            raise ValueError(f"QoR vector lacks {missing} needed for DSE objectives")
        area = 0.25 * (qor.ff / caps.ff + qor.lut / caps.lut + qor.bram / caps.bram + qor.dsp / caps.dsp)
        if area < 0 or not math.isfinite(area):
            raise ValueError(f"invalid area {area}")
        return cls(area=area, latency=qor.latency, qor=qor)


@dataclass(frozen=True)
class FrontEntry:
    config: Configuration
    objectives: Objectives


def _obj(item: Any) -> Objectives:
    return item.objectives if hasattr(item, "objectives") else item


def dominates(a: Objectives, b: Objectives) -> bool:
    a, b = _obj(a), _obj(b)
    return (
        a.area <= b.area
        and a.latency <= b.latency
        and (a.area < b.area or a.latency < b.latency)
    )


def pareto_filter(points: Iterable[Any]) -> list[Any]:
    """Non-dominated subset ordered by (area, latency); exact duplicates keep their first occurrence."""
    items = list(points)
    order = sorted(range(len(items)), key=lambda i: (_obj(items[i]).area, _obj(items[i]).latency, i))
    front = []
    best_latency = math.inf
    for i in order:
        o = _obj(items[i])
        if o.latency < best_latency:
            front.append(items[i])
            best_latency = o.latency
    return front


def adrs(reference: Sequence[Any], approx: Sequence[Any]) -> float:
    """Mean over the reference front of the closest relative distance into ``approx``."""
    if not reference or not approx:
        raise ValueError("ADRS needs two non-empty fronts")
    ref = [_obj(x) for x in reference]
    app = [_obj(x) for x in approx]
    for mu in app:
        if mu.area == 0 or mu.latency == 0:
            raise ZeroDivisionError("approximate front has a zero area or latency in a denominator")
    total = 0.0
    for lam in ref:
        best = math.inf
        for mu in app:
            d_area = abs((lam.area - mu.area) / mu.area)
            d_lat = abs((lam.l_metric - mu.l_metric) / mu.l_metric)
            best = min(best, max(d_area, d_lat))
        total += best
    return total / len(ref)


def fast_non_dominated_sort(objs: Sequence[Any]) -> list[list[int]]:
    """Fronts of indices, best first."""
    n = len(objs)
    o = [_obj(x) for x in objs]
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    counts = [0] * n
    fronts: list[list[int]] = [[]]
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if dominates(o[p], o[q]):
                dominated_by[p].append(q)
            elif dominates(o[q], o[p]):
                counts[p] += 1
        if counts[p] == 0:
            fronts[0].append(p)
    while fronts[-1]:
        nxt = []
        for p in fronts[-1]:
            for q in dominated_by[p]:
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(q)
        fronts.append(sorted(nxt))
    return fronts[:-1]


def crowding_distance(objs: Sequence[Any], front: Sequence[int]) -> dict[int, float]:
    dist = {i: 0.0 for i in front}
    if len(front) <= 2:
        return {i: math.inf for i in front}
    vals = np.array([[_obj(objs[i]).area, _obj(objs[i]).latency] for i in front])
    for m in range(2):
        order = np.argsort(vals[:, m], kind="stable")
        lo, hi = vals[order[0], m], vals[order[-1], m]
        dist[front[order[0]]] = dist[front[order[-1]]] = math.inf
        if hi == lo:
            continue
        for k in range(1, len(order) - 1):
            dist[front[order[k]]] += (vals[order[k + 1], m] - vals[order[k - 1], m]) / (hi - lo)
    return dist


def rank_and_crowding(objs: Sequence[Any]) -> tuple[list[int], list[float]]:
    ranks = [0] * len(objs)
    crowd = [0.0] * len(objs)
    for r, front in enumerate(fast_non_dominated_sort(objs)):
        cd = crowding_distance(objs, front)
        for i in front:
            ranks[i] = r
            crowd[i] = cd[i]
    return ranks, crowd


def select_best(objs: Sequence[Any], k: int) -> list[int]:
    """Indices of the ``k`` best by (rank, -crowding), ties broken by index."""
    ranks, crowd = rank_and_crowding(objs)
    return sorted(range(len(objs)), key=lambda i: (ranks[i], -crowd[i], i))[:k]
