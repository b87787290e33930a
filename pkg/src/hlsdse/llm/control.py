"""LLM-temperature schedule and the pheromone matrix."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from ..cdfg import Configuration, DesignSpace
from .prompt import format_value


class TempController:
    """Sampling temperature that steps down by ``v_d`` after ``n_ost_limit`` stagnant iterations."""

    def __init__(self, t_init: float = 1.0, v_d: float = 0.2, n_ost_limit: int = 3, floor: float = 0.0):
        if v_d < 0 or n_ost_limit < 1 or not 0 <= floor <= t_init:
            raise ValueError("invalid temperature schedule")
        self.t_init = t_init
        self.t = t_init
        self.v_d = v_d
        self.n_ost_limit = n_ost_limit
        self.floor = floor
        self.n_ost = 0

    def update(self, improved: bool) -> float:
        if improved:
            self.n_ost = 0
            return self.t
        self.n_ost += 1
        if self.n_ost >= self.n_ost_limit and self.t >= 0:
            self.t = max(self.t - self.v_d, self.floor)
            self.n_ost = 0
        return self.t


class PheromoneMatrix:
    def __init__(self, space: DesignSpace, init: float = 1.0):
        if init < 0:
            raise ValueError("pheromone must be non-negative")
        self.space = space
        self.tau = [np.full(r, float(init)) for r in space.radices]

    def evaporate(self, rho: float) -> None:
        if not 0 < rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        for t in self.tau:
            t *= rho

    def deposit(self, elite: Iterable[Configuration], amount: float = 0.1) -> None:
        """Add ``amount`` once to every (knob, value) pair used by at least one elite solution."""
        hit = [np.zeros(len(t), dtype=bool) for t in self.tau]
        for cfg in elite:
            for k, i in enumerate(self.space.indices(cfg)):
                hit[k][i] = True
        for t, h in zip(self.tau, hit):
            t[h] += amount

    def value(self, knob: str, value) -> float:
        k = self.space.names.index(knob)
        return float(self.tau[k][self.space.knobs[k].domain.index(value)])

    def to_list(self) -> list[list[float]]:
        return [t.tolist() for t in self.tau]

    def to_dict(self) -> dict[str, dict[str, float]]:
        return {
            k.name: {format_value(v): float(x) for v, x in zip(k.domain, t)} for k, t in zip(self.space.knobs, self.tau)
        }
