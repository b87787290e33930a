"""Classical search baselines and the exhaustive reference run."""

from __future__ import annotations

import math
import time
from typing import Sequence

import numpy as np

from ..cdfg import DEFAULT_ENUMERATION_CAP, Configuration, DesignSpace, enumerate_space
from .budget import BudgetSchedule
from .evaluators import Evaluator
from .explorer import Explorer, RunResult
from .pareto import DeviceCapacities, FrontEntry, Objectives, fast_non_dominated_sort, rank_and_crowding, select_best


def scalar_cost(obj: Objectives, latency_max: float, weight: float = 0.5) -> float:
    """``weight * area + (1 - weight) * latency / latency_max``."""
    return weight * obj.area + (1.0 - weight) * obj.latency / latency_max


def sa_accept(delta: float, temperature: float, u: float, literal: bool = False) -> bool:
    """Metropolis test for a cost change ``delta = new - current`` with uniform draw ``u``.

    ``literal=True`` evaluates ``1 - exp(delta / T)`` instead, clipped to [0, 1].
    """
    if delta < 0:
        return True
    if temperature <= 0:
        return False
    if literal:
        prob = 1.0 - math.exp(min(delta / temperature, 700.0))
        prob = min(max(prob, 0.0), 1.0)
    else:
        prob = math.exp(-delta / temperature)
    return u < prob


def cool(temperature: float, rate: float) -> float:
    return temperature / (1.0 + rate)


def _latency_max(entries: Sequence[FrontEntry]) -> float:
    return max(e.objectives.latency for e in entries)


# -- NSGA-II ---------------------------------------------------------------


def _tournament(rng: np.random.Generator, ranks: list[int], crowd: list[float]) -> int:
    a, b = (int(x) for x in rng.integers(len(ranks), size=2))
    if (ranks[a], -crowd[a]) <= (ranks[b], -crowd[b]):
        return a
    return b


def _crossover_mutate(
    rng: np.random.Generator, pa: list[int], pb: list[int], radices: list[int], p_cross: float, p_mut: float
) -> list[int]:
    if rng.random() < p_cross:
        mask = rng.random(len(pa)) < 0.5
        child = [a if m else b for a, b, m in zip(pa, pb, mask)]
    else:
        child = list(pa)
    for k, r in enumerate(radices):
        if r > 1 and rng.random() < p_mut:
            child[k] = (child[k] + int(rng.integers(1, r))) % r
    return child


def nsga2_run(
    space: DesignSpace,
    evaluator: Evaluator,
    budget: BudgetSchedule,
    seed: int = 0,
    caps: DeviceCapacities | None = None,
    crossover_rate: float = 0.9,
    mutation_rate: float | None = None,
    workers: int = 1,
) -> RunResult:
    rng = np.random.default_rng(seed)
    ex = Explorer(space, evaluator, budget, rng, caps, workers)
    radices = space.radices
    p_mut = mutation_rate if mutation_rate is not None else 1.0 / max(1, len(radices))
    pop = ex.evaluate([space.random_config(rng) for _ in range(budget.n_pop)])
    while not ex.done():
        ex.iteration += 1
        if not pop:
            pop = ex.evaluate([space.random_config(rng) for _ in range(budget.n_pop)])
            continue
        ranks, crowd = rank_and_crowding(pop)
        kids = []
        for _ in range(budget.n_pop):
            a = space.indices(pop[_tournament(rng, ranks, crowd)].config)
            b = space.indices(pop[_tournament(rng, ranks, crowd)].config)
            kids.append(space.from_indices(_crossover_mutate(rng, list(a), list(b), radices, crossover_rate, p_mut)))
        merged = pop + ex.evaluate(kids)
        pop = [merged[i] for i in select_best(merged, budget.n_pop)]
    return ex.result("nsga2")


# -- simulated annealing ---------------------------------------------------


def neighbor(space: DesignSpace, config: Configuration, rng: np.random.Generator) -> Configuration:
    """Move one knob to an adjacent value of its domain."""
    idx = list(space.indices(config))
    movable = [k for k, r in enumerate(space.radices) if r > 1]
    if not movable:
        return config
    k = movable[int(rng.integers(len(movable)))]
    r = space.radices[k]
    step = 1 if rng.random() < 0.5 else -1
    if not 0 <= idx[k] + step < r:
        step = -step
    idx[k] += step
    return space.from_indices(idx)


def sa_run(
    space: DesignSpace,
    evaluator: Evaluator,
    budget: BudgetSchedule,
    seed: int = 0,
    t_init: float = 0.1,
    t_stop: float = 1e-4,
    cooling: float = 0.05,
    caps: DeviceCapacities | None = None,
    weights: str = "fixed",
    literal_acceptance: bool = False,
    workers: int = 1,
) -> RunResult:
    """Population of annealing chains.

    ``weights="fixed"`` scores every chain with the 0.5/0.5 cost. ``"spread"``
    gives chain ``i`` the area weight ``i / (n_pop - 1)`` so chains settle on
    different parts of the front.
    """
    if not t_init > t_stop > 0:
        raise ValueError("need t_init > t_stop > 0")
    if cooling <= 0:
        raise ValueError("cooling rate must be positive")
    rng = np.random.default_rng(seed)
    ex = Explorer(space, evaluator, budget, rng, caps, workers)
    n = budget.n_pop
    if weights == "spread" and n > 1:
        w = [i / (n - 1) for i in range(n)]
    elif weights in ("fixed", "spread"):
        w = [0.5] * n
    else:
        raise ValueError(f"unknown weighting {weights!r}")
    current = ex.evaluate([space.random_config(rng) for _ in range(n)])
    while not current and not ex.done():
        current = ex.evaluate([space.random_config(rng) for _ in range(n)])
    temp = t_init
    restarts = 0
    while not ex.done():
        ex.iteration += 1
        proposals = [neighbor(space, c.config, rng) for c in current]
        # a proposal seen before is swapped for a nearby unseen one; the chain follows that
        got = ex.evaluate_aligned(proposals)
        if not ex.evaluated:
            continue
        lat_max = _latency_max(ex.evaluated)
        for i, cur in enumerate(current):
            new = got[i] if i < len(got) else None
            if new is None:
                continue
            delta = scalar_cost(new.objectives, lat_max, w[i]) - scalar_cost(cur.objectives, lat_max, w[i])
            if sa_accept(delta, temp, float(rng.random()), literal_acceptance):
                current[i] = new
        temp = cool(temp, cooling)
        if temp < t_stop:
            temp = t_init
            restarts += 1
    return ex.result("sa", restarts=restarts, final_temperature=temp)


# -- ant colony --------------------------------------------------------------


def aco_run(
    space: DesignSpace,
    evaluator: Evaluator,
    budget: BudgetSchedule,
    seed: int = 0,
    alpha: float = 1.0,
    beta: float = 0.0,
    rho: float = 0.9,
    q: float = 0.1,
    heuristic: Sequence[Sequence[float]] | None = None,
    caps: DeviceCapacities | None = None,
    workers: int = 1,
) -> RunResult:
    """Per-knob pheromone vectors; the iteration's non-dominated ants are the elite."""
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    ex = Explorer(space, evaluator, budget, rng, caps, workers)
    tau = [np.ones(r) for r in space.radices]
    eta = [np.ones(r) for r in space.radices] if heuristic is None else [np.asarray(h, float) for h in heuristic]
    if [len(h) for h in eta] != space.radices:
        raise ValueError("heuristic shape does not match the design space")
    while not ex.done():
        ex.iteration += 1
        probs = []
        for t, h in zip(tau, eta):
            weight = np.power(np.maximum(t, 1e-12), alpha) * np.power(h, beta)
            probs.append(weight / weight.sum())
        ants = [space.from_indices(int(rng.choice(len(p), p=p)) for p in probs) for _ in range(budget.n_pop)]
        got = ex.evaluate(ants)
        for t in tau:
            t *= rho
        if got:
            lat_max = _latency_max(ex.evaluated)
            for i in fast_non_dominated_sort(got)[0]:
                e = got[i]
                amount = q / max(scalar_cost(e.objectives, lat_max), 1e-12)
                for k, vi in enumerate(space.indices(e.config)):
                    tau[k][vi] += amount
    return ex.result("aco", pheromone=[t.round(6).tolist() for t in tau])


# -- exhaustive ------------------------------------------------------------


def exhaustive_run(
    space: DesignSpace,
    evaluator: Evaluator,
    caps: DeviceCapacities | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
    wall_clock_cap: float = math.inf,
    workers: int = 1,
) -> RunResult:
    configs = list(enumerate_space(space, cap=cap))
    budget = BudgetSchedule(n_se=len(configs), n_pop=1, wall_clock_cap=wall_clock_cap)
    ex = Explorer(space, evaluator, budget, np.random.default_rng(0), caps, workers, clock=time.monotonic)
    chunk = 256
    for i in range(0, len(configs), chunk):
        ex.iteration = i // chunk
        ex.evaluate(configs[i : i + chunk])
        if ex.timed_out():
            break
    return ex.result("exhaustive")
