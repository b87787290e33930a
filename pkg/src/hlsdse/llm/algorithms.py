"""LLM-assisted GA, SA and ACO loops.

All three share a :class:`Session` that owns the client budget, the retry and
fallback policy and the transcript. A batch that fails to parse is requested
once more; if that fails too, or the client budget is spent, the batch is
filled with seeded random configurations.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..cdfg import Configuration, DesignSpace
from ..dse.algorithms import cool, sa_accept, scalar_cost
from ..dse.budget import BudgetSchedule
from ..dse.evaluators import Evaluator
from ..dse.explorer import Explorer, RunResult
from ..dse.pareto import DeviceCapacities, FrontEntry, fast_non_dominated_sort, select_best
from ..seeding import derive_seed
from .client import ClientError, LlmClient
from .control import PheromoneMatrix, TempController
from .parse import ParseFailure, parse_response
from .prompt import build_prompt

log = logging.getLogger(__name__)

EXCERPT_CHARS = 240


@dataclass
class LlmParams:
    t_init: float = 1.0
    v_d: float = 0.2
    n_ost_limit: int = 3
    t_floor: float = 0.0
    retries: int = 1
    max_changes: int = 2
    caps: DeviceCapacities | None = None
    workers: int = 1
    extras: dict[str, Any] = field(default_factory=dict)


class Session:
    def __init__(self, space: DesignSpace, client: LlmClient, budget: BudgetSchedule, seed: int, params: LlmParams):
        self.space = space
        self.client = client
        self.params = params
        self.seed = seed
        self.max_calls = math.ceil(budget.n_se / budget.n_pop) + 1
        self.calls = 0
        self.rng = np.random.default_rng(derive_seed(seed, "llm/pad"))
        self.transcript: list[dict[str, Any]] = []
        self.fallbacks = 0
        self.totals = {"valid": 0, "repaired": 0, "dropped": 0, "padded": 0}

    def random_batch(self, n: int) -> list[Configuration]:
        return [self.space.random_config(self.rng) for _ in range(n)]

    def ask(self, iteration: int, prompt, temperature: float) -> list[Configuration]:
        n = prompt.n_requested
        for attempt in range(self.params.retries + 1):
            if self.calls >= self.max_calls:
                break
            self.calls += 1
            rec: dict[str, Any] = {
                "iter": iteration,
                "attempt": attempt,
                "prompt_hash": prompt.digest(),
                "temperature": temperature,
            }
            try:
                text = self.client.complete(prompt, temperature, seed=derive_seed(self.seed, f"llm/{self.calls}"))
                rec["response_excerpt"] = text[:EXCERPT_CHARS]
                configs, diag = parse_response(text, self.space, n, self.rng)
            except (ParseFailure, ClientError) as exc:
                rec.setdefault("response_excerpt", "")
                rec["diagnostics"] = None
                rec["error"] = str(exc)
                self.transcript.append(rec)
                log.info("iteration %d attempt %d: %s", iteration, attempt, exc)
                continue
            rec["diagnostics"] = diag.to_dict()
            for k, v in diag.to_dict().items():
                self.totals[k] += v
            self.transcript.append(rec)
            return configs
        self.fallbacks += 1
        self.transcript.append({"iter": iteration, "fallback": "random", "count": n})
        return self.random_batch(n)

    def extras(self) -> dict[str, Any]:
        return {"client_calls": self.calls, "fallbacks": self.fallbacks, "diagnostics": dict(self.totals)}


def _front_key(ex: Explorer) -> frozenset:
    return frozenset(e.config.values for e in ex.front)


def _configs(entries: Sequence[FrontEntry]) -> list[Configuration]:
    return [e.config for e in entries]


def _objs(entries: Sequence[FrontEntry]):
    return [e.objectives for e in entries]


def _setup(space, evaluator, budget, client, seed, params):
    params = params or LlmParams()
    ex = Explorer(space, evaluator, budget, np.random.default_rng(derive_seed(seed, "explorer")), params.caps, params.workers)
    session = Session(space, client, budget, seed, params)
    temp = TempController(params.t_init, params.v_d, params.n_ost_limit, params.t_floor)
    return params, ex, session, temp


def _finish(name, ex, session, temp, **extras) -> RunResult:
    res = ex.result(name, **session.extras(), llm_temperature=temp.t, **extras)
    res.extras["transcript"] = session.transcript
    return res


def _initial(ex, session, temp, n) -> list[FrontEntry]:
    prompt = build_prompt(ex.space, [], [], "init", n, session.params.extras)
    pop = ex.evaluate(session.ask(0, prompt, temp.t))
    while not pop and not ex.done():
        pop = ex.evaluate(session.random_batch(n))
    return pop


def llmga_run(
    space: DesignSpace,
    evaluator: Evaluator,
    budget: BudgetSchedule,
    client: LlmClient,
    seed: int = 0,
    params: LlmParams | None = None,
) -> RunResult:
    params, ex, session, temp = _setup(space, evaluator, budget, client, seed, params)
    n = budget.n_pop
    pop = _initial(ex, session, temp, n)
    while not ex.done():
        ex.iteration += 1
        before = _front_key(ex)
        prompt = build_prompt(space, _configs(pop), _objs(pop), "ga_offspring", n, params.extras)
        kids = ex.evaluate(session.ask(ex.iteration, prompt, temp.t))
        merged = pop + kids
        pop = [merged[i] for i in select_best(merged, n)]
        temp.update(_front_key(ex) != before)
    return _finish("llmga", ex, session, temp)


def llmsa_run(
    space: DesignSpace,
    evaluator: Evaluator,
    budget: BudgetSchedule,
    client: LlmClient,
    seed: int = 0,
    t_init: float = 0.1,
    t_stop: float = 1e-4,
    cooling: float = 0.05,
    params: LlmParams | None = None,
    literal_acceptance: bool = False,
) -> RunResult:
    """The whole population moves to the proposed neighbours when the mean cost test accepts."""
    if not t_init > t_stop > 0:
        raise ValueError("need t_init > t_stop > 0")
    params, ex, session, temp = _setup(space, evaluator, budget, client, seed, params)
    accept_rng = np.random.default_rng(derive_seed(seed, "llmsa/accept"))
    n = budget.n_pop
    current = _initial(ex, session, temp, n)
    t_anneal = t_init
    accepted = 0
    while not ex.done():
        ex.iteration += 1
        before = _front_key(ex)
        extras = dict(params.extras, max_changes=params.max_changes)
        prompt = build_prompt(space, _configs(current), _objs(current), "sa_neighbor", n, extras)
        proposals = ex.evaluate(session.ask(ex.iteration, prompt, temp.t))
        if proposals and current:
            lat_max = max(e.objectives.latency for e in ex.evaluated)
            new_cost = float(np.mean([scalar_cost(e.objectives, lat_max) for e in proposals]))
            cur_cost = float(np.mean([scalar_cost(e.objectives, lat_max) for e in current]))
            if sa_accept(new_cost - cur_cost, t_anneal, float(accept_rng.random()), literal_acceptance):
                current = proposals
                accepted += 1
        elif proposals:
            current = proposals
        t_anneal = max(cool(t_anneal, cooling), t_stop)
        temp.update(_front_key(ex) != before)
    return _finish("llmsa", ex, session, temp, anneal_temperature=t_anneal, accepted=accepted)


def llmaco_run(
    space: DesignSpace,
    evaluator: Evaluator,
    budget: BudgetSchedule,
    client: LlmClient,
    seed: int = 0,
    rho: float = 0.9,
    deposit: float = 0.1,
    params: LlmParams | None = None,
) -> RunResult:
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    params, ex, session, temp = _setup(space, evaluator, budget, client, seed, params)
    n = budget.n_pop
    pher = PheromoneMatrix(space, 1.0)
    pop: list[FrontEntry] = []
    while not ex.done():
        before = _front_key(ex)
        extras = dict(params.extras, pheromone=pher.to_list())
        prompt = build_prompt(space, _configs(pop), _objs(pop), "aco_pheromone", n, extras)
        ants = ex.evaluate(session.ask(ex.iteration, prompt, temp.t))
        merged = pop + ants
        pop = [merged[i] for i in select_best(merged, n)] if merged else []
        pher.evaporate(rho)
        if pop:
            pher.deposit((pop[i].config for i in fast_non_dominated_sort(pop)[0]), deposit)
        temp.update(_front_key(ex) != before)
        ex.iteration += 1
    return _finish("llmaco", ex, session, temp, pheromone=pher.to_list())


def write_transcript(path: str | Path, records: Sequence[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
