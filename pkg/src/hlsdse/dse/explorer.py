"""Budgeted evaluation archive shared by every search algorithm.

The explorer owns the evaluation budget. Algorithms propose candidates in
batches; the explorer replaces candidates it has already seen by nearby unseen
ones, stops at ``n_se`` evaluator calls or at the wall-clock cap, and keeps a
log of every call. Failed evaluations are logged and still count.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from ..cdfg import Configuration, DesignSpace
from .budget import BudgetSchedule
from .evaluators import Evaluator
from .pareto import DeviceCapacities, FrontEntry, Objectives, pareto_filter

log = logging.getLogger(__name__)

_NEAR_TRIES = 24
_RANDOM_TRIES = 64
_SCAN_LIMIT = 10**6


@dataclass
class RunResult:
    """Outcome of one search run."""

    algorithm: str
    front: list[FrontEntry]
    evaluated: list[FrontEntry]
    calls: int
    failures: int
    elapsed_s: float
    log: list[dict[str, Any]]
    budget: BudgetSchedule
    extras: dict[str, Any] = field(default_factory=dict)

    def summary(self) -> dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "evaluations": self.calls,
            "failures": self.failures,
            "front_size": len(self.front),
            "runtime_s": round(self.elapsed_s, 3),
            "budget": self.budget.to_dict(),
            **self.extras,
        }


def objectives_dict(obj: Objectives | None) -> dict[str, float] | None:
    if obj is None:
        return None
    out = {"area": obj.area, "latency": obj.latency}
    if obj.qor is not None:
        out.update({k: v for k, v in obj.qor.to_dict().items() if k != "latency"})
    return out


class Explorer:
    def __init__(
        self,
        space: DesignSpace,
        evaluator: Evaluator,
        budget: BudgetSchedule,
        rng: np.random.Generator,
        caps: DeviceCapacities | None = None,
        workers: int = 1,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.space = space
        self.evaluator = evaluator
        self.budget = budget
        self.rng = rng
        self.caps = caps or DeviceCapacities()
        self.workers = max(1, int(workers))
        self.clock = clock
        self.start = clock()
        self.deadline = self.start + budget.wall_clock_cap
        self.iteration = 0
        self.calls = 0
        self.failures = 0
        self.seen: set[tuple] = set()
        self.evaluated: list[FrontEntry] = []
        self.records: list[dict[str, Any]] = []
        self._front: list[FrontEntry] = []

    # -- budget ---------------------------------------------------------

    @property
    def remaining(self) -> int:
        return self.budget.n_se - self.calls

    def timed_out(self) -> bool:
        return self.clock() >= self.deadline

    def space_exhausted(self) -> bool:
        return len(self.seen) >= self.space.size

    def done(self) -> bool:
        return self.remaining <= 0 or self.timed_out() or self.space_exhausted()

    # -- candidate handling --------------------------------------------

    def _mutate(self, idx: list[int], n_changes: int) -> list[int]:
        out = list(idx)
        radices = self.space.radices
        movable = [i for i, r in enumerate(radices) if r > 1]
        if not movable:
            return out
        picks = self.rng.choice(len(movable), size=min(n_changes, len(movable)), replace=False)
        for p in np.atleast_1d(picks):
            k = movable[int(p)]
            shift = int(self.rng.integers(1, radices[k]))
            out[k] = (out[k] + shift) % radices[k]
        return out

    def fresh(self, config: Configuration | None = None, exclude: set | frozenset = frozenset()) -> Configuration | None:
        """An unseen configuration, preferably close to ``config``; None once the space is covered."""
        taken = self.seen | exclude if exclude else self.seen
        if len(taken) >= self.space.size:
            return None
        if config is not None:
            base = list(self.space.indices(config))
            for t in range(_NEAR_TRIES):
                cand = self.space.from_indices(self._mutate(base, 1 + t // 4))
                if cand.values not in taken:
                    return cand
        for _ in range(_RANDOM_TRIES):
            cand = self.space.random_config(self.rng)
            if cand.values not in taken:
                return cand
        if self.space.size <= _SCAN_LIMIT:
            # dense archive: pick uniformly among the unseen ids
            unseen = [c for c in range(self.space.size) if self.space.from_config_id(c).values not in taken]
            return self.space.from_config_id(int(unseen[int(self.rng.integers(len(unseen)))]))
        return None

    def prepare(self, candidates: Sequence[Configuration]) -> list[Configuration]:
        """Dedupe against the archive and within the batch, truncated to the remaining budget."""
        out: list[Configuration] = []
        pending = set()
        for cand in candidates:
            if len(out) >= self.remaining:
                break
            self.space.validate(cand)
            if cand.values in self.seen or cand.values in pending:
                cand = self.fresh(cand, exclude=pending)
                if cand is None:
                    break
            pending.add(cand.values)
            out.append(cand)
        return out

    # -- evaluation ----------------------------------------------------

    def _call(self, config: Configuration) -> tuple[Objectives | None, str | None, float]:
        if self.timed_out():
            return None, "skipped", 0.0
        t0 = time.perf_counter()
        try:
            qor = self.evaluator.evaluate(self.space, config)
            obj = Objectives.from_qor(qor, self.caps)
            err = None
        except Exception as exc:  # evaluator failures are logged and skipped
            obj, err = None, f"{type(exc).__name__}: {exc}"
        return obj, err, (time.perf_counter() - t0) * 1e3

    def evaluate(self, candidates: Sequence[Configuration]) -> list[FrontEntry]:
        """Evaluate a batch; returns the successful entries in candidate order."""
        return [e for e in self.evaluate_aligned(candidates) if e is not None]

    def evaluate_aligned(self, candidates: Sequence[Configuration]) -> list[FrontEntry | None]:
        """Like :meth:`evaluate`, but slot ``j`` answers candidate ``j``.

        The answer may be for a replacement configuration when the candidate had
        been seen before. The list is shorter than the input when the budget ran out.
        """
        if self.done():
            return []
        batch = self.prepare(candidates)
        if self.workers > 1 and len(batch) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(self._call, batch))
        else:
            results = []
            for cfg in batch:
                results.append(self._call(cfg))
        out = []
        for cfg, (obj, err, ms) in zip(batch, results):
            if err == "skipped":
                out.append(None)
                continue
            self.calls += 1
            self.seen.add(cfg.values)
            rec = {
                "iter": self.iteration,
                "config": list(cfg.values),
                "objectives": objectives_dict(obj),
                "elapsed_ms": round(ms, 3),
            }
            if err is not None:
                self.failures += 1
                rec["error"] = err
                log.warning("evaluation of %s failed: %s", cfg.values, err)
            self.records.append(rec)
            if obj is not None:
                entry = FrontEntry(cfg, obj)
                self.evaluated.append(entry)
                out.append(entry)
            else:
                out.append(None)
        fresh = [e for e in out if e is not None]
        if fresh:
            self._front = pareto_filter(self._front + fresh)
        return out

    @property
    def front(self) -> list[FrontEntry]:
        return list(self._front)

    def result(self, algorithm: str, **extras) -> RunResult:
        return RunResult(
            algorithm=algorithm,
            front=pareto_filter(self.evaluated),
            evaluated=list(self.evaluated),
            calls=self.calls,
            failures=self.failures,
            elapsed_s=self.clock() - self.start,
            log=list(self.records),
            budget=self.budget,
            extras=extras,
        )


def write_run_log(path: str | Path, records: Sequence[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
