"""In-context prompts for LLM-driven search operators.

Every prompt states the knobs with their full domains, the current state when
there is one, and the output grammar::

    ```solutions
    count: 3
    [1, 2, "fg", 4]
    ...
    ```

One bracketed list per solution, values in knob order, strings quoted.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from ..cdfg import Configuration, DesignSpace
from ..dse.pareto import Objectives, rank_and_crowding

MODES = ("init", "ga_offspring", "sa_neighbor", "aco_pheromone")
FENCE = "solutions"

DEFAULT_TASK = (
    "You are tuning high-level synthesis directives for an FPGA kernel. Each knob is a "
    "synthesis pragma such as a loop unroll factor, a pipelining choice or an array "
    "partition factor. Larger parallelism usually lowers latency and raises resource usage. "
    "The two objectives are mean resource utilization (area) and latency in clock cycles, "
    "and both are minimized."
)


def format_value(v: Any) -> str:
    return json.dumps(v)


def format_config(values: Sequence[Any]) -> str:
    return "[" + ", ".join(format_value(v) for v in values) + "]"


def format_block(rows: Sequence[Sequence[Any]]) -> str:
    lines = [f"```{FENCE}", f"count: {len(rows)}"]
    lines += [format_config(r) for r in rows]
    lines.append("```")
    return "\n".join(lines)


@dataclass(frozen=True)
class InContextPrompt:
    mode: str
    task_description: str
    solution_examples: tuple[tuple[str, str], ...]
    task_instruction: str
    state_block: str | None
    n_requested: int

    def render(self) -> str:
        parts = ["## Task", self.task_description, ""]
        if self.solution_examples:
            parts.append("## Examples")
            for given, answer in self.solution_examples:
                parts += [given, answer, ""]
        if self.state_block:
            parts += ["## Current state", self.state_block, ""]
        parts += ["## Instruction", self.task_instruction]
        return "\n".join(parts)

    def messages(self) -> list[dict[str, str]]:
        return [
            {"role": "system", "content": "You answer only in the requested output format."},
            {"role": "user", "content": self.render()},
        ]

    def digest(self) -> str:
        return hashlib.sha256(self.render().encode()).hexdigest()[:16]


def _knob_listing(space: DesignSpace, notes: dict[str, str] | None) -> str:
    lines = []
    for k in space.knobs:
        line = f"- {k.name}: one of {format_config(k.domain)}"
        if notes and k.name in notes:
            line += f"  ({notes[k.name]})"
        lines.append(line)
    return "\n".join(lines)


def _best_first(population: Sequence[Configuration], fitness: Sequence[Objectives]) -> list[int]:
    ranks, crowd = rank_and_crowding(list(fitness))
    return sorted(range(len(population)), key=lambda i: (ranks[i], fitness[i].area, fitness[i].latency, i))


def _state_rows(space: DesignSpace, population, fitness) -> str:
    lines = ["Evaluated solutions, best first (area, latency in cycles):"]
    for i in _best_first(population, fitness):
        o = fitness[i]
        lines.append(f"{format_config(population[i].values)} area={o.area:.6g} latency={o.latency:.6g}")
    return "\n".join(lines)


def _pheromone_rows(space: DesignSpace, pheromone: Sequence[Sequence[float]]) -> str:
    lines = ["Pheromone matrix (higher means the value appeared more in elite designs):"]
    for k, row in zip(space.knobs, pheromone):
        cells = ", ".join(f"{format_value(v)}: {float(t):.6g}" for v, t in zip(k.domain, row))
        lines.append(f"- {k.name}: {cells}")
    return "\n".join(lines)


def _example(space: DesignSpace) -> tuple[str, str]:
    first = [k.domain[0] for k in space.knobs]
    last = [k.domain[-1] for k in space.knobs]
    given = "Knobs as above, two solutions requested. A valid answer:"
    return given, format_block([first, last])


def build_prompt(
    space: DesignSpace,
    population: Sequence[Configuration],
    fitness: Sequence[Objectives],
    mode: str,
    n_requested: int,
    extras: dict[str, Any] | None = None,
) -> InContextPrompt:
    """Assemble the prompt for one generation step.

    ``extras`` may carry ``pheromone`` (required for ``aco_pheromone``),
    ``max_changes`` for neighbour moves (default 2), ``knob_notes`` and ``task``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown prompt mode {mode!r}")
    if len(population) != len(fitness):
        raise ValueError("population and fitness are not aligned")
    extras = extras or {}
    task = extras.get("task", DEFAULT_TASK) + "\n\nKnobs and their allowed values:\n" + _knob_listing(
        space, extras.get("knob_notes")
    )
    grammar = (
        f"Reply with exactly {n_requested} solutions inside one fenced block that starts with "
        f"```{FENCE} and a line `count: {n_requested}`, then one bracketed list per line with "
        f"{len(space.knobs)} values in knob order ({', '.join(space.names)}). "
        "Use only allowed values and quote string values."
    )
    state = None
    if mode == "init":
        head = f"Propose {n_requested} diverse initial solutions that spread across the area/latency trade-off."
    elif mode == "ga_offspring":
        head = (
            f"Act as crossover and mutation: combine and perturb the listed solutions into {n_requested} new "
            "offspring that improve on them. Do not repeat listed solutions."
        )
        state = _state_rows(space, population, fitness)
    elif mode == "sa_neighbor":
        m = int(extras.get("max_changes", 2))
        head = (
            f"Generate {n_requested} neighbor solutions near the listed parents: each new solution changes at "
            f"most {m} knobs of one parent, moving each changed knob to an adjacent allowed value."
        )
        state = _state_rows(space, population, fitness)
    else:
        if "pheromone" not in extras:
            raise ValueError("aco_pheromone mode needs a pheromone matrix")
        head = (
            f"Act as an ant colony: construct {n_requested} solutions, choosing each knob value with preference "
            "for high pheromone while keeping some exploration."
        )
        state = _pheromone_rows(space, extras["pheromone"])
        if population:
            state += "\n\n" + _state_rows(space, population, fitness)
    return InContextPrompt(
        mode=mode,
        task_description=task,
        solution_examples=(_example(space),),
        task_instruction=head + "\n" + grammar,
        state_block=state,
        n_requested=n_requested,
    )
