"""Evaluators map a configuration to a QoR vector."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Callable

import numpy as np

from ..cdfg import CdfgGraph, Configuration, DesignSpace, Knob, QorVector, apply_configuration, enumerate_space


class EvaluationError(RuntimeError):
    pass


class Evaluator:
    """Base interface. Implementations must be safe to call from several threads."""

    #: whether every configuration of the space yields a result
    total = False

    def evaluate(self, space: DesignSpace, config: Configuration) -> QorVector:
        raise NotImplementedError


class SyntheticEvaluator(Evaluator):
    """Analytic stand-in for an HLS tool.

    Every knob is read as a parallelism level ``p = 2**(3 * idx / (|domain| - 1))``
    (1 to 8). Latency falls as work is spread over parallel units; each resource
    class grows with its own weighted mix of the levels. QoR values are
    utilization fractions, so pair this evaluator with
    ``DeviceCapacities.unit()``.
    """

    total = True

    def __init__(self, space: DesignSpace, seed: int = 0, fail: Callable[[Configuration], bool] | None = None):
        rng = np.random.default_rng(seed)
        k = len(space.knobs)
        self.work = rng.uniform(200.0, 1000.0, size=k)
        self.mix = rng.uniform(0.2, 1.0, size=(4, k))  # lut, ff, dsp, bram
        self.base = np.array([0.02, 0.015, 0.0, 0.01])
        self.scale = np.array([0.004, 0.003, 0.006, 0.002])
        self.fail = fail

    @staticmethod
    def levels(space: DesignSpace, config: Configuration) -> np.ndarray:
        out = []
        for knob, i in zip(space.knobs, space.indices(config)):
            span = len(knob.domain) - 1
            out.append(2.0 ** (3.0 * i / span) if span else 1.0)
        return np.array(out)

    def evaluate(self, space: DesignSpace, config: Configuration) -> QorVector:
        space.validate(config)
        if self.fail is not None and self.fail(config):
            raise EvaluationError(f"synthetic failure for {config.values}")
        p = self.levels(space, config)
        latency = 100.0 + float(np.sum(self.work / p)) + 20.0 * float(np.max(p))
        res = self.base + self.scale * (self.mix @ (p**1.5))
        lut, ff, dsp, bram = (float(v) for v in res)
        return QorVector(latency=latency, lut=lut, ff=ff, dsp=dsp, bram=bram)


def synthetic_space(n_knobs: int = 6, levels: int = 4) -> DesignSpace:
    domain = tuple(2**i for i in range(levels))
    return DesignSpace(tuple(Knob(f"K{i}", domain) for i in range(n_knobs)))


def _coerce(knob: Knob, text: str):
    for v in knob.domain:
        if str(v) == text:
            return v
    try:
        num = float(text)
    except ValueError:
        raise EvaluationError(f"value {text!r} not in domain of {knob.name}") from None
    for v in knob.domain:
        if isinstance(v, (int, float)) and not isinstance(v, bool) and float(v) == num:
            return v
    raise EvaluationError(f"value {text!r} not in domain of {knob.name}")


class TableEvaluator(Evaluator):
    """Look-up of precomputed QoR in a CSV with one column per knob plus QoR columns."""

    def __init__(self, space: DesignSpace, table: dict[tuple, QorVector]):
        self.table = table
        self.total = len(table) >= space.size and all(c.values in table for c in enumerate_space(space))

    @classmethod
    def from_csv(cls, space: DesignSpace, path: str | Path) -> "TableEvaluator":
        table: dict[tuple, QorVector] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(line for line in fh if not line.startswith("#"))
            for row in reader:
                key = tuple(_coerce(k, row[k.name]) for k in space.knobs)
                qor = {f: float(row[f]) for f in ("latency", "lut", "ff", "dsp", "bram", "cp", "power") if row.get(f) not in (None, "")}
                table[key] = QorVector(**qor)
        return cls(space, table)

    def evaluate(self, space: DesignSpace, config: Configuration) -> QorVector:
        try:
            return self.table[tuple(config.values)]
        except KeyError:
            raise EvaluationError(f"configuration {config.values} not in table") from None


class SurrogateEvaluator(Evaluator):
    """Template the configuration into a base graph and run the trained model."""

    total = True

    def __init__(self, model, base_graph: CdfgGraph, feature_index: int = 0, mode: str = "soft", seed: int = 0):
        self.model = model
        self.base_graph = base_graph
        self.feature_index = feature_index
        self.mode = mode
        self.seed = seed

    def evaluate(self, space: DesignSpace, config: Configuration) -> QorVector:
        graph = apply_configuration(self.base_graph, space, config, self.feature_index)
        qor = self.model.predict([graph], mode=self.mode, seed=self.seed)[0]
        values = qor.to_dict()
        # negative resource predictions are clipped; latency must stay positive
        for k in ("lut", "ff", "dsp", "bram"):
            if k in values:
                values[k] = max(values[k], 0.0)
        if "latency" in values:
            values["latency"] = max(values["latency"], 1.0)
        if not all(math.isfinite(v) for v in values.values()):
            raise EvaluationError("surrogate produced a non-finite prediction")
        return QorVector(**values)
