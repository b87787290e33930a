"""Extraction and repair of configurations from model replies."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..cdfg import Configuration, DesignSpace, Knob

_BLOCK = re.compile(r"```[ \t]*solutions[ \t]*\n(.*?)(?:```|\Z)", re.S | re.I)
_LIST = re.compile(r"\[([^\[\]]*)\]")


class ParseFailure(ValueError):
    """No usable configuration in a reply."""


@dataclass
class Diagnostics:
    valid: int = 0
    repaired: int = 0
    dropped: int = 0
    padded: int = 0
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, int]:
        return {"valid": self.valid, "repaired": self.repaired, "dropped": self.dropped, "padded": self.padded}


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _tokens(body: str) -> list[Any]:
    try:
        return json.loads("[" + body + "]")
    except json.JSONDecodeError:
        pass
    out = []
    for raw in body.split(","):
        tok = raw.strip().strip("'\"")
        try:
            out.append(json.loads(tok))
        except json.JSONDecodeError:
            out.append(tok)
    return out


def snap(knob: Knob, value: Any) -> tuple[Any, bool] | None:
    """Map ``value`` into the domain; returns (value, was_repaired) or None when hopeless.

    Numbers snap to the nearest numeric domain value, ties going to the smaller one.
    """
    for v in knob.domain:
        same_kind = (_is_number(v) and _is_number(value)) or type(v) is type(value)
        if same_kind and v == value:
            return v, False
    if isinstance(value, bool):
        return None
    if isinstance(value, str):
        for v in knob.domain:
            if str(v) == value.strip():
                return v, False
        for v in knob.domain:
            if str(v).lower() == value.strip().lower():
                return v, True
        try:
            value = float(value)
        except ValueError:
            return None
    if not _is_number(value) or value != value:
        return None
    numeric = [v for v in knob.domain if _is_number(v)]
    if not numeric:
        return None
    best = min(numeric, key=lambda v: (abs(v - value), v))
    return best, True


def extract_rows(text: str) -> list[str]:
    m = _BLOCK.search(text)
    region = m.group(1) if m else text
    return _LIST.findall(region)


def parse_response(
    text: str, space: DesignSpace, n_requested: int, rng: np.random.Generator | None = None
) -> tuple[list[Configuration], Diagnostics]:
    """Configurations in reply order, repaired and padded to exactly ``n_requested``.

    Raises :class:`ParseFailure` when nothing usable is found; padding then is the
    caller's decision.
    """
    diag = Diagnostics()
    configs: list[Configuration] = []
    k = len(space.knobs)
    for body in extract_rows(text or ""):
        if len(configs) >= n_requested:
            diag.dropped += 1
            diag.notes.append("surplus entry")
            continue
        vals = _tokens(body)
        if len(vals) != k:
            diag.dropped += 1
            diag.notes.append(f"entry with {len(vals)} values")
            continue
        fixed, any_fix = [], False
        for knob, v in zip(space.knobs, vals):
            res = snap(knob, v)
            if res is None:
                break
            fixed.append(res[0])
            any_fix |= res[1]
        else:
            configs.append(Configuration(tuple(fixed)))
            if any_fix:
                diag.repaired += 1
            else:
                diag.valid += 1
            continue
        diag.dropped += 1
        diag.notes.append("unrepairable value")
    if not configs:
        raise ParseFailure("reply contains no parseable configuration")
    if len(configs) < n_requested:
        if rng is None:
            rng = np.random.default_rng(0)
        while len(configs) < n_requested:
            configs.append(space.random_config(rng))
            diag.padded += 1
    return configs, diag
