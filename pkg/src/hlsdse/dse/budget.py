"""Exploration budget as a function of design-space size."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

DEFAULT_WALL_CLOCK_S = 3600.0

# (upper bound on S inclusive, sampled fraction, population); checked in order
_BRANCHES = (
    (500, Fraction("0.5"), 10),
    (10**4, Fraction("0.3"), 30),
    (10**5, Fraction("0.05"), 30),
    (10**6, Fraction("0.005"), 30),
    # 10^6 < S < 10^7 is not covered by the published schedule
    (10**7 - 1, Fraction("0.0005"), 30),
)
_TOP = (Fraction("0.00005"), 30)


@dataclass(frozen=True)
class BudgetSchedule:
    n_se: int
    n_pop: int
    wall_clock_cap: float = DEFAULT_WALL_CLOCK_S

    def __post_init__(self):
        if not (self.n_se >= self.n_pop >= 1):
            raise ValueError(f"need n_se >= n_pop >= 1, got ({self.n_se}, {self.n_pop})")
        if self.wall_clock_cap <= 0:
            raise ValueError("wall-clock cap must be positive")

    def to_dict(self) -> dict:
        return {"n_se": self.n_se, "n_pop": self.n_pop, "wall_clock_cap": self.wall_clock_cap if math.isfinite(self.wall_clock_cap) else None}


def budget_for(space_size: int, wall_clock_cap: float = DEFAULT_WALL_CLOCK_S) -> BudgetSchedule:
    if space_size < 1:
        raise ValueError("space size must be >= 1")
    frac, pop = _TOP
    for bound, f, p in _BRANCHES:
        if space_size <= bound:
            frac, pop = f, p
            break
    n_se = max(1, math.floor(frac * space_size))
    # tiny spaces: the population cannot exceed the number of explorations
    return BudgetSchedule(n_se=n_se, n_pop=min(pop, n_se), wall_clock_cap=wall_clock_cap)
