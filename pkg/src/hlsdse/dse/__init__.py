"""Multi-objective design-space exploration."""

from .algorithms import aco_run, exhaustive_run, nsga2_run, sa_run
from .budget import BudgetSchedule, budget_for
from .evaluators import Evaluator, SurrogateEvaluator, SyntheticEvaluator, TableEvaluator, synthetic_space
from .explorer import Explorer, RunResult
from .pareto import DeviceCapacities, FrontEntry, Objectives, adrs, dominates, pareto_filter

__all__ = [
    "BudgetSchedule",
    "DeviceCapacities",
    "Evaluator",
    "Explorer",
    "FrontEntry",
    "Objectives",
    "RunResult",
    "SurrogateEvaluator",
    "SyntheticEvaluator",
    "TableEvaluator",
    "aco_run",
    "adrs",
    "budget_for",
    "dominates",
    "exhaustive_run",
    "nsga2_run",
    "pareto_filter",
    "sa_run",
    "synthetic_space",
]
