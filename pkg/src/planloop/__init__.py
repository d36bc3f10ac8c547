"""Preference-driven planning: natural-language preferences become exact
combinatorial instances (tour selection, meal knapsack), solved with hard
constraint guarantees inside an interactive refine-and-reoptimize loop."""

from .model import (
    EvalMetrics,
    Itinerary,
    MealInstance,
    MealPlan,
    OpInstance,
    ProblemInstance,
    Spot,
    ValueAssignment,
    reduce_instance,
    validate_instance,
)
from .knapsack import KnapsackConfig, plan_meal
from .opsolver import SolverConfig, SubtourCut, find_subtours, solve

__version__ = "0.1.0"

__all__ = [
    "EvalMetrics",
    "Itinerary",
    "KnapsackConfig",
    "MealInstance",
    "MealPlan",
    "OpInstance",
    "ProblemInstance",
    "SolverConfig",
    "Spot",
    "SubtourCut",
    "ValueAssignment",
    "find_subtours",
    "plan_meal",
    "reduce_instance",
    "solve",
    "validate_instance",
]
