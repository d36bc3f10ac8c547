"""Meal-plan optimization: uniform must-have scaling to the calorie limit,
then an exact 0/1 knapsack over the optional ingredients maximizing total
priority within the remaining calories."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import MealInstance, MealPlan, OptionalIngredient

BRUTE_FORCE_MAX_OPTIONALS = 20


class EmptyInstance(ValueError):
    """Meal instance with no ingredients at all."""


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class KnapsackConfig:
    calorie_granularity: int = 1
    method: str = "dp"

    def __post_init__(self) -> None:
        if self.calorie_granularity < 1:
            raise ValueError("calorie granularity must be >= 1")


def plan_meal(instance: MealInstance, config: KnapsackConfig | None = None) -> MealPlan:
    """Scale-or-select: when the must-have calories alone exceed the limit,
    all must-have quantities shrink by limit/must-have and nothing optional
    is added; otherwise optionals fill the remaining calories by exact
    priority maximization."""
    config = config or KnapsackConfig()
    if not instance.must_have and not instance.optional:
        raise EmptyInstance("meal instance has no ingredients")
    problems = instance.violations()
    if problems:
        raise ValueError("; ".join(problems))
    must_total = sum(i.calories for i in instance.must_have)
    limit = instance.calorie_limit
    if must_total > limit:
        scale = limit / must_total
        return MealPlan(
            scale_factor=scale,
            selected_optionals=frozenset(),
            total_calories=min(must_total * scale, limit),
            total_priority=0.0,
        )
    remaining = limit - must_total
    if config.method == "brute_force":
        chosen = knapsack_brute_force(instance.optional, remaining)
    else:
        chosen = knapsack_dp(instance.optional, remaining, config.calorie_granularity)
    by_name = {i.name: i for i in instance.optional}
    total_cal = must_total
    total_pri = 0.0
    for name in sorted(chosen):
        total_cal += by_name[name].calories
        total_pri += by_name[name].priority
    return MealPlan(
        scale_factor=1.0,
        selected_optionals=frozenset(chosen),
        total_calories=total_cal,
        total_priority=total_pri,
    )


def knapsack_brute_force(
    optionals: list[OptionalIngredient], capacity: float
) -> frozenset[str]:
    """Exhaustive subset enumeration; the test oracle. Ties resolve to
    fewer items, then the lexicographically smallest name set."""
    if len(optionals) > BRUTE_FORCE_MAX_OPTIONALS:
        raise InstanceTooLarge(
            f"brute force admits at most {BRUTE_FORCE_MAX_OPTIONALS} optionals"
        )
    items = sorted(optionals, key=lambda i: i.name)
    best_key: tuple[float, int, tuple[str, ...]] | None = None
    best: tuple[str, ...] = ()
    for mask in range(1 << len(items)):
        cal = 0.0
        pri = 0.0
        names: list[str] = []
        for k, item in enumerate(items):
            if mask & (1 << k):
                cal += item.calories
                pri += item.priority
                names.append(item.name)
        if cal > capacity:
            continue
        key = (-pri, len(names), tuple(names))
        if best_key is None or key < best_key:
            best_key = key
            best = tuple(names)
    return frozenset(best)


def knapsack_dp(
    optionals: list[OptionalIngredient], capacity: float, granularity: int = 1
) -> frozenset[str]:
    """Exact DP over calorie capacity. Item calories round up to the
    granularity and the capacity rounds down, so the real calorie limit is
    never breached. Cells carry (priority, count, names) so ties resolve
    exactly like the brute-force oracle."""
    if capacity < 0:
        return frozenset()
    items = sorted(optionals, key=lambda i: i.name)
    cap = int(math.floor(capacity / granularity))
    empty = (0.0, 0, ())
    dp: list[tuple[float, int, tuple[str, ...]]] = [empty] * (cap + 1)
    for item in items:
        w = int(math.ceil(item.calories / granularity))
        if w > cap:
            continue
        lo = max(w, 0)
        for c in range(cap, lo - 1, -1):
            base = dp[c - w]
            cand_pri = base[0] + item.priority
            cur = dp[c]
            if cand_pri > cur[0]:
                dp[c] = (cand_pri, base[1] + 1, base[2] + (item.name,))
            elif cand_pri == cur[0]:
                cand_cnt = base[1] + 1
                if cand_cnt < cur[1]:
                    dp[c] = (cand_pri, cand_cnt, base[2] + (item.name,))
                elif cand_cnt == cur[1]:
                    cand_names = base[2] + (item.name,)
                    if cand_names < cur[2]:
                        dp[c] = (cand_pri, cand_cnt, cand_names)
    return frozenset(dp[cap][2])
