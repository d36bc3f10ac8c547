"""Domain types shared by every layer: tour instances, itineraries, meal
instances, value assignments, and evaluation metrics.

All internal durations are real minutes. Hours appear only at two edges:
the time-penalty term of the tour objective (score points per hour) and
human-readable display strings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

SCORE_MIN = 0.0
SCORE_MAX = 10.0

DEFAULT_LAMBDA_V = 1.0
DEFAULT_LAMBDA_T = 0.1


@dataclass(frozen=True)
class ProblemInstance:
    """Generic select-items-under-thresholds instance.

    One objective value per item, plus ``constraint_count`` cost maps with
    matching thresholds: maximize the summed objective values of the chosen
    items subject to each summed cost staying at or below its threshold.
    """

    items: list[str]
    objective_values: dict[str, float]
    constraint_values: list[dict[str, float]]
    thresholds: list[float]
    constraint_count: int

    def violations(self) -> list[str]:
        out = []
        if self.constraint_count != len(self.thresholds):
            out.append("thresholds length differs from constraint_count")
        if self.constraint_count != len(self.constraint_values):
            out.append("constraint_values length differs from constraint_count")
        for item in self.items:
            if item not in self.objective_values:
                out.append(f"item {item!r} missing objective value")
            for k, cv in enumerate(self.constraint_values):
                if item not in cv:
                    out.append(f"item {item!r} missing value for constraint {k}")
        return out


@dataclass(frozen=True)
class Spot:
    """A candidate place. Coordinates are optional until geocoded."""

    id: str
    name: str
    address: str = ""
    lat: float | None = None
    lon: float | None = None
    reason: str = ""
    sources: frozenset[str] = frozenset()

    @property
    def geocoded(self) -> bool:
        return self.lat is not None and self.lon is not None


@dataclass(frozen=True)
class OpInstance:
    """Tour-planning instance: spots, depot, travel-time matrix, per-spot
    scores and stay durations, and the total trip-time budget.

    ``travel_time`` is row-major minutes, square over ``spots``, zero
    diagonal; asymmetry is allowed. The depot carries score 0 and duration 0.
    """

    spots: list[Spot]
    depot_index: int
    travel_time: list[list[float]]
    score: list[float]
    duration: list[float]
    budget_minutes: float
    lambda_v: float = DEFAULT_LAMBDA_V
    lambda_t: float = DEFAULT_LAMBDA_T

    @property
    def n(self) -> int:
        return len(self.spots)

    @property
    def depot_id(self) -> str:
        return self.spots[self.depot_index].id

    def index_of(self, spot_id: str) -> int:
        for i, s in enumerate(self.spots):
            if s.id == spot_id:
                return i
        raise KeyError(spot_id)

    def non_depot_indices(self) -> list[int]:
        return [i for i in range(self.n) if i != self.depot_index]


@dataclass(frozen=True)
class Leg:
    from_id: str
    to_id: str
    travel_minutes: float


@dataclass(frozen=True)
class Stay:
    spot_id: str
    minutes: float


@dataclass(frozen=True)
class Itinerary:
    """A solved (or proposed) tour. ``ordered_spot_ids`` starts and ends at
    the depot, or is empty when no spot is visited.

    ``status`` values: ``optimal`` (proven optimum, non-empty), ``empty``
    (stay-at-depot fallback, objective 0), ``time_limit`` (best incumbent,
    optimality not proven), ``baseline`` (externally proposed route,
    feasibility measured rather than enforced).
    """

    ordered_spot_ids: list[str]
    legs: list[Leg]
    stays: list[Stay]
    total_minutes: float
    total_reward: float
    objective_value: float
    status: str = "optimal"

    @property
    def is_empty(self) -> bool:
        return not self.ordered_spot_ids

    def visited_ids(self) -> list[str]:
        """Non-depot spot ids in visit order."""
        if self.is_empty:
            return []
        return self.ordered_spot_ids[1:-1]


@dataclass(frozen=True)
class ValueAssignment:
    """Per-item preference scores in [0, 10] and stay durations in minutes,
    positionally aligned with the item list they were produced from."""

    scores: list[float]
    durations_minutes: list[float]
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class MustHaveIngredient:
    name: str
    quantity: float
    unit: str
    calories: float


@dataclass(frozen=True)
class OptionalIngredient:
    name: str
    priority: float
    calories: float


@dataclass(frozen=True)
class MealInstance:
    recipe_title: str
    must_have: list[MustHaveIngredient]
    optional: list[OptionalIngredient]
    calorie_limit: float

    def violations(self) -> list[str]:
        out = []
        if self.calorie_limit <= 0:
            out.append("calorie limit must be positive")
        for ing in self.must_have:
            if ing.calories < 0:
                out.append(f"negative calories for must-have {ing.name!r}")
        for ing in self.optional:
            if ing.calories < 0:
                out.append(f"negative calories for optional {ing.name!r}")
            if ing.priority < 0:
                out.append(f"negative priority for optional {ing.name!r}")
        for label, names in (
            ("must-have", [i.name for i in self.must_have]),
            ("optional", [i.name for i in self.optional]),
        ):
            if len(names) != len(set(names)):
                out.append(f"duplicate {label} ingredient names")
        return out


@dataclass(frozen=True)
class MealPlan:
    """Result of meal optimization. ``scale_factor`` < 1 only when the
    must-have ingredients alone exceeded the limit, in which case no
    optional ingredient is selected."""

    scale_factor: float
    selected_optionals: frozenset[str]
    total_calories: float
    total_priority: float


@dataclass(frozen=True)
class EvalMetrics:
    time_deviation_hours: float
    success: bool
    total_reward: float
    poi_count: int


class InstanceError(ValueError):
    """Raised when an operation receives an instance violating its
    preconditions."""


def validate_instance(instance: OpInstance) -> list[str]:
    """Check every tour-instance invariant; returns violation messages
    (empty list means the instance is well formed)."""
    out: list[str] = []
    n = instance.n
    if n == 0:
        out.append("instance has no spots")
        return out
    if not 0 <= instance.depot_index < n:
        out.append(f"depot index {instance.depot_index} out of range")
        return out
    if len(instance.travel_time) != n:
        out.append("travel time matrix row count differs from spot count")
    for i, row in enumerate(instance.travel_time):
        if len(row) != n:
            out.append(f"travel time matrix row {i} has wrong length")
            continue
        for j, t in enumerate(row):
            if i == j and t != 0:
                out.append(f"nonzero diagonal travel time at ({i},{i})")
            if t < 0:
                out.append(f"negative travel time at ({i},{j})")
    if len(instance.score) != n:
        out.append("score list length differs from spot count")
    if len(instance.duration) != n:
        out.append("duration list length differs from spot count")
    for i, s in enumerate(instance.score[:n]):
        if not SCORE_MIN <= s <= SCORE_MAX:
            out.append(f"score out of [0,10] for spot {instance.spots[i].id!r}: {s}")
    for i, d in enumerate(instance.duration[:n]):
        if d < 0:
            out.append(f"negative duration for spot {instance.spots[i].id!r}")
    if instance.budget_minutes <= 0:
        out.append("budget must be positive")
    if len(instance.score) == n and instance.score[instance.depot_index] != 0:
        out.append("depot score must be 0")
    if len(instance.duration) == n and instance.duration[instance.depot_index] != 0:
        out.append("depot duration must be 0")
    ids = [s.id for s in instance.spots]
    if len(ids) != len(set(ids)):
        out.append("duplicate spot ids")
    for s in instance.spots:
        if s.lat is not None and not -90 <= s.lat <= 90:
            out.append(f"latitude out of range for spot {s.id!r}")
        if s.lon is not None and not -180 <= s.lon <= 180:
            out.append(f"longitude out of range for spot {s.id!r}")
    return out


def reduce_instance(instance: OpInstance) -> OpInstance:
    """Drop spots that can never help: non-depot spots with score <= 0, and
    spots whose depot round trip plus stay already exceeds the budget.

    Optimum-preserving when the matrix is metric-consistent (a tour through
    a spot is never faster than skipping it); offline haversine matrices
    satisfy this. Idempotent.
    """
    d = instance.depot_index
    tt = instance.travel_time
    keep: list[int] = []
    for i in range(instance.n):
        if i == d:
            keep.append(i)
            continue
        if instance.score[i] <= 0:
            continue
        round_trip = tt[d][i] + instance.duration[i] + tt[i][d]
        if round_trip > instance.budget_minutes:
            continue
        keep.append(i)
    if len(keep) == instance.n:
        return instance
    return replace(
        instance,
        spots=[instance.spots[i] for i in keep],
        depot_index=keep.index(d),
        travel_time=[[tt[i][j] for j in keep] for i in keep],
        score=[instance.score[i] for i in keep],
        duration=[instance.duration[i] for i in keep],
    )


def empty_itinerary() -> Itinerary:
    return Itinerary(
        ordered_spot_ids=[],
        legs=[],
        stays=[],
        total_minutes=0.0,
        total_reward=0.0,
        objective_value=0.0,
        status="empty",
    )


def build_itinerary(
    instance: OpInstance, visit_order: list[int], status: str = "optimal"
) -> Itinerary:
    """Materialize an itinerary from non-depot spot indices in visit order.

    This is the single accumulation path for totals: travel then stay per
    step, closing leg last. Solvers accumulate in the same order, so
    recomputation reproduces their totals bit for bit.
    """
    if not visit_order:
        return empty_itinerary()
    d = instance.depot_index
    tt = instance.travel_time
    route = [d] + list(visit_order) + [d]
    legs: list[Leg] = []
    stays: list[Stay] = []
    total = 0.0
    reward = 0.0
    for prev, cur in zip(route, route[1:]):
        legs.append(
            Leg(instance.spots[prev].id, instance.spots[cur].id, tt[prev][cur])
        )
        total += tt[prev][cur]
        if cur != d:
            total += instance.duration[cur]
            reward += instance.score[cur]
            stays.append(Stay(instance.spots[cur].id, instance.duration[cur]))
    objective = tour_objective(instance, reward, total)
    return Itinerary(
        ordered_spot_ids=[instance.spots[i].id for i in route],
        legs=legs,
        stays=stays,
        total_minutes=total,
        total_reward=reward,
        objective_value=objective,
        status=status,
    )


def tour_objective(instance: OpInstance, reward: float, total_minutes: float) -> float:
    """Weighted objective: reward term minus the time penalty, with time
    expressed in hours so the penalty acts as a tie-breaker among
    near-equal-reward tours rather than overriding scores."""
    return instance.lambda_v * reward - instance.lambda_t * (total_minutes / 60.0)


def evaluate_itinerary(instance: OpInstance, itinerary: Itinerary) -> EvalMetrics:
    """Solver-agnostic metrics: absolute budget gap in hours, budget
    compliance, collected reward, and visited-spot count."""
    total = itinerary.total_minutes
    return EvalMetrics(
        time_deviation_hours=abs(instance.budget_minutes - total) / 60.0,
        success=total <= instance.budget_minutes,
        total_reward=itinerary.total_reward,
        poi_count=len(itinerary.visited_ids()),
    )


def clamp_score(value: float) -> tuple[float, bool]:
    """Clamp to [0, 10]; second element reports whether clamping happened."""
    if value < SCORE_MIN:
        return SCORE_MIN, True
    if value > SCORE_MAX:
        return SCORE_MAX, True
    return value, False


def format_hours_minutes(minutes: float) -> str:
    """Display form like "7 hours 59 minutes", rounding half-up to whole
    minutes at presentation only."""
    whole = int(math.floor(minutes + 0.5))
    hours, mins = divmod(whole, 60)
    if hours == 0:
        return f"{mins} minute{'s' if mins != 1 else ''}"
    head = f"{hours} hour{'s' if hours != 1 else ''}"
    if mins == 0:
        return head
    return f"{head} {mins} minute{'s' if mins != 1 else ''}"
