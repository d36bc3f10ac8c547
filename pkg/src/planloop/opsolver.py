"""Exact solvers for depot-rooted tour selection under a trip-time budget.

Three interchangeable methods:

* ``brute_force`` — enumerates every spot subset and visiting order with
  sound budget pruning; the test oracle.
* ``subset_dp`` — Held-Karp table of minimal path time per (subset, last
  spot); exact and fast up to ~20 spots.
* ``lazy_dfj`` — branch and bound over spot subsets whose per-subset
  relaxation is a minimum-travel cycle cover (degree constraints only);
  whenever the relaxation optimum contains cycles disconnected from the
  depot, the violated subset cuts are added and the search repeats until
  the optimum is a single depot-rooted tour.

All three return itineraries rebuilt through
:func:`planloop.model.build_itinerary`, so reported totals share one
accumulation path.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import (
    InstanceError,
    Itinerary,
    OpInstance,
    build_itinerary,
    empty_itinerary,
    tour_objective,
    validate_instance,
)

METHOD_BRUTE_FORCE = "brute_force"
METHOD_SUBSET_DP = "subset_dp"
METHOD_LAZY_DFJ = "lazy_dfj"
METHODS = (METHOD_SUBSET_DP, METHOD_LAZY_DFJ, METHOD_BRUTE_FORCE)

BRUTE_FORCE_MAX_SPOTS = 9
SUBSET_DP_MAX_SPOTS = 20


class InstanceTooLarge(ValueError):
    """Instance exceeds the configured method's spot cap."""


@dataclass(frozen=True)
class SolverConfig:
    method: str = METHOD_SUBSET_DP
    max_spots: int | None = None
    time_limit_ms: int | None = None

    def cap(self) -> int | None:
        if self.max_spots is not None:
            return self.max_spots
        if self.method == METHOD_BRUTE_FORCE:
            return BRUTE_FORCE_MAX_SPOTS
        if self.method == METHOD_SUBSET_DP:
            return SUBSET_DP_MAX_SPOTS
        return None


@dataclass(frozen=True)
class SubtourCut:
    """A set of spots that must not form a closed loop on their own; the
    depot is never part of the set."""

    spot_subset: frozenset[str]


@dataclass
class LazyDfjRun:
    """Diagnostics from one lazy-cut solve."""

    itinerary: Itinerary
    cuts: list[SubtourCut] = field(default_factory=list)
    relaxation_rounds: int = 0
    optimal: bool = True


def solve(instance: OpInstance, config: SolverConfig | None = None) -> Itinerary:
    """Dispatch to the configured method after validating the instance."""
    config = config or SolverConfig()
    problems = validate_instance(instance)
    if problems:
        raise InstanceError("; ".join(problems))
    n_free = len(instance.non_depot_indices())
    cap = config.cap()
    if cap is not None and n_free > cap:
        raise InstanceTooLarge(
            f"{config.method} admits at most {cap} non-depot spots, got {n_free}"
        )
    if config.method == METHOD_BRUTE_FORCE:
        return brute_force_oracle(instance, max_spots=cap or BRUTE_FORCE_MAX_SPOTS)
    if config.method == METHOD_SUBSET_DP:
        return solve_subset_dp(instance)
    if config.method == METHOD_LAZY_DFJ:
        return solve_lazy_dfj(instance, time_limit_ms=config.time_limit_ms)
    raise ValueError(f"unknown solver method {config.method!r}")


# ---------------------------------------------------------------------------
# Shared candidate bookkeeping
# ---------------------------------------------------------------------------


class _Best:
    """Running best tour under the deterministic tie order: higher
    objective, then fewer spots, then lexicographically smallest id
    sequence. Starts at the stay-at-depot fallback (objective 0)."""

    def __init__(self, instance: OpInstance):
        self._instance = instance
        self.objective = 0.0
        self.count = 0
        self.ids: tuple[str, ...] = ()
        self.order: tuple[int, ...] = ()

    def offer(self, objective: float, order: Sequence[int]) -> None:
        ids = tuple(self._instance.spots[i].id for i in order)
        if (objective, -len(order)) < (self.objective, -self.count):
            return
        if objective == self.objective and len(order) == self.count and ids >= self.ids:
            return
        self.objective = objective
        self.count = len(order)
        self.ids = ids
        self.order = tuple(order)

    def to_itinerary(self, status_nonempty: str = "optimal") -> Itinerary:
        if not self.order:
            return empty_itinerary()
        return build_itinerary(self._instance, list(self.order), status=status_nonempty)


# ---------------------------------------------------------------------------
# Brute force oracle
# ---------------------------------------------------------------------------


def brute_force_oracle(
    instance: OpInstance, max_spots: int = BRUTE_FORCE_MAX_SPOTS
) -> Itinerary:
    """Exhaustive subset x permutation search. Prunes a partial path only
    once its own time already exceeds the budget, which cannot exclude any
    feasible completion."""
    free = instance.non_depot_indices()
    if len(free) > max_spots:
        raise InstanceTooLarge(
            f"brute force admits at most {max_spots} non-depot spots, got {len(free)}"
        )
    d = instance.depot_index
    tt = instance.travel_time
    dur = instance.duration
    score = instance.score
    budget = instance.budget_minutes
    best = _Best(instance)
    order: list[int] = []
    used = [False] * instance.n

    def descend(last: int, partial_time: float, partial_reward: float) -> None:
        for nxt in free:
            if used[nxt]:
                continue
            t = partial_time + tt[last][nxt]
            t += dur[nxt]
            if t > budget:
                continue
            r = partial_reward + score[nxt]
            order.append(nxt)
            used[nxt] = True
            close = t + tt[nxt][d]
            if close <= budget:
                best.offer(tour_objective(instance, r, close), order)
            descend(nxt, t, r)
            used[nxt] = False
            order.pop()

    descend(d, 0.0, 0.0)
    return best.to_itinerary()


# ---------------------------------------------------------------------------
# Held-Karp subset dynamic program
# ---------------------------------------------------------------------------


def solve_subset_dp(instance: OpInstance) -> Itinerary:
    free = instance.non_depot_indices()
    m = len(free)
    if m > SUBSET_DP_MAX_SPOTS:
        raise InstanceTooLarge(
            f"subset dp admits at most {SUBSET_DP_MAX_SPOTS} non-depot spots, got {m}"
        )
    if m == 0:
        return empty_itinerary()
    d = instance.depot_index
    tt = instance.travel_time
    dur = instance.duration
    budget = instance.budget_minutes
    INF = float("inf")

    # dp[mask][k]: minimal time to leave the depot, visit exactly the spots
    # in mask, and currently stand at free[k] (stay included, return leg not).
    size = 1 << m
    dp = [None] * size
    parent: list[list[int] | None] = [None] * size
    for k in range(m):
        t = tt[d][free[k]]
        t += dur[free[k]]
        if t > budget:
            continue
        mask = 1 << k
        if dp[mask] is None:
            dp[mask] = [INF] * m
            parent[mask] = [-1] * m
        dp[mask][k] = t
        parent[mask][k] = -1

    reward_of = [0.0] * size
    for mask in range(1, size):
        low = mask & (-mask)
        reward_of[mask] = reward_of[mask ^ low] + instance.score[free[low.bit_length() - 1]]

    best = _Best(instance)
    ties: list[tuple[int, int]] = []
    best_obj, best_cnt = 0.0, 0

    for mask in range(1, size):
        row = dp[mask]
        if row is None:
            continue
        cnt = bin(mask).count("1")
        for k in range(m):
            t = row[k]
            if t == INF:
                continue
            # Close the tour from free[k].
            close = t + tt[free[k]][d]
            if close <= budget:
                obj = tour_objective(instance, reward_of[mask], close)
                if obj > best_obj or (obj == best_obj and cnt < best_cnt):
                    best_obj, best_cnt = obj, cnt
                    ties = [(mask, k)]
                elif obj == best_obj and cnt == best_cnt:
                    ties.append((mask, k))
            # Extend to every spot not yet in mask.
            for j in range(m):
                if mask & (1 << j):
                    continue
                t2 = t + tt[free[k]][free[j]]
                t2 += dur[free[j]]
                if t2 > budget:
                    continue
                nmask = mask | (1 << j)
                if dp[nmask] is None:
                    dp[nmask] = [INF] * m
                    parent[nmask] = [-1] * m
                if t2 < dp[nmask][j]:
                    dp[nmask][j] = t2
                    parent[nmask][j] = k

    for mask, k in ties:
        order: list[int] = []
        cur, cur_mask = k, mask
        while cur != -1:
            order.append(free[cur])
            prev = parent[cur_mask][cur]
            cur_mask ^= 1 << cur
            cur = prev
        order.reverse()
        # Re-derive the objective along the visit path so ties resolve on
        # the same floats the oracle sees.
        best.offer(_path_objective(instance, order), order)
    return best.to_itinerary()


def _path_objective(instance: OpInstance, order: Sequence[int]) -> float:
    d = instance.depot_index
    tt = instance.travel_time
    t = 0.0
    r = 0.0
    prev = d
    for i in order:
        t += tt[prev][i]
        t += instance.duration[i]
        r += instance.score[i]
        prev = i
    t += tt[prev][d]
    return tour_objective(instance, r, t)


# ---------------------------------------------------------------------------
# Subtour detection
# ---------------------------------------------------------------------------


def find_subtours(
    selected_arcs: Iterable[tuple[str, str]], depot_id: str
) -> list[SubtourCut]:
    """Connected components of the selected-arc graph that miss the depot.

    Under the degree constraints every component is a simple cycle, so each
    depot-free component is exactly one subtour to cut. Empty result means
    the arcs form a single depot-rooted tour.
    """
    arcs = list(selected_arcs)
    nodes = {a for arc in arcs for a in arc}
    parent: dict[str, str] = {v: v for v in nodes}

    def find(v: str) -> str:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for u, v in arcs:
        parent[find(u)] = find(v)

    components: dict[str, set[str]] = {}
    for v in nodes:
        components.setdefault(find(v), set()).add(v)
    cuts = [
        SubtourCut(frozenset(comp))
        for comp in components.values()
        if depot_id not in comp
    ]
    cuts.sort(key=lambda c: sorted(c.spot_subset))
    return cuts


# ---------------------------------------------------------------------------
# Lazy subset-cut solver
# ---------------------------------------------------------------------------


def solve_lazy_dfj(
    instance: OpInstance, time_limit_ms: int | None = None
) -> Itinerary:
    return lazy_dfj_details(instance, time_limit_ms=time_limit_ms).itinerary


def lazy_dfj_details(
    instance: OpInstance, time_limit_ms: int | None = None
) -> LazyDfjRun:
    """Cut loop: solve the degree-and-budget relaxation exactly, add a cut
    per depot-free cycle in its optimum, repeat until the optimum is a
    single tour. Each pool cut is new, so the loop terminates."""
    deadline = (
        time.monotonic() + time_limit_ms / 1000.0 if time_limit_ms is not None else None
    )
    run = LazyDfjRun(itinerary=empty_itinerary())
    cut_pool: list[frozenset[int]] = []
    tour_best = _Best(instance)
    depot_id = instance.depot_id

    while True:
        run.relaxation_rounds += 1
        try:
            relaxed = _solve_relaxation(instance, cut_pool, tour_best, deadline)
        except _Deadline:
            run.itinerary = tour_best.to_itinerary(status_nonempty="time_limit")
            run.optimal = False
            return run
        if relaxed is None:
            run.itinerary = empty_itinerary()
            return run
        arcs = [
            (instance.spots[i].id, instance.spots[j].id) for i, j in relaxed
        ]
        subtours = find_subtours(arcs, depot_id)
        if not subtours:
            order = _walk_tour(instance, relaxed)
            run.itinerary = build_itinerary(instance, order)
            return run
        for cut in subtours:
            members = frozenset(instance.index_of(s) for s in cut.spot_subset)
            if members not in cut_pool:
                cut_pool.append(members)
                run.cuts.append(cut)


class _Deadline(Exception):
    pass


def _solve_relaxation(
    instance: OpInstance,
    cut_pool: list[frozenset[int]],
    tour_best: _Best,
    deadline: float | None,
) -> list[tuple[int, int]] | None:
    """Branch and bound over spot subsets. For a complete subset the best
    arc selection is the minimum-travel cycle cover honoring the cut pool;
    pruning uses the admissible bound reward(included + undecided) minus
    the stay-time penalty already committed.

    Returns the arc set of the relaxation optimum, or None when staying at
    the depot is at least as good as every candidate.
    """
    d = instance.depot_index
    # High scores first tightens the reward bound early.
    free = sorted(
        instance.non_depot_indices(), key=lambda i: (-instance.score[i], i)
    )
    suffix_reward = [0.0] * (len(free) + 1)
    for i in range(len(free) - 1, -1, -1):
        suffix_reward[i] = suffix_reward[i + 1] + instance.score[free[i]]

    best_obj = 0.0
    best_cnt = 0
    best_ids: tuple[str, ...] = ()
    best_arcs: list[tuple[int, int]] | None = None

    def leaf(included: list[int]) -> None:
        nonlocal best_obj, best_cnt, best_ids, best_arcs
        if not included:
            return
        if deadline is not None and time.monotonic() > deadline:
            raise _Deadline
        stays = 0.0
        for i in included:
            stays += instance.duration[i]
        cover = _min_cycle_cover(instance, [d] + included, frozenset(), cut_pool)
        if cover is None:
            return
        travel, arcs = cover
        total = stays + travel
        if total > instance.budget_minutes:
            return
        tour = _arcs_single_tour(instance, arcs)
        if tour is not None:
            # Canonical accumulation decides feasibility and objective of
            # anything that may be returned as an itinerary.
            if _tour_time(instance, tour) > instance.budget_minutes:
                return
            obj = _path_objective(instance, tour)
            tour_best.offer(obj, tour)
        else:
            reward = 0.0
            for i in included:
                reward += instance.score[i]
            obj = tour_objective(instance, reward, total)
        ids = tuple(sorted(instance.spots[i].id for i in included))
        if obj > best_obj or (
            obj == best_obj
            and (len(included), ids) < (best_cnt, best_ids)
        ):
            best_obj, best_cnt, best_ids = obj, len(included), ids
            best_arcs = arcs

    def branch(pos: int, included: list[int], stay_time: float) -> None:
        if deadline is not None and time.monotonic() > deadline:
            raise _Deadline
        bound_reward = suffix_reward[pos]
        for i in included:
            bound_reward += instance.score[i]
        bound = instance.lambda_v * bound_reward - instance.lambda_t * (
            stay_time / 60.0
        )
        if bound <= best_obj:
            return
        if pos == len(free):
            leaf(included)
            return
        nxt = free[pos]
        included.append(nxt)
        branch(pos + 1, included, stay_time + instance.duration[nxt])
        included.pop()
        branch(pos + 1, included, stay_time)

    branch(0, [], 0.0)
    return best_arcs


def _min_cycle_cover(
    instance: OpInstance,
    nodes: list[int],
    forbidden: frozenset[tuple[int, int]],
    cut_pool: list[frozenset[int]],
) -> tuple[float, list[tuple[int, int]]] | None:
    """Minimum-travel assignment giving every node exactly one outgoing and
    one incoming arc. Pool cuts are enforced by branching on the arcs of a
    violated cut (at least one of them must be dropped)."""
    k = len(nodes)
    cost = np.full((k, k), np.inf)
    tt = instance.travel_time
    for p, i in enumerate(nodes):
        for q, j in enumerate(nodes):
            if p != q and (i, j) not in forbidden:
                cost[p, q] = tt[i][j]
    try:
        rows, cols = linear_sum_assignment(cost)
    except ValueError:
        return None
    travel = float(cost[rows, cols].sum())
    if not np.isfinite(travel):
        return None
    arcs = [(nodes[p], nodes[cols[p]]) for p in range(k)]
    node_set = set(nodes)
    for cut in cut_pool:
        if not cut <= node_set:
            continue
        inside = [(i, j) for i, j in arcs if i in cut and j in cut]
        if len(inside) < len(cut):
            continue
        best: tuple[float, list[tuple[int, int]]] | None = None
        for drop in inside:
            sub = _min_cycle_cover(instance, nodes, forbidden | {drop}, cut_pool)
            if sub is not None and (best is None or sub[0] < best[0]):
                best = sub
        return best
    return travel, arcs


def _arcs_single_tour(
    instance: OpInstance, arcs: list[tuple[int, int]]
) -> list[int] | None:
    """Visit order (non-depot indices) when the arcs form one depot-rooted
    cycle covering all of them, else None."""
    succ = dict(arcs)
    d = instance.depot_index
    order: list[int] = []
    cur = succ.get(d)
    steps = 0
    while cur is not None and cur != d and steps <= len(arcs):
        order.append(cur)
        cur = succ.get(cur)
        steps += 1
    if cur != d:
        return None
    if len(order) + 1 != len(arcs):
        return None
    return order


def _walk_tour(instance: OpInstance, arcs: list[tuple[int, int]]) -> list[int]:
    order = _arcs_single_tour(instance, arcs)
    if order is None:
        raise RuntimeError("arc set is not a single depot-rooted tour")
    return order


def _tour_time(instance: OpInstance, order: Sequence[int]) -> float:
    d = instance.depot_index
    tt = instance.travel_time
    t = 0.0
    prev = d
    for i in order:
        t += tt[prev][i]
        t += instance.duration[i]
        prev = i
    t += tt[prev][d]
    return t
