"""Interactive loop state machine: enumerate, select, optimize, refine.

Sessions persist to a single SQLite file as an append-only event log plus
a snapshot per session. Events record inputs only; replaying them through
the same engine with the same deterministic backends reconstructs the
final state exactly, which is the primary test handle.
"""

from __future__ import annotations

import json
import sqlite3
import threading
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from . import formats
from .instantiate import (
    CandidateSet,
    assign_values,
    categorize_ingredients,
    enumerate_items,
    enumerate_recipes,
)
from .knapsack import plan_meal
from .llm import LlmBackend, LlmError
from .model import OpInstance, Spot, reduce_instance, validate_instance
from .opsolver import SolverConfig, solve
from .providers import geocode_spots

TASK_TRIP = "trip"
TASK_MEAL = "meal"

STATUS_ORDER = ["enumerating", "selecting", "assigned", "solved"]


class SessionNotFound(LookupError):
    pass


class UnknownCandidateId(ValueError):
    pass


class PreconditionError(ValueError):
    pass


@dataclass
class SessionState:
    session_id: str
    task: str
    status: str = "enumerating"
    history: list[dict] = field(default_factory=list)
    candidates: list[Spot] = field(default_factory=list)
    backend_ids: list[str] = field(default_factory=list)
    selected_ids: list[str] = field(default_factory=list)
    budget: float | None = None
    last_instance: dict | None = None
    last_solution: dict | None = None
    warnings: list[str] = field(default_factory=list)

    def candidate_ids(self) -> set[str]:
        return {c.id for c in self.candidates}

    def next_seq(self) -> int:
        return self.history[-1]["seq"] + 1 if self.history else 0

    def to_dict(self) -> dict:
        data = asdict(self)
        data["candidates"] = [
            {
                "id": c.id,
                "name": c.name,
                "address": c.address,
                "lat": c.lat,
                "lon": c.lon,
                "reason": c.reason,
                "sources": sorted(c.sources),
            }
            for c in self.candidates
        ]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SessionState":
        state = cls(
            session_id=data["session_id"],
            task=data["task"],
            status=data["status"],
            history=list(data.get("history", [])),
            backend_ids=list(data.get("backend_ids", [])),
            selected_ids=list(data.get("selected_ids", [])),
            budget=data.get("budget"),
            last_instance=data.get("last_instance"),
            last_solution=data.get("last_solution"),
            warnings=list(data.get("warnings", [])),
        )
        state.candidates = [
            Spot(
                id=c["id"],
                name=c["name"],
                address=c.get("address", ""),
                lat=c.get("lat"),
                lon=c.get("lon"),
                reason=c.get("reason", ""),
                sources=frozenset(c.get("sources", [])),
            )
            for c in data.get("candidates", [])
        ]
        return state


def snapshot_bytes(state: SessionState) -> bytes:
    """Canonical byte form of a session; equal states give equal bytes."""
    return json.dumps(
        state.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


class SessionStore:
    """Event log + snapshots in one SQLite file."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        with self._conn() as conn:
            conn.execute(
                "CREATE TABLE IF NOT EXISTS sessions "
                "(id TEXT PRIMARY KEY, snapshot TEXT NOT NULL)"
            )
            conn.execute(
                "CREATE TABLE IF NOT EXISTS events "
                "(session_id TEXT NOT NULL, seq INTEGER NOT NULL, "
                "payload TEXT NOT NULL, PRIMARY KEY (session_id, seq))"
            )

    def _conn(self) -> sqlite3.Connection:
        return sqlite3.connect(self.path)

    def save(self, state: SessionState) -> None:
        doc = json.dumps(state.to_dict(), sort_keys=True, ensure_ascii=False)
        with self._conn() as conn:
            conn.execute(
                "INSERT INTO sessions (id, snapshot) VALUES (?, ?) "
                "ON CONFLICT(id) DO UPDATE SET snapshot = excluded.snapshot",
                (state.session_id, doc),
            )
            for event in state.history:
                conn.execute(
                    "INSERT OR IGNORE INTO events (session_id, seq, payload) "
                    "VALUES (?, ?, ?)",
                    (
                        state.session_id,
                        event["seq"],
                        json.dumps(event, sort_keys=True, ensure_ascii=False),
                    ),
                )

    def load(self, session_id: str) -> SessionState:
        with self._conn() as conn:
            row = conn.execute(
                "SELECT snapshot FROM sessions WHERE id = ?", (session_id,)
            ).fetchone()
        if row is None:
            raise SessionNotFound(session_id)
        return SessionState.from_dict(json.loads(row[0]))

    def exists(self, session_id: str) -> bool:
        with self._conn() as conn:
            row = conn.execute(
                "SELECT 1 FROM sessions WHERE id = ?", (session_id,)
            ).fetchone()
        return row is not None

    def events(self, session_id: str) -> list[dict]:
        with self._conn() as conn:
            rows = conn.execute(
                "SELECT payload FROM events WHERE session_id = ? ORDER BY seq",
                (session_id,),
            ).fetchall()
        return [json.loads(r[0]) for r in rows]


class SessionEngine:
    """Applies loop steps to stored sessions. One writer per session at a
    time; different sessions proceed independently."""

    def __init__(
        self,
        store: SessionStore,
        provider,
        backend_factory: Callable[[int], list[LlmBackend]],
        solver_config: SolverConfig | None = None,
    ):
        self.store = store
        self.provider = provider
        self.backend_factory = backend_factory
        self.solver_config = solver_config or SolverConfig()
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    # -- public steps -------------------------------------------------

    def create_session(self, task: str, session_id: str | None = None) -> SessionState:
        if task not in (TASK_TRIP, TASK_MEAL):
            raise PreconditionError(f"unknown task {task!r}")
        sid = session_id or uuid.uuid4().hex
        if self.store.exists(sid):
            raise PreconditionError(f"session {sid!r} already exists")
        state = SessionState(session_id=sid, task=task)
        state.history.append({"seq": 0, "kind": "created", "task": task})
        self.store.save(state)
        return state

    def get(self, session_id: str) -> SessionState:
        return self.store.load(session_id)

    def step_enumerate(
        self, session_id: str, preference: str, backend_count: int = 1
    ) -> SessionState:
        with self._lock(session_id):
            state = self.store.load(session_id)
            try:
                self._apply_enumerate(state, preference, backend_count)
            finally:
                self.store.save(state)
            return state

    def step_select(self, session_id: str, ids: list[str]) -> SessionState:
        with self._lock(session_id):
            state = self.store.load(session_id)
            self._apply_select(state, ids)
            self.store.save(state)
            return state

    def step_optimize(
        self, session_id: str, preference: str, budget: float
    ) -> SessionState:
        with self._lock(session_id):
            state = self.store.load(session_id)
            try:
                self._apply_optimize(state, preference, budget)
            finally:
                self.store.save(state)
            return state

    def snapshot(self, session_id: str) -> bytes:
        return snapshot_bytes(self.store.load(session_id))

    def restore(self, session_id: str) -> SessionState:
        return self.store.load(session_id)

    def replay(self, session_id: str) -> SessionState:
        """Rebuild the final state by re-running the recorded inputs from
        scratch; with deterministic backends the result equals the stored
        state, history included."""
        original = self.store.load(session_id)
        state: SessionState | None = None
        for event in original.history:
            kind = event["kind"]
            if kind == "created":
                state = SessionState(session_id=original.session_id, task=event["task"])
                state.history.append({"seq": 0, "kind": "created", "task": event["task"]})
            elif state is None:
                raise ValueError("history does not start with a creation event")
            elif kind in ("enumerate", "enumerate_failed"):
                try:
                    self._apply_enumerate(
                        state, event["preference"], event["backend_count"]
                    )
                except Exception:
                    pass
            elif kind == "select":
                self._apply_select(state, event["ids"])
            elif kind in ("optimize", "optimize_failed"):
                try:
                    self._apply_optimize(state, event["preference"], event["budget"])
                except Exception:
                    pass
        if state is None:
            raise ValueError("empty history")
        return state

    # -- step implementations -----------------------------------------

    @staticmethod
    def _bump_status(state: SessionState, floor: str) -> None:
        if STATUS_ORDER.index(state.status) < STATUS_ORDER.index(floor):
            state.status = floor

    def _apply_enumerate(
        self, state: SessionState, preference: str, backend_count: int
    ) -> None:
        backends = self.backend_factory(backend_count)
        try:
            if state.task == TASK_TRIP:
                found: CandidateSet = enumerate_items(preference, None, backends)
            else:
                found = enumerate_recipes(preference, None, backends)
        except (LlmError, ValueError) as exc:
            state.history.append(
                {
                    "seq": state.next_seq(),
                    "kind": "enumerate_failed",
                    "preference": preference,
                    "backend_count": backend_count,
                    "error": str(exc),
                }
            )
            raise
        spots = found.spots
        if state.task == TASK_TRIP:
            spots = geocode_spots(spots, self.provider)
        self._merge_candidates(state, spots)
        for backend in backends:
            if backend.id not in state.backend_ids:
                state.backend_ids.append(backend.id)
        for bid, err in found.failures.items():
            state.warnings.append(f"backend {bid} failed: {err}")
        state.history.append(
            {
                "seq": state.next_seq(),
                "kind": "enumerate",
                "preference": preference,
                "backend_count": backend_count,
            }
        )
        self._bump_status(state, "selecting")

    @staticmethod
    def _merge_candidates(state: SessionState, spots: list[Spot]) -> None:
        """Union semantics: enumeration rounds grow the pool, never replace
        it. Overlaps merge on the candidate id and union their sources."""
        by_id = {c.id: i for i, c in enumerate(state.candidates)}
        for spot in spots:
            if spot.id in by_id:
                idx = by_id[spot.id]
                prev = state.candidates[idx]
                state.candidates[idx] = Spot(
                    id=prev.id,
                    name=prev.name,
                    address=prev.address,
                    lat=prev.lat if prev.lat is not None else spot.lat,
                    lon=prev.lon if prev.lon is not None else spot.lon,
                    reason=prev.reason,
                    sources=prev.sources | spot.sources,
                )
            else:
                by_id[spot.id] = len(state.candidates)
                state.candidates.append(spot)

    def _apply_select(self, state: SessionState, ids: list[str]) -> None:
        known = state.candidate_ids()
        unknown = [i for i in ids if i not in known]
        if unknown:
            raise UnknownCandidateId(", ".join(unknown))
        state.selected_ids = list(ids)
        state.history.append(
            {"seq": state.next_seq(), "kind": "select", "ids": list(ids)}
        )
        state.status = "selecting"

    def _apply_optimize(
        self, state: SessionState, preference: str, budget: float
    ) -> None:
        try:
            if budget is None or budget <= 0:
                raise PreconditionError("budget must be positive")
            if not state.selected_ids:
                raise PreconditionError("nothing selected")
            if state.task == TASK_TRIP:
                instance_doc, solution_doc = self._optimize_trip(
                    state, preference, budget
                )
            else:
                instance_doc, solution_doc = self._optimize_meal(
                    state, preference, budget
                )
        except Exception as exc:
            state.history.append(
                {
                    "seq": state.next_seq(),
                    "kind": "optimize_failed",
                    "preference": preference,
                    "budget": budget,
                    "error": str(exc),
                }
            )
            raise
        # Commit only after every stage succeeded; the previous plan
        # survives any failure above.
        state.budget = budget
        state.last_instance = instance_doc
        state.last_solution = solution_doc
        state.history.append(
            {
                "seq": state.next_seq(),
                "kind": "optimize",
                "preference": preference,
                "budget": budget,
            }
        )
        state.status = "solved"

    def _optimize_trip(
        self, state: SessionState, preference: str, budget: float
    ) -> tuple[dict, dict]:
        backend = self.backend_factory(1)[0]
        by_id = {c.id: c for c in state.candidates}
        selected = [by_id[i] for i in state.selected_ids]
        missing = [s.id for s in selected if not s.geocoded]
        if missing:
            raise PreconditionError(
                f"selected spots lack coordinates: {', '.join(missing)}"
            )
        values = assign_values(
            preference, [s.name for s in selected], None, backend
        )
        state.warnings.extend(values.warnings)
        matrix = self.provider.travel_matrix(selected)
        instance = OpInstance(
            spots=selected,
            depot_index=0,
            travel_time=matrix,
            score=values.scores,
            duration=values.durations_minutes,
            budget_minutes=budget,
        )
        problems = validate_instance(instance)
        if problems:
            raise PreconditionError("; ".join(problems))
        reduced = reduce_instance(instance)
        itinerary = solve(reduced, self.solver_config)
        return (
            formats.op_instance_to_dict(reduced),
            formats.itinerary_to_dict(itinerary),
        )

    def _optimize_meal(
        self, state: SessionState, preference: str, budget: float
    ) -> tuple[dict, dict]:
        backend = self.backend_factory(1)[0]
        by_id = {c.id: c for c in state.candidates}
        recipe = by_id[state.selected_ids[0]].name
        instance = categorize_ingredients(recipe, preference, None, backend, budget)
        plan = plan_meal(instance)
        return (
            formats.meal_instance_to_dict(instance),
            formats.meal_plan_to_dict(plan),
        )
