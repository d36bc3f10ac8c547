"""Turning preference text into problem-instance pieces: candidate
enumeration (single or multi backend), per-item value assignment, and
recipe ingredient categorization. Also hosts the route-from-chat baseline
that treats a backend itself as the solver, for evaluation only."""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import llm
from .llm import (
    AllBackendsFailed,
    CandidateList,
    DEFAULT_RETRIES,
    DEFAULT_TEMPERATURE,
    IngredientSplit,
    LengthMismatch,
    LlmBackend,
    RouteReply,
    ValueLists,
    request_structured,
)
from .model import (
    Itinerary,
    MealInstance,
    MustHaveIngredient,
    OpInstance,
    OptionalIngredient,
    Spot,
    ValueAssignment,
    build_itinerary,
    clamp_score,
)
from .prompts import BUILT_IN, PromptKind, PromptTemplate


class UnknownSpotId(ValueError):
    pass


@dataclass
class CandidateSet:
    """Deduplicated candidates with per-backend attribution; backends that
    failed after retries are recorded rather than fatal."""

    spots: list[Spot] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)

    def ids(self) -> list[str]:
        return [s.id for s in self.spots]


_SLUG_RE = re.compile(r"[^a-z0-9]+")


def slugify(name: str) -> str:
    slug = _SLUG_RE.sub("-", name.casefold()).strip("-")
    return slug or "spot"


def _dedup_key(name: str, address: str) -> tuple[str, str]:
    # Case-folded, whitespace-normalized name plus first address line.
    first_line = address.splitlines()[0] if address else ""
    first_line = first_line.split(",")[0]
    return (
        " ".join(name.casefold().split()),
        " ".join(first_line.casefold().split()),
    )


def enumerate_items(
    preference_text: str,
    template: PromptTemplate | None,
    backends: list[LlmBackend],
    temperature: float = DEFAULT_TEMPERATURE,
    retries: int = DEFAULT_RETRIES,
) -> CandidateSet:
    """Query every backend with the same rendered prompt, merge the parsed
    candidates by normalized (name, address), and record which backends
    proposed each surviving candidate."""
    if not preference_text.strip():
        raise ValueError("preference text must be non-empty")
    if not backends:
        raise ValueError("at least one backend is required")
    template = template or BUILT_IN[PromptKind.TRIP_ENUMERATION]
    messages = [("system", template.render()), ("user", preference_text)]

    def ask(backend: LlmBackend) -> CandidateList:
        return request_structured(
            backend,
            messages,
            template.output_schema,
            temperature=temperature,
            retries=retries,
        )

    results: list[tuple[LlmBackend, CandidateList | None, str | None]] = []
    with ThreadPoolExecutor(max_workers=max(1, len(backends))) as pool:
        futures = [(b, pool.submit(ask, b)) for b in backends]
        for backend, fut in futures:
            try:
                results.append((backend, fut.result(), None))
            except llm.LlmError as exc:
                results.append((backend, None, str(exc)))

    out = CandidateSet()
    seen: dict[tuple[str, str], int] = {}
    used_ids: set[str] = set()
    for backend, parsed, error in results:
        if parsed is None:
            out.failures[backend.id] = error or "failed"
            continue
        for cand in parsed.candidates:
            key = _dedup_key(cand.name, cand.address)
            if key in seen:
                idx = seen[key]
                prev = out.spots[idx]
                out.spots[idx] = Spot(
                    id=prev.id,
                    name=prev.name,
                    address=prev.address,
                    lat=prev.lat,
                    lon=prev.lon,
                    reason=prev.reason,
                    sources=prev.sources | {backend.id},
                )
                continue
            base = slugify(cand.name)
            spot_id = base
            k = 2
            while spot_id in used_ids:
                spot_id = f"{base}-{k}"
                k += 1
            used_ids.add(spot_id)
            seen[key] = len(out.spots)
            out.spots.append(
                Spot(
                    id=spot_id,
                    name=cand.name,
                    address=cand.address,
                    reason=cand.reason,
                    sources=frozenset({backend.id}),
                )
            )
    if not out.spots:
        raise AllBackendsFailed(out.failures or {b.id: "no candidates" for b in backends})
    return out


def enumerate_recipes(
    preference_text: str,
    template: PromptTemplate | None,
    backends: list[LlmBackend],
    image: bytes | None = None,
    temperature: float = DEFAULT_TEMPERATURE,
    retries: int = DEFAULT_RETRIES,
) -> CandidateSet:
    """Recipe-idea enumeration; candidates carry the title as name and the
    per-recipe reason (with its calorie estimate folded in)."""
    if not preference_text.strip():
        raise ValueError("preference text must be non-empty")
    if not backends:
        raise ValueError("at least one backend is required")
    template = template or BUILT_IN[PromptKind.MEAL_ENUMERATION]
    messages = [("system", template.render()), ("user", preference_text)]
    out = CandidateSet()
    used_ids: set[str] = set()
    for backend in backends:
        try:
            parsed = request_structured(
                backend,
                messages,
                template.output_schema,
                attachments=[image] if image else None,
                temperature=temperature,
                retries=retries,
            )
        except llm.LlmError as exc:
            out.failures[backend.id] = str(exc)
            continue
        for idea in parsed.recipes:
            base = slugify(idea.title)
            if base in used_ids:
                for spot in out.spots:
                    if spot.id == base:
                        sources = spot.sources | {backend.id}
                        out.spots[out.spots.index(spot)] = Spot(
                            id=spot.id,
                            name=spot.name,
                            reason=spot.reason,
                            sources=sources,
                        )
                        break
                continue
            used_ids.add(base)
            out.spots.append(
                Spot(
                    id=base,
                    name=idea.title,
                    reason=f"{idea.reason} (~{idea.est_kcal:g} kcal)",
                    sources=frozenset({backend.id}),
                )
            )
    if not out.spots:
        raise AllBackendsFailed(out.failures or {b.id: "no recipes" for b in backends})
    return out


def assign_values(
    preference_text: str,
    items: list[str],
    template: PromptTemplate | None,
    backend: LlmBackend,
    temperature: float = DEFAULT_TEMPERATURE,
    retries: int = DEFAULT_RETRIES,
) -> ValueAssignment:
    """One (score, duration) pair per item, positionally aligned. Hours from
    the backend convert to minutes; scores clamp into [0, 10] with a
    warning; the first item is the depot and is forced to (0, 0)."""
    if not items:
        raise ValueError("at least one item is required")
    template = template or BUILT_IN[PromptKind.TRIP_VALUE_ASSIGNMENT]
    is_trip = template.kind == PromptKind.TRIP_VALUE_ASSIGNMENT
    if is_trip and len(items) == 1:
        return ValueAssignment(scores=[0.0], durations_minutes=[0.0])

    lines = []
    for i, item in enumerate(items):
        suffix = " [start and end point]" if is_trip and i == 0 else ""
        lines.append(f"- {item}{suffix}")
    human = preference_text.strip() + "\n\n" + "\n".join(lines)

    def check(parsed: ValueLists) -> None:
        if len(parsed.scores) != len(items) or len(parsed.durations_hours) != len(items):
            raise LengthMismatch(
                f"expected {len(items)} entries, got {len(parsed.scores)} scores "
                f"and {len(parsed.durations_hours)} durations"
            )

    parsed = request_structured(
        backend,
        [("system", template.render()), ("user", human)],
        template.output_schema,
        temperature=temperature,
        retries=retries,
        check=check,
    )
    scores: list[float] = []
    durations: list[float] = []
    warnings: list[str] = []
    for i, (s, h) in enumerate(zip(parsed.scores, parsed.durations_hours)):
        if is_trip and i == 0:
            scores.append(0.0)
            durations.append(0.0)
            continue
        clamped, changed = clamp_score(s)
        if changed:
            warnings.append(f"score {s} for {items[i]!r} clamped to {clamped}")
        scores.append(clamped)
        minutes = h * 60.0
        if minutes < 0:
            warnings.append(f"negative duration for {items[i]!r} clamped to 0")
            minutes = 0.0
        durations.append(minutes)
    return ValueAssignment(scores=scores, durations_minutes=durations, warnings=warnings)


def categorize_ingredients(
    recipe_choice: str,
    preference_text: str,
    template: PromptTemplate | None,
    backend: LlmBackend,
    calorie_limit: float,
    image: bytes | None = None,
    temperature: float = DEFAULT_TEMPERATURE,
    retries: int = DEFAULT_RETRIES,
) -> MealInstance:
    """Split a chosen recipe into must-have and optional ingredients with
    calories and priorities, honoring remove/emphasize requests in the
    preference text (the built-in prompt carries those rules)."""
    if not recipe_choice.strip():
        raise ValueError("recipe choice must be non-empty")
    template = template or BUILT_IN[PromptKind.MEAL_VALUE_ASSIGNMENT]
    human = (
        f"Recipe: {recipe_choice}\n"
        f"Calorie limit: {calorie_limit:g} kcal\n\n"
        f"{preference_text.strip()}"
    )
    parsed: IngredientSplit = request_structured(
        backend,
        [("system", template.render()), ("user", human)],
        template.output_schema,
        attachments=[image] if image else None,
        temperature=temperature,
        retries=retries,
    )
    return MealInstance(
        recipe_title=parsed.recipe_title or recipe_choice,
        must_have=[
            MustHaveIngredient(i.name, i.quantity, i.unit, i.kcal)
            for i in parsed.must_have
        ],
        optional=[
            OptionalIngredient(i.name, i.priority, i.kcal) for i in parsed.optional
        ],
        calorie_limit=calorie_limit,
    )


# ---------------------------------------------------------------------------
# Chat-backend-as-solver baseline
# ---------------------------------------------------------------------------

_ROUTE_SYSTEM = (
    "You solve routing puzzles. You get numbered nodes with scores and stay "
    "times, a travel-time matrix in minutes, a depot node, and a time budget "
    "in minutes. Pick an ordered subset of non-depot nodes so that the round "
    "trip from the depot maximizes the summed scores while the total of "
    "travel and stay times fits the budget.\n"
    'Respond with JSON only, in the shape {"route": ["2", "4"]} listing the '
    "visited node ids in order, depot excluded."
)

_ROUTE_FEWSHOT: list[tuple[str, str]] = [
    (
        "user",
        "Task:\n```json\n"
        '{"nodes": [{"id": "1", "score": 0, "stay_min": 0}, '
        '{"id": "2", "score": 8, "stay_min": 60}, '
        '{"id": "3", "score": 3, "stay_min": 30}], '
        '"depot": "1", '
        '"travel_min": [[0, 10, 20], [10, 0, 15], [20, 15, 0]], '
        '"budget_min": 100}\n```',
    ),
    ("assistant", '{"route": ["2"]}'),
    (
        "user",
        "Task:\n```json\n"
        '{"nodes": [{"id": "1", "score": 0, "stay_min": 0}, '
        '{"id": "2", "score": 5, "stay_min": 30}, '
        '{"id": "3", "score": 5, "stay_min": 30}], '
        '"depot": "1", '
        '"travel_min": [[0, 5, 5], [5, 0, 5], [5, 5, 0]], '
        '"budget_min": 200}\n```',
    ),
    ("assistant", '{"route": ["2", "3"]}'),
]


def instance_as_task(instance: OpInstance) -> dict:
    """Abstract an instance into bare numeric node ids and weights."""
    return {
        "nodes": [
            {
                "id": str(i + 1),
                "score": instance.score[i],
                "stay_min": instance.duration[i],
            }
            for i in range(instance.n)
        ],
        "depot": str(instance.depot_index + 1),
        "travel_min": [list(row) for row in instance.travel_time],
        "budget_min": instance.budget_minutes,
    }


def llm_op_baseline(
    instance: OpInstance,
    backend: LlmBackend,
    temperature: float = DEFAULT_TEMPERATURE,
    retries: int = DEFAULT_RETRIES,
) -> Itinerary:
    """Ask a chat backend for a route over the abstracted instance and
    evaluate whatever comes back. Budget violations are measured by the
    caller, not corrected here."""
    task = instance_as_task(instance)
    messages = (
        [("system", _ROUTE_SYSTEM)]
        + _ROUTE_FEWSHOT
        + [("user", "Task:\n```json\n" + json.dumps(task) + "\n```")]
    )
    parsed: RouteReply = request_structured(
        backend, messages, "route_reply", temperature=temperature, retries=retries
    )
    depot_num = str(instance.depot_index + 1)
    order: list[int] = []
    seen: set[str] = set()
    for nid in parsed.route:
        nid = str(nid).strip()
        if nid == depot_num or nid in seen:
            continue
        try:
            idx = int(nid) - 1
        except ValueError:
            raise UnknownSpotId(nid) from None
        if not 0 <= idx < instance.n:
            raise UnknownSpotId(nid)
        seen.add(nid)
        order.append(idx)
    return build_itinerary(instance, order, status="baseline")
