"""LLM backend adapters and schema-constrained output handling.

Backends expose one call: ``complete(request) -> raw text``. Structured
requests go through :func:`request_structured`, which validates the reply
against a named schema and re-asks up to the retry budget, appending a
correction message each attempt so every request stays distinct and
reproducible.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx
from pydantic import BaseModel, Field, ValidationError

DEFAULT_TEMPERATURE = 0.2
DEFAULT_RETRIES = 3

REASK_MARKER = "Your previous reply could not be used"
CANNED_REFUSAL = "I'm sorry, but I can't help with that request."


class LlmError(RuntimeError):
    pass


class ParseFailure(LlmError):
    """Reply did not validate against the requested schema."""


class LengthMismatch(LlmError):
    """Reply lists are not aligned with the item list."""


class BackendUnavailable(LlmError):
    pass


class AllBackendsFailed(LlmError):
    def __init__(self, failures: dict[str, str]):
        super().__init__(f"all backends failed: {failures}")
        self.failures = failures


# ---------------------------------------------------------------------------
# Output schemas
# ---------------------------------------------------------------------------


class CandidateOut(BaseModel):
    name: str
    address: str
    reason: str = ""


class CandidateList(BaseModel):
    candidates: list[CandidateOut]


class ValueLists(BaseModel):
    scores: list[float]
    durations_hours: list[float]


class RecipeIdea(BaseModel):
    title: str
    est_kcal: float
    reason: str = ""


class RecipeIdeas(BaseModel):
    recipes: list[RecipeIdea]
    overall_reason: str = ""


class MustHaveOut(BaseModel):
    name: str
    quantity: float = 1.0
    unit: str = ""
    kcal: float


class OptionalOut(BaseModel):
    name: str
    priority: float
    kcal: float


class IngredientSplit(BaseModel):
    recipe_title: str = ""
    must_have: list[MustHaveOut]
    optional: list[OptionalOut] = Field(default_factory=list)
    notes: str = ""


class RouteReply(BaseModel):
    route: list[str]


SCHEMAS: dict[str, type[BaseModel]] = {
    "candidate_list": CandidateList,
    "value_lists": ValueLists,
    "recipe_ideas": RecipeIdeas,
    "ingredient_split": IngredientSplit,
    "route_reply": RouteReply,
}


@dataclass(frozen=True)
class LlmRequest:
    messages: list[tuple[str, str]]
    schema: str
    attachments: list[bytes] = field(default_factory=list)
    temperature: float = DEFAULT_TEMPERATURE

    def digest(self) -> str:
        payload = json.dumps(
            {
                "messages": list(self.messages),
                "schema": self.schema,
                "temperature": self.temperature,
                "attachments": [hashlib.sha256(a).hexdigest() for a in self.attachments],
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class LlmResponse:
    raw_text: str
    parsed: BaseModel | None = None
    error: str | None = None


class LlmBackend(Protocol):
    id: str

    def complete(self, request: LlmRequest) -> str: ...


_JSON_BLOCK = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def extract_json(raw: str) -> str:
    """Pull the JSON object out of a chat reply that may wrap it in fences
    or prose."""
    m = _JSON_BLOCK.search(raw)
    if m:
        raw = m.group(1)
    start = raw.find("{")
    end = raw.rfind("}")
    if start == -1 or end == -1 or end < start:
        raise ParseFailure("no JSON object in reply")
    return raw[start : end + 1]


def parse_schema(raw: str, schema: str) -> BaseModel:
    model = SCHEMAS[schema]
    try:
        data = json.loads(extract_json(raw))
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"invalid JSON: {exc}") from exc
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ParseFailure(f"schema mismatch: {exc.errors()[:3]}") from exc


def request_structured(
    backend: LlmBackend,
    messages: list[tuple[str, str]],
    schema: str,
    attachments: list[bytes] | None = None,
    temperature: float = DEFAULT_TEMPERATURE,
    retries: int = DEFAULT_RETRIES,
    check: Callable[[BaseModel], None] | None = None,
) -> BaseModel:
    """Ask, validate, and re-ask on failure; the optional ``check`` hook may
    raise LengthMismatch-style errors that also consume retries."""
    msgs = list(messages)
    last: LlmError = ParseFailure("backend never replied")
    for _ in range(max(1, retries)):
        try:
            raw = backend.complete(
                LlmRequest(
                    messages=msgs,
                    schema=schema,
                    attachments=list(attachments or []),
                    temperature=temperature,
                )
            )
            parsed = parse_schema(raw, schema)
            if check is not None:
                check(parsed)
            return parsed
        except (ParseFailure, LengthMismatch) as exc:
            last = exc
            msgs = msgs + [
                (
                    "user",
                    f"{REASK_MARKER}: {exc}. Respond again with JSON only, "
                    "exactly matching the required shape.",
                )
            ]
    raise last


class HttpBackend:
    """Chat-completions-style HTTP client. The API key comes from an
    environment variable; endpoint, model, and retry count come from
    configuration."""

    def __init__(
        self,
        id: str,
        endpoint: str,
        model: str,
        api_key_env: str = "PLANLOOP_API_KEY",
        temperature: float = DEFAULT_TEMPERATURE,
        timeout: float = 60.0,
        client: httpx.Client | None = None,
    ):
        self.id = id
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.temperature = temperature
        self._client = client or httpx.Client(timeout=timeout)

    def complete(self, request: LlmRequest) -> str:
        headers = {}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        messages = []
        for role, text in request.messages:
            messages.append({"role": role, "content": text})
        if request.attachments:
            parts = [{"type": "text", "text": messages[-1]["content"]}]
            for blob in request.attachments:
                encoded = base64.b64encode(blob).decode()
                parts.append(
                    {
                        "type": "image_url",
                        "image_url": {"url": f"data:image/jpeg;base64,{encoded}"},
                    }
                )
            messages[-1] = {"role": messages[-1]["role"], "content": parts}
        body = {
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature,
        }
        try:
            resp = self._client.post(self.endpoint, json=body, headers=headers)
            resp.raise_for_status()
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"{self.id}: {exc}") from exc


class MockBackend:
    """Deterministic offline backend driven by a directory of scenario
    fixtures.

    A fixture file holds either a literal response (or a list of responses,
    one per re-ask attempt) or a named response strategy computed from the
    request text. Matching goes by schema id plus optional substrings, or
    by an explicit request digest; files are tried in name order. Requests
    nothing matches get a canned refusal, which downstream parsing rejects.
    """

    def __init__(self, fixture_dir: str | Path, id: str = "mock-1"):
        self.id = id
        self.fixture_dir = Path(fixture_dir)
        self._fixtures: list[dict] | None = None
        self._lock = threading.Lock()

    def _load(self) -> list[dict]:
        with self._lock:
            if self._fixtures is None:
                fixtures = []
                for path in sorted(self.fixture_dir.glob("*.json")):
                    data = json.loads(path.read_text(encoding="utf-8"))
                    data.setdefault("scenario", path.stem)
                    fixtures.append(data)
                self._fixtures = fixtures
        return self._fixtures

    def complete(self, request: LlmRequest) -> str:
        fixture = self._match(request)
        if fixture is None:
            return CANNED_REFUSAL
        if "strategy" in fixture:
            return _run_strategy(
                fixture["strategy"], fixture.get("params", {}), request
            )
        responses = fixture.get("responses")
        if responses is None:
            responses = [fixture["response"]]
        attempt = sum(
            1 for _, text in request.messages if text.startswith(REASK_MARKER)
        )
        chosen = responses[min(attempt, len(responses) - 1)]
        if isinstance(chosen, str):
            return chosen
        return json.dumps(chosen, ensure_ascii=False)

    def _match(self, request: LlmRequest) -> dict | None:
        text = "\n".join(t for _, t in request.messages).casefold()
        digest = request.digest()
        for fixture in self._load():
            rule = fixture.get("match", {})
            if rule.get("digest") and rule["digest"] != digest:
                continue
            if rule.get("backend") and rule["backend"] != self.id:
                continue
            if rule.get("schema") and rule["schema"] != request.schema:
                continue
            needles = rule.get("contains", [])
            if isinstance(needles, str):
                needles = [needles]
            if all(n.casefold() in text for n in needles):
                return fixture
        return None


_TASK_BLOCK = re.compile(r"```json\s*(\{.*?\})\s*```", re.DOTALL)


def _run_strategy(name: str, params: dict, request: LlmRequest) -> str:
    """Compute a reply from the request itself; used where literal fixtures
    cannot be pre-authored (arbitrary item selections, generated tasks)."""
    if name == "value_table":
        return _value_table(params, request)
    if name == "echo":
        return json.dumps(params.get("value", {}))
    blocks = _TASK_BLOCK.findall("\n".join(t for _, t in request.messages))
    if not blocks:
        return CANNED_REFUSAL
    task = json.loads(blocks[-1])
    if name == "greedy_route":
        return _greedy_route(task, params)
    raise ValueError(f"unknown mock strategy {name!r}")


DEPOT_MARKER = "[start and end point]"


def _value_table(params: dict, request: LlmRequest) -> str:
    """Score/duration lists for the bulleted item list in the prompt, taken
    from a per-name table with defaults; stays aligned with any selection."""
    items: list[tuple[str, bool]] = []
    for role, text in request.messages:
        if role != "user":
            continue
        found = []
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("- "):
                body = line[2:].strip()
                is_depot = body.endswith(DEPOT_MARKER)
                if is_depot:
                    body = body[: -len(DEPOT_MARKER)].strip()
                found.append((body, is_depot))
        if found:
            items = found
            break
    score_table = {k.casefold(): v for k, v in params.get("scores", {}).items()}
    hour_table = {k.casefold(): v for k, v in params.get("hours", {}).items()}
    default_score = params.get("default_score", 5)
    default_hours = params.get("default_hours", 1.0)
    scores = []
    hours = []
    for name_, is_depot in items:
        if is_depot:
            scores.append(0)
            hours.append(0)
            continue
        scores.append(score_table.get(name_.casefold(), default_score))
        hours.append(hour_table.get(name_.casefold(), default_hours))
    return json.dumps({"scores": scores, "durations_hours": hours})


def _greedy_route(task: dict, params: dict) -> str:
    """Walk the nodes in listed order while the running total stays under a
    fraction of the budget; on a deterministic subset of tasks, keep one
    node too many so the route lands over budget."""
    fraction = float(params.get("budget_fraction", 0.75))
    overshoot_every = int(params.get("overshoot_every", 3))
    nodes = [n for n in task["nodes"] if str(n["id"]) != str(task["depot"])]
    index = {str(n["id"]): k for k, n in enumerate(task["nodes"])}
    matrix = task["travel_min"]
    stay = {str(n["id"]): float(n.get("stay_min", 0)) for n in task["nodes"]}
    depot = str(task["depot"])
    budget = float(task["budget_min"])

    digest = int(hashlib.sha256(json.dumps(task, sort_keys=True).encode()).hexdigest(), 16)
    overshoot = overshoot_every > 0 and digest % overshoot_every == 0

    route: list[str] = []
    total = 0.0
    last = depot
    for node in nodes:
        nid = str(node["id"])
        step = matrix[index[last]][index[nid]] + stay[nid]
        closing = matrix[index[nid]][index[depot]]
        if total + step + closing > budget * fraction:
            if overshoot:
                route.append(nid)
                overshoot = False
            break
        total += step
        route.append(nid)
        last = nid
    return json.dumps({"route": route})
