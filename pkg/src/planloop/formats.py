"""On-disk JSON formats: `lappi-op/1` tour instances, `lappi-meal/1` meal
instances, and itinerary / meal-plan result payloads.

Writers emit a fixed key order and 2-space indentation so that
write -> read -> write is byte-stable.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .model import (
    Itinerary,
    MealInstance,
    MealPlan,
    MustHaveIngredient,
    OpInstance,
    OptionalIngredient,
    Spot,
)

OP_FORMAT = "lappi-op/1"
MEAL_FORMAT = "lappi-meal/1"


class FormatError(ValueError):
    """Malformed or wrong-version instance file."""


def op_instance_to_dict(instance: OpInstance) -> dict[str, Any]:
    return {
        "format": OP_FORMAT,
        "spots": [
            {
                "id": s.id,
                "name": s.name,
                "address": s.address,
                "lat": s.lat,
                "lon": s.lon,
                "score": instance.score[i],
                "duration_min": instance.duration[i],
            }
            for i, s in enumerate(instance.spots)
        ],
        "depot_id": instance.depot_id,
        "travel_time_min": [list(row) for row in instance.travel_time],
        "budget_min": instance.budget_minutes,
        "lambda_v": instance.lambda_v,
        "lambda_t": instance.lambda_t,
    }


def op_instance_from_dict(data: dict[str, Any]) -> OpInstance:
    if not isinstance(data, dict):
        raise FormatError("instance file must hold a JSON object")
    if data.get("format") != OP_FORMAT:
        raise FormatError(f"expected format {OP_FORMAT!r}, got {data.get('format')!r}")
    try:
        spots = [
            Spot(
                id=str(s["id"]),
                name=str(s.get("name", s["id"])),
                address=str(s.get("address", "")),
                lat=s.get("lat"),
                lon=s.get("lon"),
            )
            for s in data["spots"]
        ]
        score = [float(s["score"]) for s in data["spots"]]
        duration = [float(s["duration_min"]) for s in data["spots"]]
        depot_id = data["depot_id"]
        matrix = [[float(x) for x in row] for row in data["travel_time_min"]]
        budget = float(data["budget_min"])
        lambda_v = float(data.get("lambda_v", 1.0))
        lambda_t = float(data.get("lambda_t", 0.1))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed {OP_FORMAT} file: {exc}") from exc
    ids = [s.id for s in spots]
    if depot_id not in ids:
        raise FormatError(f"depot_id {depot_id!r} not among spot ids")
    return OpInstance(
        spots=spots,
        depot_index=ids.index(depot_id),
        travel_time=matrix,
        score=score,
        duration=duration,
        budget_minutes=budget,
        lambda_v=lambda_v,
        lambda_t=lambda_t,
    )


def itinerary_to_dict(itinerary: Itinerary) -> dict[str, Any]:
    return {
        "route": list(itinerary.ordered_spot_ids),
        "legs": [
            {"from": leg.from_id, "to": leg.to_id, "travel_min": leg.travel_minutes}
            for leg in itinerary.legs
        ],
        "stays": [
            {"spot": st.spot_id, "stay_min": st.minutes} for st in itinerary.stays
        ],
        "total_min": itinerary.total_minutes,
        "total_reward": itinerary.total_reward,
        "objective": itinerary.objective_value,
        "status": itinerary.status,
    }


def meal_instance_to_dict(instance: MealInstance) -> dict[str, Any]:
    return {
        "format": MEAL_FORMAT,
        "recipe": instance.recipe_title,
        "must_have": [
            {"name": i.name, "qty": i.quantity, "unit": i.unit, "kcal": i.calories}
            for i in instance.must_have
        ],
        "optional": [
            {"name": i.name, "priority": i.priority, "kcal": i.calories}
            for i in instance.optional
        ],
        "limit_kcal": instance.calorie_limit,
    }


def meal_instance_from_dict(data: dict[str, Any]) -> MealInstance:
    if not isinstance(data, dict):
        raise FormatError("instance file must hold a JSON object")
    if data.get("format") != MEAL_FORMAT:
        raise FormatError(f"expected format {MEAL_FORMAT!r}, got {data.get('format')!r}")
    try:
        must = [
            MustHaveIngredient(
                name=str(i["name"]),
                quantity=float(i["qty"]),
                unit=str(i.get("unit", "")),
                calories=float(i["kcal"]),
            )
            for i in data["must_have"]
        ]
        optional = [
            OptionalIngredient(
                name=str(i["name"]),
                priority=float(i["priority"]),
                calories=float(i["kcal"]),
            )
            for i in data["optional"]
        ]
        return MealInstance(
            recipe_title=str(data["recipe"]),
            must_have=must,
            optional=optional,
            calorie_limit=float(data["limit_kcal"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed {MEAL_FORMAT} file: {exc}") from exc


def meal_plan_to_dict(plan: MealPlan) -> dict[str, Any]:
    return {
        "scale": plan.scale_factor,
        "selected": sorted(plan.selected_optionals),
        "total_kcal": plan.total_calories,
        "total_priority": plan.total_priority,
    }


def dumps(data: dict[str, Any]) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def write_json(path: str | Path, data: dict[str, Any]) -> None:
    Path(path).write_text(dumps(data), encoding="utf-8")


def read_json(path: str | Path) -> dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc


def load_op_instance(path: str | Path) -> OpInstance:
    return op_instance_from_dict(read_json(path))


def save_op_instance(path: str | Path, instance: OpInstance) -> None:
    write_json(path, op_instance_to_dict(instance))


def load_meal_instance(path: str | Path) -> MealInstance:
    return meal_instance_from_dict(read_json(path))


def save_meal_instance(path: str | Path, instance: MealInstance) -> None:
    write_json(path, meal_instance_to_dict(instance))
