"""Prompt templates: a user-authored human part plus a predefined built-in
part that pins the output format. Rendering is pure string substitution."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from string import Formatter


class PromptKind(str, Enum):
    TRIP_ENUMERATION = "trip_enumeration"
    TRIP_VALUE_ASSIGNMENT = "trip_value_assignment"
    MEAL_ENUMERATION = "meal_enumeration"
    MEAL_VALUE_ASSIGNMENT = "meal_value_assignment"


class TemplateError(ValueError):
    """A slot in the built-in text has no binding."""


@dataclass(frozen=True)
class PromptTemplate:
    kind: PromptKind
    built_in_text: str
    output_schema: str

    def slots(self) -> set[str]:
        return {
            name
            for _, name, _, _ in Formatter().parse(self.built_in_text)
            if name is not None
        }

    def render(self, **bindings: str) -> str:
        missing = self.slots() - bindings.keys()
        if missing:
            raise TemplateError(f"unbound template slots: {sorted(missing)}")
        return self.built_in_text.format(**bindings)


TRIP_ENUMERATION = PromptTemplate(
    kind=PromptKind.TRIP_ENUMERATION,
    built_in_text=(
        "You are a travel agent who helps users make exciting trip plans. "
        "Convert the user's request into recommended places: for every place "
        "give its name, its specific street address, and the reason for the "
        "recommendation.\n"
        "\n"
        "Rules:\n"
        "- Every place must include its specific street address.\n"
        "- Describe each reason in detail, tied to the user's stated "
        "preferences.\n"
        "- Respond with JSON only, in the shape "
        '{{"candidates": [{{"name": "...", "address": "...", '
        '"reason": "..."}}]}}.\n'
    ),
    output_schema="candidate_list",
)

TRIP_VALUE_ASSIGNMENT = PromptTemplate(
    kind=PromptKind.TRIP_VALUE_ASSIGNMENT,
    built_in_text=(
        "You will receive the user's preferences and a list of places. "
        "Convert the list of places into two aligned lists: compatibility "
        "scores and recommended stay durations.\n"
        "\n"
        "Rules:\n"
        "- Score every place from 0 to 10 by how well it matches the user's "
        "preferences.\n"
        "- Give the recommended duration to spend at each place in hours; "
        "fractions are allowed.\n"
        "- The first place in the list is the fixed start and end point: "
        "give it score 0 and duration 0.\n"
        "- Return exactly one score and one duration per place, in the same "
        "order as the input list.\n"
        '- Respond with JSON only, in the shape {{"scores": [...], '
        '"durations_hours": [...]}}.\n'
    ),
    output_schema="value_lists",
)

MEAL_ENUMERATION = PromptTemplate(
    kind=PromptKind.MEAL_ENUMERATION,
    built_in_text=(
        "You are a cooking agent who helps users decide what to cook. "
        "Suggest exactly five recipe ideas that align with the user's "
        "request and, when a photo of their refrigerator is attached, with "
        "the ingredients visible in it.\n"
        "\n"
        "Rules:\n"
        "- List exactly five recipe ideas, each with an estimated calorie "
        "count for one person.\n"
        "- Put the ideas in the order that best fits the user's request.\n"
        "- Give one concise overall reason for the selection, focusing on "
        "balance, variety, or other key factors.\n"
        '- Respond with JSON only, in the shape {{"recipes": [{{"title": '
        '"...", "est_kcal": 0, "reason": "..."}}], "overall_reason": '
        '"..."}}.\n'
    ),
    output_schema="recipe_ideas",
)

MEAL_VALUE_ASSIGNMENT = PromptTemplate(
    kind=PromptKind.MEAL_VALUE_ASSIGNMENT,
    built_in_text=(
        "You are a cooking agent who adapts a chosen recipe's ingredient "
        "list to the user's dietary preferences and calorie limit without "
        "changing the dish itself.\n"
        "\n"
        "Rules:\n"
        "- Split the ingredients into a must-have list and an optional "
        "list.\n"
        "- Give every ingredient an estimated calorie count; give every "
        "optional ingredient a priority, where higher means more "
        "desirable.\n"
        "- If the user asks to remove an ingredient, remove it from the "
        "must-have list and do not keep it anywhere else.\n"
        "- If the user strongly asks to add or prioritize an ingredient, "
        "move it to the must-have list, even if it was optional or missing "
        "before.\n"
        "- A weaker request may stay in the optional list with an adjusted "
        "priority.\n"
        "- If a request cannot be fully met within the calorie limit or the "
        "recipe, give a brief reason in no more than two sentences.\n"
        '- Respond with JSON only, in the shape {{"recipe_title": "...", '
        '"must_have": [{{"name": "...", "quantity": 0, "unit": "...", '
        '"kcal": 0}}], "optional": [{{"name": "...", "priority": 0, '
        '"kcal": 0}}], "notes": "..."}}.\n'
    ),
    output_schema="ingredient_split",
)

BUILT_IN: dict[PromptKind, PromptTemplate] = {
    t.kind: t
    for t in (
        TRIP_ENUMERATION,
        TRIP_VALUE_ASSIGNMENT,
        MEAL_ENUMERATION,
        MEAL_VALUE_ASSIGNMENT,
    )
}
