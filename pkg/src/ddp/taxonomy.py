"""Two-level task taxonomy, per-category tool gating, and the router stage.

The router sends the lightly smoothed image plus the question to the model
and expects a strict {"category": ..., "subtask": ...} reply.  Parsing is
forgiving about casing and separators but strict about membership; after
one retry it falls back to perceptual_phenomena/others, the class whose
tool set is a superset, so no tool is ever wrongly forbidden.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .gateway import ChatRequest, Message, image_part, text_part
from .prompts import load_prompt, render

PHYSICAL = "physical_attributes"
PERCEPTUAL = "perceptual_phenomena"

SUBTASKS = {
    PHYSICAL: ("size", "length", "color", "others"),
    PERCEPTUAL: ("counting", "find_difference", "color_blind", "motion",
                 "geometry", "real_picture", "size", "others"),
}

ALL_TOOLS = frozenset({
    "crop", "white_mask", "cartesian_auxline", "polar_auxline",
    "red_box", "blur_mask", "enhance_contrast",
})

# Tool gating: physical-attribute tasks get isolation/highlighting tools only;
# perceptual-phenomena tasks get the full set.
TOOL_REGISTRY = {
    PHYSICAL: frozenset({"crop", "white_mask", "cartesian_auxline", "red_box"}),
    PERCEPTUAL: ALL_TOOLS,
}


@dataclass(frozen=True)
class TaskConfig:
    """A category/subtask assignment; gates tools and prompt selection."""

    category: str
    subtask: str

    def __post_init__(self):
        if self.category not in SUBTASKS:
            raise ValueError(f"unknown category {self.category!r}")
        if self.subtask not in SUBTASKS[self.category]:
            raise ValueError(
                f"subtask {self.subtask!r} not valid for {self.category}"
            )

    @property
    def class_id(self) -> str:
        return f"{self.category}/{self.subtask}"

    @classmethod
    def from_class_id(cls, class_id: str) -> "TaskConfig":
        category, _, subtask = class_id.partition("/")
        return cls(category, subtask)


FALLBACK_CONFIG = TaskConfig(PERCEPTUAL, "others")

ALL_CLASS_IDS = tuple(
    f"{cat}/{sub}" for cat in (PHYSICAL, PERCEPTUAL) for sub in SUBTASKS[cat]
)


def allowed_tools(config: TaskConfig) -> frozenset:
    """Tool identifiers permitted for the config's category."""
    return TOOL_REGISTRY[config.category]


def _normalize_token(raw: str) -> str:
    """Lowercase and collapse separators: 'Find-Difference' -> 'find_difference'."""
    return re.sub(r"[^a-z0-9]+", "_", raw.strip().lower()).strip("_")


def parse_classification(reply: str) -> TaskConfig | None:
    """Extract a valid category/subtask pair from a model reply, else None.

    Accepts a JSON object anywhere in the reply, or 'category: x' /
    'subtask: y' key-value lines.  Tokens are matched case-insensitively
    with punctuation tolerance; anything not in the taxonomy fails.
    """
    category = subtask = None
    match = re.search(r"\{.*?\}", reply, re.DOTALL)
    if match:
        try:
            obj = json.loads(match.group(0))
            if isinstance(obj, dict):
                category = obj.get("category")
                subtask = obj.get("subtask")
        except json.JSONDecodeError:
            pass
    if category is None or subtask is None:
        cat_m = re.search(r"category\W+([A-Za-z_ -]+)", reply, re.IGNORECASE)
        sub_m = re.search(r"subtask\W+([A-Za-z_ -]+)", reply, re.IGNORECASE)
        if cat_m and sub_m:
            category = category or cat_m.group(1)
            subtask = subtask or sub_m.group(1)
    if not isinstance(category, str) or not isinstance(subtask, str):
        return None
    category = _normalize_token(category)
    subtask = _normalize_token(subtask)
    if category not in SUBTASKS or subtask not in SUBTASKS[category]:
        return None
    return TaskConfig(category, subtask)


def _classify_request(base_image, question: str, extra: tuple = ()) -> ChatRequest:
    prompt = render(load_prompt("classifier.txt"), question=question)
    user = Message("user", (text_part(prompt), image_part(base_image)))
    return ChatRequest(messages=(user,) + extra)


def classify(base_image, question: str, gateway) -> TaskConfig:
    """Route one query to a TaskConfig via the gateway.

    Total over model text: a malformed reply gets one reminder retry, then
    the permissive fallback class.  Gateway failures propagate.
    """
    request = _classify_request(base_image, question)
    reply = gateway.send(request)
    config = parse_classification(reply)
    if config is not None:
        return config
    reminder = load_prompt("classifier_reminder.txt")
    retry = _classify_request(
        base_image, question,
        extra=(Message("assistant", (text_part(reply),)),
               Message("user", (text_part(reminder),))),
    )
    config = parse_classification(gateway.send(retry))
    return config if config is not None else FALLBACK_CONFIG
