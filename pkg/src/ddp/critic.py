"""Final judging stage: low-resolution bottleneck, aligned prompt, verdict.

The judge downsamples the tool-stage image to the structural bottleneck,
assembles one request from the class-conditioned prompt plus the evidence
images (which stay at their tool-output resolution), and extracts the final
option letter from the reply, retrying once with a reformat nudge before
abstaining.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .gateway import ChatRequest, Message, image_part, text_part
from .prompts import load_prompt, render
from .raster import Raster, downsample_max_dim
from .taxonomy import ALL_CLASS_IDS, TaskConfig


class PromptLibrary:
    """Class-conditioned alignment prompts with a generic fallback."""

    def __init__(self):
        self._generic = load_prompt("critic/generic.txt")
        self._templates = {}
        for class_id in ALL_CLASS_IDS:
            name = class_id.replace("/", "__")
            try:
                self._templates[class_id] = load_prompt(f"critic/{name}.txt")
            except FileNotFoundError:
                pass  # falls back to the generic template

    @property
    def generic(self) -> str:
        return self._generic

    def for_class(self, class_id: str) -> str:
        return self._templates.get(class_id, self._generic)


@dataclass(frozen=True)
class Verdict:
    """The emitted answer: a letter, the reasoning text, or an abstention."""

    option: str | None
    cot: str
    confidence_note: str | None = None
    abstained: bool = False


_MARKER_RE = re.compile(r"final\s+answer\b(.*)$", re.IGNORECASE | re.MULTILINE)
_PAREN_OR_BOLD_RE = re.compile(r"\(([A-Za-z])\)|\*\*([A-Za-z])\*\*")


def _single_letter(text: str, valid: set) -> str | None:
    """The one valid letter token in `text`, or None if zero or several."""
    tokens = re.findall(r"\b([A-Za-z])\b", text)
    letters = [t.upper() for t in tokens if t.upper() in valid]
    if len(letters) == 1:
        return letters[0]
    return None


def extract_option(reply: str, valid_letters) -> str | None:
    """Pull the chosen option letter out of free-form reasoning text.

    Priority: a 'Final Answer: X' marker, then a terminal standalone letter
    line, then the last parenthesized or bold single letter.  Anything
    ambiguous (two candidate letters on the marker line, none of the
    patterns present) yields None.
    """
    valid = {letter.upper() for letter in valid_letters}

    markers = _MARKER_RE.findall(reply)
    if markers:
        letter = _single_letter(markers[-1], valid)
        if letter is not None:
            return letter

    lines = [ln.strip() for ln in reply.splitlines() if ln.strip()]
    if lines:
        tail = lines[-1].strip("*() .:’'\"")
        if len(tail) == 1 and tail.upper() in valid:
            return tail.upper()

    hits = [a or b for a, b in _PAREN_OR_BOLD_RE.findall(reply)]
    hits = [h.upper() for h in hits if h.upper() in valid]
    if hits:
        return hits[-1]

    return None


def _format_choices(choices: dict) -> str:
    return "\n".join(f"{letter}. {text}" for letter, text in choices.items())


def build_judge_request(evidence, base_img: Raster, question: str,
                        choices: dict, template: str) -> ChatRequest:
    system = Message("system", (text_part(
        render(template, question=question, choices=_format_choices(choices)),
    ),))
    parts = [text_part("Primary image:"), image_part(base_img)]
    for i, item in enumerate(evidence, 1):
        caption = (f"Evidence {i}: output of {item.call.tool} with params "
                   f"{json.dumps(item.call.params, sort_keys=True)}")
        if item.note:
            caption += f" ({item.note})"
        parts.append(text_part(caption))
        parts.append(image_part(item.output))
    return ChatRequest(messages=(system, Message("user", tuple(parts))))


def judge(evidence, img_tool: Raster, question: str, choices: dict,
          config: TaskConfig, library: PromptLibrary, gateway, *,
          bottleneck_max_dim: int | None = 80,
          use_class_prompt: bool = True) -> Verdict:
    """Produce the final verdict for one query.

    bottleneck_max_dim=None transmits the tool-stage image at its native
    resolution (the degradation-ablation path).  Gateway errors propagate;
    unusable model text leads to an abstention, never an exception.
    """
    if not choices:
        raise ValueError("choices must be non-empty")
    base = (downsample_max_dim(img_tool, bottleneck_max_dim)
            if bottleneck_max_dim is not None else img_tool)
    template = (library.for_class(config.class_id)
                if use_class_prompt else library.generic)
    request = build_judge_request(evidence, base, question, choices, template)
    reply = gateway.send(request)
    letters = set(choices.keys())
    option = extract_option(reply, letters)
    if option is not None:
        return Verdict(option=option, cot=reply)

    retry = ChatRequest(messages=request.messages + (
        Message("assistant", (text_part(reply),)),
        Message("user", (text_part(load_prompt("critic/reformat.txt")),)),
    ))
    second = gateway.send(retry)
    option = extract_option(second, letters)
    cot = reply + "\n\n" + second
    if option is not None:
        return Verdict(option=option, cot=cot)
    return Verdict(option=None, cot=cot,
                   confidence_note="no parsable option after reformat retry",
                   abstained=True)
