"""Autonomous tool stage: the model proposes image-tool calls, we execute.

Each loop step sends the conversation to the gateway, parses the reply as
either a structured tool call or a STOP token, validates the call against
the category-gated registry and the tool's parameter schema, and runs it
through the raster ops.  Invalid calls consume an iteration and feed a
machine-readable error back; no model output can crash the loop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import DimensionMismatchError, OutOfBoundsError
from .gateway import ChatRequest, Message, image_part, text_part
from .prompts import load_prompt, render
from .raster import (
    BinaryMask,
    LineSpec,
    PolarSpec,
    Raster,
    Rect,
    apply_blur_mask,
    apply_white_mask,
    crop,
    draw_cartesian_auxlines,
    draw_polar_auxlines,
    draw_red_box,
    enhance_contrast,
)
from .taxonomy import TaskConfig, allowed_tools

STOP_TOKEN = "STOP"

# Parameter surface shown to the model, one line per tool.
PARAM_HINTS = {
    "crop": '{"x": int, "y": int, "w": int, "h": int}',
    "white_mask": '{"keep": {"x": int, "y": int, "w": int, "h": int}}',
    "cartesian_auxline": '{"lines": [{"orientation": "horizontal"|"vertical", "position": int, "thickness": int (optional)}]}',
    "polar_auxline": '{"center": {"x": int, "y": int}, "radii": [number, ...], "angles": [degrees, ...], "spoke_length": int, "thickness": int (optional)}',
    "red_box": '{"x": int, "y": int, "w": int, "h": int, "thickness": int (optional)}',
    "blur_mask": '{"keep": {"x": int, "y": int, "w": int, "h": int} or null, "sigma": number > 1 (optional)}',
    "enhance_contrast": '{"p_low": percentile (optional), "p_high": percentile (optional)}',
}


@dataclass(frozen=True)
class ToolCall:
    tool: str
    params: dict
    note: str = ""


@dataclass(frozen=True)
class ParsedStop:
    pass


@dataclass(frozen=True)
class ParseFailure:
    reason: str


@dataclass(frozen=True)
class EvidenceItem:
    """One executed tool call and its output image."""

    call: ToolCall
    output: Raster
    note: str
    step: int


@dataclass(frozen=True)
class TranscriptEntry:
    step: int
    reply: str
    outcome: str         # "executed" | "rejected" | "stop"
    detail: str = ""     # tool name or machine-readable error feedback


@dataclass(frozen=True)
class AgentTranscript:
    entries: tuple = field(default_factory=tuple)

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {"step": e.step, "outcome": e.outcome, "detail": e.detail,
                 "reply": e.reply},
                sort_keys=True,
            )
            for e in self.entries
        ]
        return "".join(line + "\n" for line in lines)


def parse_tool_call(reply: str):
    """Total parser: first structured call block, else STOP, else failure."""
    decoder = json.JSONDecoder()
    idx = reply.find("{")
    while idx != -1:
        try:
            obj, _ = decoder.raw_decode(reply, idx)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict) and isinstance(obj.get("tool"), str):
            params = obj.get("params")
            note = obj.get("note")
            return ToolCall(
                tool=obj["tool"],
                params=params if isinstance(params, dict) else {},
                note=note if isinstance(note, str) else "",
            )
        idx = reply.find("{", idx + 1)
    for line in reply.splitlines():
        if line.strip() == STOP_TOKEN:
            return ParsedStop()
    return ParseFailure("no tool-call block or STOP token found")


# Schema validation: returns (normalized_params, None) or (None, error text).

def _int_field(obj: dict, key: str, minimum=None, maximum=None):
    val = obj.get(key)
    if isinstance(val, bool) or not isinstance(val, int):
        raise ValueError(f"'{key}' must be an integer")
    if minimum is not None and val < minimum:
        raise ValueError(f"'{key}' must be >= {minimum}")
    if maximum is not None and val > maximum:
        raise ValueError(f"'{key}' must be <= {maximum}")
    return val


def _number_field(obj: dict, key: str, default=None, minimum=None,
                  maximum=None, exclusive_min=None):
    val = obj.get(key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ValueError(f"'{key}' must be a number")
    if exclusive_min is not None and val <= exclusive_min:
        raise ValueError(f"'{key}' must be > {exclusive_min}")
    if minimum is not None and val < minimum:
        raise ValueError(f"'{key}' must be >= {minimum}")
    if maximum is not None and val > maximum:
        raise ValueError(f"'{key}' must be <= {maximum}")
    return float(val)


def _rect_fields(obj) -> dict:
    if not isinstance(obj, dict):
        raise ValueError("rectangle must be an object with x, y, w, h")
    return {
        "x": _int_field(obj, "x", minimum=0),
        "y": _int_field(obj, "y", minimum=0),
        "w": _int_field(obj, "w", minimum=1),
        "h": _int_field(obj, "h", minimum=1),
    }


def _validate_crop(params: dict) -> dict:
    return _rect_fields(params)


def _validate_white_mask(params: dict) -> dict:
    return {"keep": _rect_fields(params.get("keep"))}


def _validate_cartesian(params: dict) -> dict:
    lines = params.get("lines")
    if not isinstance(lines, list) or not lines:
        raise ValueError("'lines' must be a non-empty list")
    if len(lines) > 8:
        raise ValueError("at most 8 lines per call")
    out = []
    for entry in lines:
        if not isinstance(entry, dict):
            raise ValueError("each line must be an object")
        orientation = entry.get("orientation")
        if orientation not in ("horizontal", "vertical"):
            raise ValueError("'orientation' must be 'horizontal' or 'vertical'")
        out.append({
            "orientation": orientation,
            "position": _int_field(entry, "position", minimum=0),
            "thickness": _int_field(entry, "thickness", minimum=1)
            if "thickness" in entry else 2,
        })
    return {"lines": out}


def _validate_polar(params: dict) -> dict:
    center = params.get("center")
    if not isinstance(center, dict):
        raise ValueError("'center' must be an object with x and y")
    radii = params.get("radii", [])
    angles = params.get("angles", [])
    if not isinstance(radii, list) or not isinstance(angles, list):
        raise ValueError("'radii' and 'angles' must be lists")
    if not radii and not angles:
        raise ValueError("need at least one circle radius or spoke angle")
    clean_radii = []
    for r in radii:
        if isinstance(r, bool) or not isinstance(r, (int, float)) or r <= 0:
            raise ValueError("circle radii must be numbers > 0")
        clean_radii.append(float(r))
    clean_angles = []
    for a in angles:
        if isinstance(a, bool) or not isinstance(a, (int, float)) or not 0 <= a < 360:
            raise ValueError("spoke angles must be degrees in [0, 360)")
        clean_angles.append(float(a))
    spoke_length = 0
    if clean_angles:
        spoke_length = _int_field(params, "spoke_length", minimum=0)
    return {
        "center": {"x": _int_field(center, "x", minimum=0),
                   "y": _int_field(center, "y", minimum=0)},
        "radii": clean_radii,
        "angles": clean_angles,
        "spoke_length": spoke_length,
        "thickness": _int_field(params, "thickness", minimum=1)
        if "thickness" in params else 2,
    }


def _validate_red_box(params: dict) -> dict:
    out = _rect_fields(params)
    out["thickness"] = (_int_field(params, "thickness", minimum=1)
                        if "thickness" in params else 2)
    return out


def _validate_blur_mask(params: dict, default_sigma: float = 6.0) -> dict:
    keep = params.get("keep")
    return {
        "keep": None if keep is None else _rect_fields(keep),
        "sigma": _number_field(params, "sigma", default=default_sigma,
                               exclusive_min=1.0),
    }


def _validate_contrast(params: dict) -> dict:
    p_low = _number_field(params, "p_low", default=2.0, minimum=0.0, maximum=100.0)
    p_high = _number_field(params, "p_high", default=98.0, minimum=0.0, maximum=100.0)
    if p_low >= p_high:
        raise ValueError("'p_low' must be below 'p_high'")
    return {"p_low": p_low, "p_high": p_high}


_VALIDATORS = {
    "crop": _validate_crop,
    "white_mask": _validate_white_mask,
    "cartesian_auxline": _validate_cartesian,
    "polar_auxline": _validate_polar,
    "red_box": _validate_red_box,
    "blur_mask": _validate_blur_mask,
    "enhance_contrast": _validate_contrast,
}


def validate_params(tool: str, params: dict, *, blur_sigma_default: float = 6.0):
    """Check params against the tool's schema; (clean, None) or (None, error)."""
    try:
        if tool == "blur_mask":
            return _validate_blur_mask(params, blur_sigma_default), None
        return _VALIDATORS[tool](params), None
    except ValueError as exc:
        return None, str(exc)


def execute_tool_call(img: Raster, tool: str, params: dict) -> Raster:
    """Run one validated call against the stage image; raster errors propagate."""
    if tool == "crop":
        return crop(img, Rect(**params))
    if tool == "white_mask":
        keep = Rect(**params["keep"])
        keep.validate_within(img)
        return apply_white_mask(img, BinaryMask.from_rect(img.width, img.height, keep))
    if tool == "cartesian_auxline":
        lines = [LineSpec(**entry) for entry in params["lines"]]
        return draw_cartesian_auxlines(img, lines)
    if tool == "polar_auxline":
        spec = PolarSpec(
            center=(params["center"]["x"], params["center"]["y"]),
            radii=tuple(params["radii"]),
            angles=tuple(params["angles"]),
            spoke_length=params["spoke_length"],
            thickness=params["thickness"],
        )
        return draw_polar_auxlines(img, spec)
    if tool == "red_box":
        rect = Rect(params["x"], params["y"], params["w"], params["h"])
        return draw_red_box(img, rect, params["thickness"])
    if tool == "blur_mask":
        keep = Rect(**params["keep"]) if params["keep"] is not None else None
        return apply_blur_mask(img, keep, params["sigma"])
    if tool == "enhance_contrast":
        return enhance_contrast(img, params["p_low"], params["p_high"])
    raise ValueError(f"unknown tool {tool!r}")


def render_agent_prompt(tools, img: Raster) -> str:
    catalog = []
    for name in tools:
        description = load_prompt(f"tools/{name}.txt").strip()
        catalog.append(f"- {name}: {description}\n  params: {PARAM_HINTS[name]}")
    return render(
        load_prompt("agent_system.txt"),
        width=img.width, height=img.height, tool_catalog="\n".join(catalog),
    )


def _feedback(kind: str, **extra) -> str:
    return json.dumps({"error": kind, **extra}, sort_keys=True)


def run_agent(img150: Raster, config: TaskConfig, question: str, gateway,
              max_iters: int = 3, *, blur_sigma: float = 6.0):
    """Run the tool loop; returns (evidence list, transcript).

    Every reply consumes one iteration.  The loop ends on STOP, the
    iteration cap, or a gateway error (which propagates); evidence gathered
    so far is returned in the first two cases.
    """
    tools = sorted(allowed_tools(config))
    system = Message("system", (text_part(render_agent_prompt(tools, img150)),))
    opener = Message("user", (text_part(f"Question: {question}"), image_part(img150)))
    messages = [system, opener]
    evidence: list[EvidenceItem] = []
    entries: list[TranscriptEntry] = []

    for step in range(max_iters):
        reply = gateway.send(ChatRequest(messages=tuple(messages)))
        parsed = parse_tool_call(reply)

        if isinstance(parsed, ParsedStop):
            entries.append(TranscriptEntry(step, reply, "stop"))
            break

        feedback = None
        if isinstance(parsed, ParseFailure):
            feedback = _feedback("unrecognized_reply", detail=parsed.reason,
                                 expected="one JSON tool call or STOP")
        elif parsed.tool not in tools:
            feedback = _feedback("tool_not_permitted", tool=parsed.tool,
                                 allowed=list(tools))
        else:
            params, err = validate_params(parsed.tool, parsed.params,
                                          blur_sigma_default=blur_sigma)
            if err is not None:
                feedback = _feedback("invalid_params", tool=parsed.tool, detail=err)
            else:
                try:
                    output = execute_tool_call(img150, parsed.tool, params)
                except (OutOfBoundsError, DimensionMismatchError, ValueError) as exc:
                    feedback = _feedback("execution_failed", tool=parsed.tool,
                                         detail=str(exc))
                else:
                    call = ToolCall(parsed.tool, params, parsed.note)
                    evidence.append(EvidenceItem(call, output, parsed.note, step))
                    entries.append(TranscriptEntry(step, reply, "executed", parsed.tool))
                    messages.append(Message("assistant", (text_part(reply),)))
                    messages.append(Message("user", (
                        text_part(f"Applied {parsed.tool}; the result "
                                  f"({output.width}x{output.height}) is attached. "
                                  f"Propose another call or reply STOP."),
                        image_part(output),
                    )))
                    continue

        entries.append(TranscriptEntry(step, reply, "rejected", feedback))
        messages.append(Message("assistant", (text_part(reply),)))
        messages.append(Message("user", (text_part(feedback),)))

    return evidence, AgentTranscript(tuple(entries))
