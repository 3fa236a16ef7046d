"""Per-query orchestration: smooth, classify, degrade, tool loop, judge.

run_query is self-contained: it returns a RunRecord in every case, folding
decode and gateway failures into failed records so batch runs always
complete.  Stage toggles reproduce the ablation variants: tools=False skips
the agent loop, prompts=False swaps in the generic judge template, and
degradation=False disables both downsampling injection points.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, asdict

from .critic import PromptLibrary, judge
from .errors import DecodeError, GatewayError
from .gateway import GatewayConfig
from .prompts import prompt_version
from .raster import decode_image, downsample_max_dim, gaussian_smooth
from .taxonomy import classify
from .tool_manager import AgentTranscript, run_agent


@dataclass
class PipelineConfig:
    """Every tunable of the inference pipeline, with paper-faithful defaults."""

    sigma1: float = 1.0          # light smoothing before classification
    r_mid: int = 150             # max dimension entering the tool stage
    r_low: int = 80              # max dimension entering the judge
    heavy_sigma: float = 6.0     # default sigma of the blur-mask tool
    max_tool_iters: int = 3
    tools: bool = True
    prompts: bool = True
    degradation: bool = True
    concurrency: int = 8
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    trace_dir: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.sigma1 < 0:
            raise ValueError("sigma1 must be >= 0")
        if self.r_low > self.r_mid:
            raise ValueError(f"r_low ({self.r_low}) must be <= r_mid ({self.r_mid})")
        if self.heavy_sigma <= self.sigma1:
            raise ValueError(
                f"heavy_sigma ({self.heavy_sigma}) must exceed sigma1 ({self.sigma1})"
            )
        if self.max_tool_iters < 0:
            raise ValueError("max_tool_iters must be >= 0")
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")

    _TOGGLES = ("tools", "prompts", "degradation")

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        """Build from the JSON config-file shape; unknown keys are rejected."""
        plain = {"sigma1", "r_mid", "r_low", "heavy_sigma", "max_tool_iters",
                 "concurrency", "trace_dir"}
        kwargs = {}
        for key, value in raw.items():
            if key in plain:
                kwargs[key] = value
            elif key == "toggles":
                extra = set(value) - set(cls._TOGGLES)
                if extra:
                    raise ValueError(f"unknown toggle keys: {sorted(extra)}")
                kwargs.update({k: bool(v) for k, v in value.items()})
            elif key == "gateway":
                known = set(GatewayConfig.__dataclass_fields__)
                extra = set(value) - known
                if extra:
                    raise ValueError(f"unknown gateway keys: {sorted(extra)}")
                kwargs["gateway"] = GatewayConfig(**value)
            else:
                raise ValueError(f"unknown config key: {key!r}")
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError("config file must hold a JSON object")
        return cls.from_dict(raw)

    def digest(self) -> str:
        """Stable fingerprint of all tunables plus the prompt asset version."""
        payload = asdict(self)
        payload["prompt_version"] = prompt_version()
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass
class RunRecord:
    """Full per-query outcome; one JSONL line in the records file."""

    id: str
    class_id: str | None
    evidence: list            # [{"tool", "params", "note"}, ...]
    transcript_steps: int
    option: str | None
    abstained: bool
    cot: str
    correct: bool | None
    status: str               # "scored" | "failed"
    error: str | None
    wall_ms: float
    gateway_calls: int
    gateway_attempts: int
    config_digest: str
    tags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunRecord":
        known = set(cls.__dataclass_fields__)
        extra = set(raw) - known
        if extra:
            raise ValueError(f"unknown record fields: {sorted(extra)}")
        return cls(**raw)


def _read_image_bytes(query) -> bytes:
    if isinstance(query.image, bytes):
        return query.image
    with open(query.image, "rb") as fh:
        return fh.read()


def _failed(query, error: str, config: PipelineConfig, gateway,
            started: float) -> RunRecord:
    calls, attempts = gateway.read_meter()
    return RunRecord(
        id=query.id, class_id=None, evidence=[], transcript_steps=0,
        option=None, abstained=False, cot="", correct=None, status="failed",
        error=error, wall_ms=(gateway.clock.time() - started) * 1000.0,
        gateway_calls=calls, gateway_attempts=attempts,
        config_digest=config.digest(), tags=list(query.tags),
    )


def run_query(query, config: PipelineConfig, gateway,
              library: PromptLibrary | None = None) -> RunRecord:
    """Execute the full staged flow for one query and record the outcome."""
    library = library if library is not None else PromptLibrary()
    gateway.reset_meter()
    started = gateway.clock.time()
    try:
        try:
            img = decode_image(_read_image_bytes(query))
        except (DecodeError, OSError) as exc:
            return _failed(query, f"image: {exc}", config, gateway, started)

        base = gaussian_smooth(img, config.sigma1)
        task = classify(base, query.question, gateway)
        img150 = downsample_max_dim(base, config.r_mid) if config.degradation else base

        if config.tools and config.max_tool_iters > 0:
            evidence, transcript = run_agent(
                img150, task, query.question, gateway,
                max_iters=config.max_tool_iters,
                blur_sigma=config.heavy_sigma,
            )
        else:
            evidence, transcript = [], AgentTranscript()

        img_tool = evidence[-1].output if evidence else img150
        verdict = judge(
            evidence, img_tool, query.question, query.choices, task, library,
            gateway,
            bottleneck_max_dim=config.r_low if config.degradation else None,
            use_class_prompt=config.prompts,
        )
    except GatewayError as exc:
        return _failed(query, f"gateway: {exc}", config, gateway, started)

    if config.trace_dir:
        os.makedirs(config.trace_dir, exist_ok=True)
        path = os.path.join(config.trace_dir, f"{query.id}.transcript.jsonl")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(transcript.to_jsonl())

    correct = None
    if query.answer is not None:
        correct = (not verdict.abstained) and verdict.option == query.answer

    calls, attempts = gateway.read_meter()
    return RunRecord(
        id=query.id,
        class_id=task.class_id,
        evidence=[
            {"tool": e.call.tool, "params": e.call.params, "note": e.note}
            for e in evidence
        ],
        transcript_steps=len(transcript.entries),
        option=verdict.option,
        abstained=verdict.abstained,
        cot=verdict.cot,
        correct=correct,
        status="scored",
        error=None,
        wall_ms=(gateway.clock.time() - started) * 1000.0,
        gateway_calls=calls,
        gateway_attempts=attempts,
        config_digest=config.digest(),
        tags=list(query.tags),
    )
