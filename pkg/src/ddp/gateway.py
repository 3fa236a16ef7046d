"""Single egress point for model calls.

LiveGateway speaks the JSON chat-completions dialect over HTTP with
round-robin key rotation, a concurrency cap, a requests-per-minute budget,
and exponential-backoff retries.  MockGateway replays scripted replies
(ordered or keyed by request digest) and records every request, which makes
the whole pipeline bit-deterministic under test.
"""

from __future__ import annotations

import base64
import hashlib
import json
import threading
from dataclasses import dataclass, field

import httpx

from .clock import SystemClock, VirtualClock
from .errors import (
    AuthFailure,
    ConfigError,
    ExhaustedRetries,
    GatewayError,
    ScriptExhausted,
    UnmatchedDigest,
)

ROLES = ("system", "user", "assistant", "tool")

DEFAULT_TEMPERATURE = 0.1
DEFAULT_TOP_P = 1.0


@dataclass(frozen=True)
class ChatPart:
    """One message fragment: either text or a PNG image."""

    kind: str                      # "text" | "image"
    text: str | None = None
    image: bytes | None = None
    media_type: str = "image/png"
    width: int = 0                 # image dimensions, kept for digests
    height: int = 0

    def __post_init__(self):
        if self.kind == "text":
            if self.text is None or self.image is not None:
                raise ValueError("text part must carry text only")
        elif self.kind == "image":
            if self.image is None or self.text is not None:
                raise ValueError("image part must carry image bytes only")
        else:
            raise ValueError(f"bad part kind {self.kind!r}")


def text_part(text: str) -> ChatPart:
    return ChatPart(kind="text", text=text)


def image_part(raster) -> ChatPart:
    """PNG-encode a raster into an image part (lossless on the wire)."""
    from .raster import encode_image

    return ChatPart(
        kind="image",
        image=encode_image(raster),
        width=raster.width,
        height=raster.height,
    )


@dataclass(frozen=True)
class Message:
    role: str
    parts: tuple

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"bad role {self.role!r}")
        object.__setattr__(self, "parts", tuple(self.parts))


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_output: int = 2048

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not any(m.role == "user" for m in self.messages):
            raise ValueError("request needs at least one user message")


def request_digest(request: ChatRequest) -> str:
    """Stable digest over message texts and image dimensions.

    Image bytes are deliberately excluded so the digest survives PNG
    encoder differences; identical pixels at identical sizes route the same.
    """
    skeleton = []
    for msg in request.messages:
        parts = []
        for part in msg.parts:
            if part.kind == "text":
                parts.append(["t", part.text])
            else:
                parts.append(["i", part.width, part.height])
        skeleton.append([msg.role, parts])
    blob = json.dumps(skeleton, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class BackendTrace:
    digest: str
    key_index: int
    attempts: int
    latency_ms: float
    reply: str

    def as_dict(self) -> dict:
        return {
            "digest": self.digest,
            "key_index": self.key_index,
            "attempts": self.attempts,
            "latency_ms": self.latency_ms,
            "reply": self.reply,
        }


@dataclass
class GatewayConfig:
    """Tunables for the live backend; every default is overridable."""

    endpoint_url: str = ""
    model: str = ""
    dialect: str = "openai-chat"
    timeout_s: float = 60.0
    max_attempts: int = 5
    backoff_base_s: float = 1.0
    backoff_factor: float = 2.0
    max_concurrent: int = 8
    requests_per_minute: int = 60
    cooldown_s: float = 30.0
    trace_path: str | None = None


class RateLimiter:
    """Caps concurrent in-flight requests and per-minute issuance."""

    def __init__(self, max_concurrent: int, per_minute: int, clock=None):
        self._clock = clock or SystemClock()
        self._sem = threading.BoundedSemaphore(max_concurrent)
        self._per_minute = per_minute
        self._lock = threading.Lock()
        self._stamps: list[float] = []
        self._in_flight = 0
        self.max_in_flight_seen = 0

    def __enter__(self):
        self._sem.acquire()
        with self._lock:
            self._in_flight += 1
            self.max_in_flight_seen = max(self.max_in_flight_seen, self._in_flight)
        return self

    def __exit__(self, *exc):
        with self._lock:
            self._in_flight -= 1
        self._sem.release()

    @property
    def in_flight(self) -> int:
        with self._lock:
            return self._in_flight

    def gate_issue(self) -> None:
        """Block until issuing one more request fits the per-minute budget."""
        while True:
            with self._lock:
                now = self._clock.time()
                self._stamps = [t for t in self._stamps if t > now - 60.0]
                if len(self._stamps) < self._per_minute:
                    self._stamps.append(now)
                    return
                wait = self._stamps[0] + 60.0 - now
            self._clock.sleep(max(wait, 0.001))


class KeyPool:
    """Round-robin credential rotation with per-key cooldown."""

    def __init__(self, keys: list[str], cooldown_s: float = 30.0, clock=None):
        if not keys:
            raise ConfigError("gateway needs at least one API key")
        self._keys = list(keys)
        self._cooldown_s = cooldown_s
        self._clock = clock or SystemClock()
        self._cursor = 0
        self._cooling: dict[int, float] = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._keys)

    def next_key(self) -> tuple[int, str]:
        """Pick the next non-cooling key; the cursor advances exactly once
        per issued request.  Blocks if every key is cooling down."""
        while True:
            with self._lock:
                now = self._clock.time()
                for off in range(len(self._keys)):
                    idx = (self._cursor + off) % len(self._keys)
                    if self._cooling.get(idx, 0.0) <= now:
                        self._cooling.pop(idx, None)
                        self._cursor = (idx + 1) % len(self._keys)
                        return idx, self._keys[idx]
                wait = min(self._cooling.values()) - now
            self._clock.sleep(max(wait, 0.001))

    def start_cooldown(self, idx: int) -> None:
        with self._lock:
            self._cooling[idx] = self._clock.time() + self._cooldown_s


class _Meters(threading.local):
    calls = 0
    attempts = 0


class GatewayBase:
    """Shared bookkeeping: per-thread call meters and trace persistence."""

    def __init__(self, clock, trace_path: str | None = None):
        self.clock = clock
        self._trace_path = trace_path
        self._trace_lock = threading.Lock()
        self._meters = _Meters()
        self.traces: list[BackendTrace] = []

    def reset_meter(self) -> None:
        self._meters.calls = 0
        self._meters.attempts = 0

    def read_meter(self) -> tuple[int, int]:
        """(calls, attempts) issued by the current thread since reset."""
        return self._meters.calls, self._meters.attempts

    def _meter(self, attempts: int) -> None:
        self._meters.calls += 1
        self._meters.attempts += attempts

    def _record_trace(self, trace: BackendTrace) -> None:
        with self._trace_lock:
            self.traces.append(trace)
            if self._trace_path:
                with open(self._trace_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(trace.as_dict(), sort_keys=True) + "\n")

    def send(self, request: ChatRequest) -> str:
        raise NotImplementedError


class LiveGateway(GatewayBase):
    """HTTP chat backend with key polling, rate limiting, and retries."""

    def __init__(self, config: GatewayConfig, keys: list[str], *,
                 clock=None, transport=None):
        super().__init__(clock or SystemClock(), config.trace_path)
        if not config.endpoint_url:
            raise ConfigError("endpoint_url is required for live runs")
        if config.dialect != "openai-chat":
            raise ConfigError(f"unsupported wire dialect {config.dialect!r}")
        self.config = config
        self.pool = KeyPool(keys, cooldown_s=config.cooldown_s, clock=self.clock)
        self.limiter = RateLimiter(config.max_concurrent,
                                   config.requests_per_minute, clock=self.clock)
        self._client = httpx.Client(timeout=config.timeout_s, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _serialize(self, request: ChatRequest) -> dict:
        messages = []
        for msg in request.messages:
            if len(msg.parts) == 1 and msg.parts[0].kind == "text":
                content = msg.parts[0].text
            else:
                content = []
                for part in msg.parts:
                    if part.kind == "text":
                        content.append({"type": "text", "text": part.text})
                    else:
                        b64 = base64.b64encode(part.image).decode("ascii")
                        content.append({
                            "type": "image_url",
                            "image_url": {"url": f"data:{part.media_type};base64,{b64}"},
                        })
            messages.append({"role": msg.role, "content": content})
        return {
            "model": self.config.model,
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_output,
            "messages": messages,
        }

    @staticmethod
    def _first_text(body: dict) -> str:
        content = body["choices"][0]["message"]["content"]
        if isinstance(content, str):
            return content
        for part in content:
            if isinstance(part, dict) and part.get("type") == "text":
                return part.get("text", "")
        raise KeyError("no text segment in reply")

    def send(self, request: ChatRequest) -> str:
        payload = self._serialize(request)
        digest = request_digest(request)
        cfg = self.config
        start = self.clock.time()
        last_error = "no attempt made"
        with self.limiter:
            for attempt in range(1, cfg.max_attempts + 1):
                if attempt > 1:
                    self.clock.sleep(cfg.backoff_base_s * cfg.backoff_factor ** (attempt - 2))
                self.limiter.gate_issue()
                key_idx, key = self.pool.next_key()
                try:
                    resp = self._client.post(
                        cfg.endpoint_url,
                        json=payload,
                        headers={"Authorization": f"Bearer {key}"},
                    )
                except httpx.HTTPError as exc:
                    last_error = f"transport: {exc}"
                    continue
                if resp.status_code in (401, 403):
                    self._meter(attempt)
                    raise AuthFailure(f"key #{key_idx} rejected ({resp.status_code})")
                if resp.status_code == 429:
                    self.pool.start_cooldown(key_idx)
                    last_error = "rate limited (429)"
                    continue
                if resp.status_code >= 500:
                    last_error = f"server error ({resp.status_code})"
                    continue
                if resp.status_code != 200:
                    self._meter(attempt)
                    raise GatewayError(f"unexpected status {resp.status_code}: {resp.text[:200]}")
                try:
                    reply = self._first_text(resp.json())
                except (KeyError, IndexError, TypeError, ValueError) as exc:
                    last_error = f"malformed reply body: {exc}"
                    continue
                self._meter(attempt)
                self._record_trace(BackendTrace(
                    digest=digest,
                    key_index=key_idx,
                    attempts=attempt,
                    latency_ms=(self.clock.time() - start) * 1000.0,
                    reply=reply,
                ))
                return reply
        self._meter(cfg.max_attempts)
        raise ExhaustedRetries(f"{cfg.max_attempts} attempts failed; last: {last_error}")


@dataclass
class RecordedRequest:
    """Snapshot of one mock-gateway request for later assertions."""

    digest: str
    request: ChatRequest
    image_dims: list  # (width, height) per image part, in order

    @classmethod
    def of(cls, request: ChatRequest) -> "RecordedRequest":
        dims = [
            (p.width, p.height)
            for m in request.messages
            for p in m.parts
            if p.kind == "image"
        ]
        return cls(digest=request_digest(request), request=request, image_dims=dims)


class MockGateway(GatewayBase):
    """Deterministic scripted backend for tests and offline runs.

    Replies come from an ordered list and/or a digest-keyed map.  A string
    value under a digest repeats forever; a list is consumed in order.
    Strict mode refuses requests whose digest has no scripted reply.
    """

    def __init__(self, ordered: list[str] | None = None,
                 by_digest: dict | None = None, *, strict: bool = False,
                 latency_s: float = 0.0, clock=None, rate_limiter=None,
                 trace_path: str | None = None, on_send=None):
        super().__init__(clock or VirtualClock(), trace_path)
        self._ordered = list(ordered or [])
        self._by_digest = {k: (list(v) if isinstance(v, list) else v)
                           for k, v in (by_digest or {}).items()}
        self._strict = strict
        self._latency_s = latency_s
        self._lock = threading.Lock()
        self._on_send = on_send
        self.limiter = rate_limiter
        self.recorded: list[RecordedRequest] = []
        self._in_flight = 0
        self.max_in_flight_seen = 0

    def _next_reply(self, digest: str) -> str:
        with self._lock:
            hit = self._by_digest.get(digest)
            if isinstance(hit, str):
                return hit
            if isinstance(hit, list):
                if not hit:
                    raise ScriptExhausted(f"digest {digest[:12]} script used up")
                return hit.pop(0)
            if self._strict:
                raise UnmatchedDigest(f"no scripted reply for digest {digest[:12]}")
            if self._ordered:
                return self._ordered.pop(0)
            raise ScriptExhausted("ordered reply script used up")

    def _simulate_call(self) -> None:
        """One 'wire' call: tracked as in-flight for the simulated latency."""
        with self._lock:
            self._in_flight += 1
            self.max_in_flight_seen = max(self.max_in_flight_seen, self._in_flight)
        try:
            self.clock.sleep(self._latency_s)
        finally:
            with self._lock:
                self._in_flight -= 1

    def send(self, request: ChatRequest) -> str:
        if not any(m.role == "user" for m in request.messages):
            raise ValueError("request needs at least one user message")
        rec = RecordedRequest.of(request)
        with self._lock:
            self.recorded.append(rec)
        if self._on_send is not None:
            self._on_send(rec)
        start = self.clock.time()
        if self.limiter is not None:
            with self.limiter:
                self.limiter.gate_issue()
                self._simulate_call()
        else:
            self._simulate_call()
        reply = self._next_reply(rec.digest)
        self._meter(1)
        self._record_trace(BackendTrace(
            digest=rec.digest,
            key_index=-1,
            attempts=1,
            latency_ms=(self.clock.time() - start) * 1000.0,
            reply=reply,
        ))
        return reply


def keys_from_env(env: dict) -> list[str]:
    """Parse DDP_API_KEYS (comma-separated credentials)."""
    raw = env.get("DDP_API_KEYS", "")
    return [k.strip() for k in raw.split(",") if k.strip()]
