"""Benchmark machinery: manifest ingestion, concurrent runs, scoring, reports.

Manifests and result records are JSONL: streamable, diffable, and
recoverable line by line.  Scoring is recomputable from the records file
alone; reports never contain numbers that are absent from the records.
"""

from __future__ import annotations

import csv
import io
import json
import os
import string
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

from .critic import PromptLibrary
from .errors import (
    DuplicateIdError,
    EmptyRecordSetError,
    ManifestParseError,
    MissingImageError,
)
from .pipeline import PipelineConfig, RunRecord, run_query


@dataclass
class Query:
    """One benchmark item: image, question, lettered choices, optional truth."""

    id: str
    image: str | bytes    # file path, or embedded image bytes
    question: str
    choices: dict         # ordered letter -> answer text
    answer: str | None = None
    tags: list = field(default_factory=list)

    def __post_init__(self):
        letters = list(self.choices)
        expected = list(string.ascii_uppercase[:len(letters)])
        if not letters or letters != expected:
            raise ValueError(
                f"choice letters must be contiguous from A, got {letters}"
            )
        if self.answer is not None and self.answer not in self.choices:
            raise ValueError(f"answer {self.answer!r} not among choices")


def load_manifest(path: str) -> list[Query]:
    """Parse a JSONL manifest, validating every line.

    Image paths are resolved relative to the manifest's directory and must
    exist; duplicate ids are rejected.
    """
    base_dir = os.path.dirname(os.path.abspath(path))
    queries: list[Query] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestParseError(line_no, f"invalid JSON: {exc}")
            if not isinstance(raw, dict):
                raise ManifestParseError(line_no, "each line must be a JSON object")
            for key in ("id", "image", "question", "choices"):
                if key not in raw:
                    raise ManifestParseError(line_no, f"missing field {key!r}")
            extra = set(raw) - {"id", "image", "question", "choices", "answer", "tags"}
            if extra:
                raise ManifestParseError(line_no, f"unknown fields: {sorted(extra)}")
            if not isinstance(raw["choices"], dict) or not all(
                isinstance(v, str) for v in raw["choices"].values()
            ):
                raise ManifestParseError(line_no, "'choices' must map letters to text")
            if raw["id"] in seen:
                raise DuplicateIdError(f"duplicate query id {raw['id']!r} at line {line_no}")
            seen.add(raw["id"])
            image_path = os.path.normpath(os.path.join(base_dir, raw["image"]))
            if not os.path.isfile(image_path):
                raise MissingImageError(
                    f"line {line_no}: image not found: {image_path}"
                )
            try:
                query = Query(
                    id=str(raw["id"]),
                    image=image_path,
                    question=str(raw["question"]),
                    choices=dict(raw["choices"]),
                    answer=raw.get("answer"),
                    tags=list(raw.get("tags", [])),
                )
            except ValueError as exc:
                raise ManifestParseError(line_no, str(exc))
            queries.append(query)
    return queries


def run_batch(queries, config: PipelineConfig, gateway, *,
              out_path: str | None = None, library: PromptLibrary | None = None,
              cancel_event: threading.Event | None = None) -> list[RunRecord]:
    """Run every query with at most `config.concurrency` in flight.

    Failures quarantine into failed records, so the batch always completes.
    Records stream to `out_path` as they finish (the partial file is always
    well-formed JSONL); on completion the file is rewritten sorted by id.
    The returned list is sorted by id regardless of completion order.
    """
    library = library if library is not None else PromptLibrary()
    write_lock = threading.Lock()
    out_fh = open(out_path, "w", encoding="utf-8") if out_path else None

    def one(query) -> RunRecord:
        if cancel_event is not None and cancel_event.is_set():
            return RunRecord(
                id=query.id, class_id=None, evidence=[], transcript_steps=0,
                option=None, abstained=False, cot="", correct=None,
                status="failed", error="failed-by-cancel", wall_ms=0.0,
                gateway_calls=0, gateway_attempts=0,
                config_digest=config.digest(), tags=list(query.tags),
            )
        try:
            return run_query(query, config, gateway, library)
        except Exception as exc:  # run_query quarantines; this is a belt
            return RunRecord(
                id=query.id, class_id=None, evidence=[], transcript_steps=0,
                option=None, abstained=False, cot="", correct=None,
                status="failed", error=f"internal: {exc}", wall_ms=0.0,
                gateway_calls=0, gateway_attempts=0,
                config_digest=config.digest(), tags=list(query.tags),
            )

    records: list[RunRecord] = []
    try:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            futures = [pool.submit(one, q) for q in queries]
            for fut in as_completed(futures):
                record = fut.result()
                records.append(record)
                if out_fh is not None:
                    with write_lock:
                        out_fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
                        out_fh.flush()
    finally:
        if out_fh is not None:
            out_fh.close()

    records.sort(key=lambda r: r.id)
    if out_path is not None:
        write_records(out_path, records)
    return records


def write_records(path: str, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


def load_records(path: str) -> list[RunRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(RunRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise ManifestParseError(line_no, f"bad record: {exc}")
    return records


@dataclass
class ScoreSummary:
    """Aggregate metrics over one batch of records."""

    total: int
    correct: int
    incorrect: int
    abstained: int
    failed: int
    pass_at_1: float
    mean_latency_ms: float
    per_class: dict
    per_tag: dict
    config_digest: str

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "correct": self.correct,
            "incorrect": self.incorrect,
            "abstained": self.abstained,
            "failed": self.failed,
            "pass_at_1": self.pass_at_1,
            "mean_latency_ms": self.mean_latency_ms,
            "per_class": self.per_class,
            "per_tag": self.per_tag,
            "config_digest": self.config_digest,
        }


UNCLASSIFIED = "unclassified"
UNTAGGED = "untagged"


def _pct(correct: int, total: int) -> float:
    return round(100.0 * correct / total, 2) if total else 0.0


def score(records) -> ScoreSummary:
    """Pass@1 accuracy with per-class and per-tag breakdowns.

    Abstentions and failures count as incorrect; class rows partition the
    total (tag rows may overlap when a record carries several tags).
    """
    records = list(records)
    if not records:
        raise EmptyRecordSetError("no records to score")
    total = len(records)
    correct = sum(1 for r in records if r.correct is True)
    abstained = sum(1 for r in records if r.status == "scored" and r.abstained)
    failed = sum(1 for r in records if r.status == "failed")
    incorrect = total - correct - abstained - failed

    per_class: dict = {}
    per_tag: dict = {}
    for record in records:
        class_key = record.class_id or UNCLASSIFIED
        bucket = per_class.setdefault(class_key, {"total": 0, "correct": 0})
        bucket["total"] += 1
        bucket["correct"] += 1 if record.correct is True else 0
        for tag in (record.tags or [UNTAGGED]):
            tag_bucket = per_tag.setdefault(tag, {"total": 0, "correct": 0})
            tag_bucket["total"] += 1
            tag_bucket["correct"] += 1 if record.correct is True else 0
    for bucket in list(per_class.values()) + list(per_tag.values()):
        bucket["accuracy"] = _pct(bucket["correct"], bucket["total"])

    digests = {r.config_digest for r in records}
    return ScoreSummary(
        total=total,
        correct=correct,
        incorrect=incorrect,
        abstained=abstained,
        failed=failed,
        pass_at_1=_pct(correct, total),
        mean_latency_ms=round(sum(r.wall_ms for r in records) / total, 3),
        per_class={k: per_class[k] for k in sorted(per_class)},
        per_tag={k: per_tag[k] for k in sorted(per_tag)},
        config_digest=digests.pop() if len(digests) == 1 else "mixed",
    )


def summary_to_bytes(summary: ScoreSummary) -> bytes:
    """Canonical summary.json bytes; cmd_score reproduces these exactly."""
    return (json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8")


def report(summary: ScoreSummary, records, fmt: str = "markdown") -> bytes:
    """Render a markdown or CSV report; byte-stable for identical inputs."""
    if fmt == "markdown":
        lines = [
            "# Benchmark report",
            "",
            f"- Pass@1: **{summary.pass_at_1:.2f}**",
            f"- Total: {summary.total} "
            f"(correct {summary.correct}, incorrect {summary.incorrect}, "
            f"abstained {summary.abstained}, failed {summary.failed})",
            f"- Mean latency: {summary.mean_latency_ms:.3f} ms",
            f"- Config digest: `{summary.config_digest}`",
            "",
            "| class | total | correct | accuracy |",
            "| --- | --- | --- | --- |",
        ]
        for key in sorted(summary.per_class):
            row = summary.per_class[key]
            lines.append(
                f"| {key} | {row['total']} | {row['correct']} | {row['accuracy']:.2f} |"
            )
        lines += ["", "| tag | total | correct | accuracy |",
                  "| --- | --- | --- | --- |"]
        for key in sorted(summary.per_tag):
            row = summary.per_tag[key]
            lines.append(
                f"| {key} | {row['total']} | {row['correct']} | {row['accuracy']:.2f} |"
            )
        return ("\n".join(lines) + "\n").encode("utf-8")

    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["class", "total", "correct", "accuracy"])
        for key in sorted(summary.per_class):
            row = summary.per_class[key]
            writer.writerow([key, row["total"], row["correct"], f"{row['accuracy']:.2f}"])
        writer.writerow(["overall", summary.total, summary.correct,
                         f"{summary.pass_at_1:.2f}"])
        return buf.getvalue().encode("utf-8")

    raise ValueError(f"unknown report format {fmt!r}; use markdown or csv")
