"""Command-line entry point.

Subcommands: run (batch evaluation), classify (route one item), tools-apply
(run one image tool for inspection), score and report (recompute metrics
from a records file).  Exit codes: 0 success, 1 the run finished but some
records failed, 2 usage or configuration error.

Live API runs require both --live and the DDP_API_KEYS environment variable;
without a mock script and without --live, run/classify refuse to start so a
typo can never spend money.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import threading

from . import harness, pipeline
from .critic import PromptLibrary
from .errors import DdpError, EmptyRecordSetError, ManifestError
from .gateway import LiveGateway, MockGateway, keys_from_env
from .raster import decode_image, downsample_max_dim, encode_image, gaussian_smooth
from .taxonomy import ALL_TOOLS, classify
from .tool_manager import execute_tool_call, validate_params


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _load_mock(path: str) -> MockGateway:
    """Mock script file: a JSON array (ordered replies) or an object with
    'ordered', 'by_digest', and 'strict' keys."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if isinstance(raw, list):
        return MockGateway(ordered=raw)
    if isinstance(raw, dict):
        extra = set(raw) - {"ordered", "by_digest", "strict"}
        if extra:
            raise ValueError(f"unknown mock script keys: {sorted(extra)}")
        return MockGateway(
            ordered=raw.get("ordered"),
            by_digest=raw.get("by_digest"),
            strict=bool(raw.get("strict", False)),
        )
    raise ValueError("mock script must be a JSON array or object")


def _make_gateway(args, config: pipeline.PipelineConfig):
    """Build the gateway from --mock/--live; returns (gateway, error_message)."""
    if args.mock and args.live:
        return None, "--mock and --live are mutually exclusive"
    if args.mock:
        try:
            return _load_mock(args.mock), None
        except (OSError, ValueError) as exc:
            return None, f"cannot load mock script: {exc}"
    if args.live:
        keys = keys_from_env(os.environ)
        if not keys:
            return None, "--live requires credentials in DDP_API_KEYS"
        try:
            return LiveGateway(config.gateway, keys), None
        except DdpError as exc:
            return None, str(exc)
    return None, "choose a backend: --mock SCRIPT or --live"


def _load_config(args) -> pipeline.PipelineConfig:
    if getattr(args, "config", None):
        config = pipeline.PipelineConfig.from_file(args.config)
    else:
        config = pipeline.PipelineConfig()
    if getattr(args, "concurrency", None):
        config.concurrency = args.concurrency
    if getattr(args, "no_tools", False):
        config.tools = False
    if getattr(args, "no_prompts", False):
        config.prompts = False
    if getattr(args, "no_degradation", False):
        config.degradation = False
    config.validate()
    return config


def cmd_run(args) -> int:
    try:
        config = _load_config(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        return _fail(f"bad config: {exc}")
    try:
        queries = harness.load_manifest(args.manifest)
    except (OSError, ManifestError) as exc:
        return _fail(f"bad manifest: {exc}")
    gateway, err = _make_gateway(args, config)
    if err:
        return _fail(err)

    os.makedirs(args.out, exist_ok=True)
    cancel = threading.Event()

    def drain(signum, frame):
        cancel.set()

    previous = []
    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            previous.append((sig, signal.signal(sig, drain)))
        except ValueError:  # not on the main thread
            pass
    try:
        records = harness.run_batch(
            queries, config, gateway,
            out_path=os.path.join(args.out, "records.jsonl"),
            cancel_event=cancel,
        )
    finally:
        for sig, handler in previous:
            signal.signal(sig, handler)

    summary = harness.score(records)
    with open(os.path.join(args.out, "summary.json"), "wb") as fh:
        fh.write(harness.summary_to_bytes(summary))
    with open(os.path.join(args.out, "report.md"), "wb") as fh:
        fh.write(harness.report(summary, records, "markdown"))
    print(f"Pass@1: {summary.pass_at_1:.2f}")
    return 1 if summary.failed else 0


def cmd_classify(args) -> int:
    try:
        config = _load_config(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        return _fail(f"bad config: {exc}")
    gateway, err = _make_gateway(args, config)
    if err:
        return _fail(err)
    try:
        with open(args.image, "rb") as fh:
            img = decode_image(fh.read())
    except (OSError, DdpError) as exc:
        return _fail(f"cannot read image: {exc}")
    task = classify(gaussian_smooth(img, config.sigma1), args.question, gateway)
    print(task.class_id)
    return 0


_APPLY_TOOLS = tuple(sorted(ALL_TOOLS)) + ("downsample",)


def _tool_params_from_flags(args) -> dict:
    """Translate tools-apply flags into the tool's JSON parameter shape."""
    tool = args.tool
    rect = {k: getattr(args, k) for k in ("x", "y", "w", "h")
            if getattr(args, k) is not None}
    if tool == "crop":
        return rect
    if tool == "white_mask":
        return {"keep": rect}
    if tool == "red_box":
        out = dict(rect)
        if args.thickness is not None:
            out["thickness"] = args.thickness
        return out
    if tool == "cartesian_auxline":
        lines = [{"orientation": "horizontal", "position": y} for y in args.hline]
        lines += [{"orientation": "vertical", "position": x} for x in args.vline]
        if args.thickness is not None:
            for line in lines:
                line["thickness"] = args.thickness
        return {"lines": lines}
    if tool == "polar_auxline":
        if args.center is None:
            raise ValueError("polar_auxline requires --center X,Y")
        cx, _, cy = args.center.partition(",")
        params = {
            "center": {"x": int(cx), "y": int(cy)},
            "radii": args.radius,
            "angles": args.angle,
        }
        if args.angle:
            params["spoke_length"] = args.spoke_length or 0
        if args.thickness is not None:
            params["thickness"] = args.thickness
        return params
    if tool == "blur_mask":
        params = {"keep": rect if rect else None}
        if args.sigma is not None:
            params["sigma"] = args.sigma
        return params
    if tool == "enhance_contrast":
        params = {}
        if args.p_low is not None:
            params["p_low"] = args.p_low
        if args.p_high is not None:
            params["p_high"] = args.p_high
        return params
    raise ValueError(f"unhandled tool {tool}")


def cmd_tools_apply(args) -> int:
    if args.tool not in _APPLY_TOOLS:
        return _fail(
            f"unknown tool {args.tool!r}; valid tools: {', '.join(_APPLY_TOOLS)}"
        )
    try:
        with open(args.image, "rb") as fh:
            img = decode_image(fh.read())
    except (OSError, DdpError) as exc:
        return _fail(f"cannot read image: {exc}")

    try:
        if args.tool == "downsample":
            if args.max_dim is None:
                return _fail("downsample requires --max-dim")
            out = downsample_max_dim(img, args.max_dim)
        else:
            params = _tool_params_from_flags(args)
            clean, schema_err = validate_params(args.tool, params)
            if schema_err:
                return _fail(f"invalid parameters: {schema_err}")
            out = execute_tool_call(img, args.tool, clean)
    except (DdpError, ValueError) as exc:
        return _fail(str(exc))

    with open(args.out, "wb") as fh:
        fh.write(encode_image(out))
    print(f"{out.width}x{out.height}")
    return 0


def cmd_score(args) -> int:
    try:
        records = harness.load_records(args.records)
        summary = harness.score(records)
    except (OSError, ManifestError) as exc:
        return _fail(f"bad records file: {exc}")
    except EmptyRecordSetError as exc:
        return _fail(str(exc))
    sys.stdout.buffer.write(harness.summary_to_bytes(summary))
    return 0


def cmd_report(args) -> int:
    try:
        records = harness.load_records(args.records)
        summary = harness.score(records)
    except (OSError, ManifestError) as exc:
        return _fail(f"bad records file: {exc}")
    except EmptyRecordSetError as exc:
        return _fail(str(exc))
    fmt = "markdown" if args.format == "md" else args.format
    document = harness.report(summary, records, fmt)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(document)
    else:
        sys.stdout.buffer.write(document)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddp", description="Degradation-driven VQA pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a benchmark manifest")
    p_run.add_argument("manifest")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--config", help="pipeline config JSON")
    p_run.add_argument("--mock", help="scripted mock reply file")
    p_run.add_argument("--live", action="store_true",
                       help="use the live API (needs DDP_API_KEYS)")
    p_run.add_argument("--concurrency", type=int)
    p_run.add_argument("--no-tools", action="store_true")
    p_run.add_argument("--no-prompts", action="store_true")
    p_run.add_argument("--no-degradation", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_cls = sub.add_parser("classify", help="classify a single image/question")
    p_cls.add_argument("image")
    p_cls.add_argument("question")
    p_cls.add_argument("--config")
    p_cls.add_argument("--mock")
    p_cls.add_argument("--live", action="store_true")
    p_cls.set_defaults(func=cmd_classify)

    p_tool = sub.add_parser("tools-apply", help="apply one image tool")
    p_tool.add_argument("image")
    p_tool.add_argument("tool", help=f"one of: {', '.join(_APPLY_TOOLS)}")
    p_tool.add_argument("--out", required=True, help="output PNG path")
    p_tool.add_argument("--x", type=int)
    p_tool.add_argument("--y", type=int)
    p_tool.add_argument("--w", type=int)
    p_tool.add_argument("--h", type=int)
    p_tool.add_argument("--thickness", type=int)
    p_tool.add_argument("--sigma", type=float)
    p_tool.add_argument("--max-dim", type=int)
    p_tool.add_argument("--hline", type=int, action="append", default=[],
                        help="horizontal line row (repeatable)")
    p_tool.add_argument("--vline", type=int, action="append", default=[],
                        help="vertical line column (repeatable)")
    p_tool.add_argument("--center", help="polar center as X,Y")
    p_tool.add_argument("--radius", type=float, action="append", default=[])
    p_tool.add_argument("--angle", type=float, action="append", default=[])
    p_tool.add_argument("--spoke-length", type=int)
    p_tool.add_argument("--p-low", type=float)
    p_tool.add_argument("--p-high", type=float)
    p_tool.set_defaults(func=cmd_tools_apply)

    p_score = sub.add_parser("score", help="recompute the summary from records")
    p_score.add_argument("records")
    p_score.set_defaults(func=cmd_score)

    p_rep = sub.add_parser("report", help="render a report from records")
    p_rep.add_argument("records")
    p_rep.add_argument("--format", choices=("markdown", "md", "csv"),
                       default="markdown")
    p_rep.add_argument("--out")
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
