"""Command-line entry point.

Subcommands:

    classify    run a classification pipeline over a manifest
    detect      run a detection pipeline over a manifest
    inspect     print manifest statistics
    report      regenerate report files from a finished run directory
    mock-serve  serve the wire contract from a fixture file

Exit codes: 0 success, 1 configuration or usage error, 2 run completed
but some samples failed (reports are still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import backends, metrics, mockserver, pipelines, prompts
from .backends import BackendEndpoint, EndpointKind, HttpBackend, RecordingBackend, ReplayBackend
from .datasets import (
    CLASSIFICATION_HEADER,
    ManifestError,
    class_counts,
    load_classification_manifest,
    load_detection_manifest,
)
from .postprocess import AssociationConfig, AssocMetric

TOKEN_ENV_VAR = "VLMBENCH_TOKEN"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SAMPLE_FAILURES = 2

_HELP_WIDTH = 100


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for
    completed-with-failures, so usage errors exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _formatter(prog: str) -> argparse.HelpFormatter:
    return argparse.HelpFormatter(prog, width=_HELP_WIDTH)


def _raw_formatter(prog: str) -> argparse.HelpFormatter:
    return argparse.RawDescriptionHelpFormatter(prog, width=_HELP_WIDTH)


_DESCRIPTION = """\
Zero-shot vision-language benchmark harness.

Exit codes: 0 success, 1 configuration or usage error, 2 run completed
but some samples failed (reports are still written)."""


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vlmbench", description=_DESCRIPTION, formatter_class=_raw_formatter)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    classify = sub.add_parser(
        "classify",
        help="run a classification pipeline",
        formatter_class=_formatter,
    )
    classify.add_argument("--task", choices=["congestion", "crack"], required=True,
                          help="classification task")
    classify.add_argument("--pipeline", choices=["similarity", "cascade", "direct"],
                          required=True, help="pipeline variant")
    classify.add_argument("--prompt", required=True, help="prompt catalog id (e.g. A5, P2-F2)")
    classify.add_argument("--manifest", required=True, help="path,label manifest CSV")
    classify.add_argument("--out", required=True, help="output directory")
    classify.add_argument("--endpoint", default=None, help="backend base URL (live/record mode)")
    _add_run_flags(classify)

    detect = sub.add_parser(
        "detect",
        help="run a helmet-detection pipeline",
        formatter_class=_formatter,
    )
    detect.add_argument("--variant", choices=["postprocess", "textual", "crop-chat"],
                        required=True, help="detection pipeline variant")
    detect.add_argument("--manifest", required=True, help="detection manifest CSV")
    detect.add_argument("--out", required=True, help="output directory")
    detect.add_argument("--endpoint", default=None, help="detector base URL (live/record mode)")
    detect.add_argument("--chat-endpoint", default=None,
                        help="chat backend base URL (crop-chat only)")
    detect.add_argument("--prompt", default="llava-helmet",
                        help="crop-chat prompt id (default: llava-helmet)")
    detect.add_argument("--followup", default="llava-helmet-followup",
                        help="crop-chat follow-up prompt id, or 'none' to parse the "
                             "first answer directly (default: llava-helmet-followup)")
    detect.add_argument("--assoc-metric", choices=["iomin", "iou"], default="iomin",
                        help="person/motorbike overlap metric (default: iomin)")
    detect.add_argument("--assoc-thresh", type=float, default=0.6,
                        help="association threshold, strict greater-than (default: 0.6)")
    detect.add_argument("--nms-thresh", type=float, default=0.5,
                        help="NMS IoU threshold (default: 0.5)")
    detect.add_argument("--score-thresh", type=float, default=0.1,
                        help="detector score threshold (default: 0.1)")
    detect.add_argument("--match-iou", type=float, default=0.5,
                        help="IoU threshold for scoring matches (default: 0.5)")
    detect.add_argument("--crop-pad", type=float, default=0.0,
                        help="padding in pixels around crops (default: 0)")
    _add_run_flags(detect)

    inspect = sub.add_parser("inspect", help="print manifest statistics",
                             formatter_class=_formatter)
    inspect.add_argument("manifest", help="manifest CSV (type auto-detected from header)")
    inspect.add_argument("--task", choices=["congestion", "crack"], default="congestion",
                         help="label words used by classification manifests "
                              "(default: congestion)")

    report = sub.add_parser("report", help="regenerate reports from results.jsonl",
                            formatter_class=_formatter)
    report.add_argument("run_dir", help="output directory of a previous run")

    serve = sub.add_parser("mock-serve", help="serve canned responses over the wire contract",
                           formatter_class=_formatter)
    serve.add_argument("--fixture", required=True,
                       help="fixture file (.json path-keyed or .jsonl record store)")
    serve.add_argument("--host", default="127.0.0.1", help="bind address (default: 127.0.0.1)")
    serve.add_argument("--port", type=int, default=8008, help="port (default: 8008)")

    return parser


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--record", default=None, metavar="STORE",
                        help="record every exchange to this JSONL store")
    parser.add_argument("--replay", default=None, metavar="STORE",
                        help="replay exchanges from this JSONL store (no network)")
    parser.add_argument("--label", default=None,
                        help="model label for report rows (default: pipeline name)")
    parser.add_argument("--max-inflight", type=int, default=4,
                        help="max concurrent samples (default: 4)")
    parser.add_argument("--timeout", type=float, default=30.0,
                        help="per-request timeout in seconds (default: 30)")
    parser.add_argument("--retries", type=int, default=2,
                        help="retries per request after the first attempt (default: 2)")
    parser.add_argument("--no-benchmarks", action="store_true",
                        help="omit the paper-reported baseline rows from reports")


class ConfigError(Exception):
    pass


def _resolve_mode(args) -> str:
    if args.replay and (args.record or args.endpoint):
        raise ConfigError("--replay cannot be combined with --endpoint or --record")
    if args.replay:
        return "replay"
    if not args.endpoint:
        raise ConfigError("--endpoint is required in live/record mode")
    return "record" if args.record else "live"


def _backend_for(args, mode: str, kind: EndpointKind, base_url: str | None,
                 recorder: backends.ExchangeStore | None) -> backends.Backend:
    if mode == "replay":
        return ReplayBackend(args.replay)
    endpoint = BackendEndpoint(
        kind=kind,
        base_url=base_url,
        timeout=args.timeout,
        max_retries=args.retries,
        token=os.environ.get(TOKEN_ENV_VAR),
    )
    backend = HttpBackend(endpoint)
    if not backend.health():
        raise ConfigError(f"endpoint unreachable or unhealthy: {base_url}")
    if mode == "record":
        return RecordingBackend(backend, recorder)
    return backend


def _write_outputs(out_dir: Path, run_report: metrics.RunReport,
                   results: list[pipelines.SampleResult], config: dict,
                   include_benchmarks: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    if include_benchmarks:
        run_report.rows = run_report.rows + metrics.benchmark_rows(run_report.task)
    for name, fmt in (("report.csv", "csv"), ("report.md", "markdown"), ("report.json", "json")):
        with open(out_dir / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(metrics.emit_report([run_report], fmt))
    with open(out_dir / "results.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(pipelines.results_to_jsonl(results))
    with open(out_dir / "run_config.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(config, indent=2, sort_keys=True) + "\n")


def _record_store(path: str | None) -> backends.ExchangeStore | None:
    if path is None:
        return None
    store_path = Path(path)
    store_path.parent.mkdir(parents=True, exist_ok=True)
    store_path.write_text("")  # a fresh store per run; retries never duplicate entries
    return backends.ExchangeStore(store_path)


def cmd_classify(args) -> int:
    mode = _resolve_mode(args)
    task = prompts.Task(args.task)
    entry = prompts.catalog_lookup(task, args.prompt)
    wanted_type = {
        "similarity": prompts.LabelPair,
        "cascade": prompts.CascadeSpec,
        "direct": prompts.DirectPrompt,
    }[args.pipeline]
    if not isinstance(entry, wanted_type):
        valid = [
            key for key in prompts.valid_ids(task)
            if isinstance(prompts.catalog_lookup(task, key), wanted_type)
        ]
        raise ConfigError(
            f"prompt {args.prompt!r} is not usable with --pipeline {args.pipeline}; "
            f"valid ids: {', '.join(valid)}"
        )

    manifest = load_classification_manifest(args.manifest, task)
    kind = (EndpointKind.SIMILARITY_CLASSIFIER if args.pipeline == "similarity"
            else EndpointKind.VISUAL_CHAT)
    recorder = _record_store(args.record)
    backend = _backend_for(args, mode, kind, args.endpoint, recorder)

    if args.pipeline == "similarity":
        results = pipelines.run_similarity_classification(
            manifest, backend, entry, max_inflight=args.max_inflight)
    elif args.pipeline == "cascade":
        results = pipelines.run_cascade_classification(
            manifest, backend, entry, max_inflight=args.max_inflight)
    else:
        results = pipelines.run_direct_chat_classification(
            manifest, backend, entry, max_inflight=args.max_inflight)

    matrix, class_report = metrics.score_classification(results, manifest)
    label = args.label or args.pipeline
    run_report = metrics.classification_run_report(
        task.value, args.pipeline, label, entry.id, matrix, class_report)
    config = {
        "command": "classify",
        "task": task.value,
        "pipeline": args.pipeline,
        "prompt": entry.id,
        "label": label,
        "manifest": args.manifest,
        "mode": mode,
        "endpoint": args.endpoint,
        "record": args.record,
        "replay": args.replay,
        "max_inflight": args.max_inflight,
        "timeout": args.timeout,
        "retries": args.retries,
        "benchmarks": not args.no_benchmarks,
    }
    _write_outputs(Path(args.out), run_report, results, config, not args.no_benchmarks)
    failures = sum(1 for r in results if r.failure is not None)
    print(f"{len(results)} samples, {failures} failures -> {args.out}")
    return EXIT_SAMPLE_FAILURES if failures else EXIT_OK


def cmd_detect(args) -> int:
    mode = _resolve_mode(args)
    if args.variant == "crop-chat" and mode != "replay" and not args.chat_endpoint:
        raise ConfigError("--variant crop-chat requires --chat-endpoint")

    manifest = load_detection_manifest(args.manifest)
    cfg = AssociationConfig(
        metric=AssocMetric.IOU if args.assoc_metric == "iou" else AssocMetric.OVERLAP_OVER_MIN,
        assoc_threshold=args.assoc_thresh,
        nms_threshold=args.nms_thresh,
    )
    recorder = _record_store(args.record)
    det_backend = _backend_for(args, mode, EndpointKind.OPEN_VOCAB_DETECTOR,
                               args.endpoint, recorder)

    if args.variant == "postprocess":
        results = pipelines.run_detection_postprocess(
            manifest, det_backend, cfg, args.score_thresh, max_inflight=args.max_inflight)
        prompt_id = None
    elif args.variant == "textual":
        results = pipelines.run_detection_textual(
            manifest, det_backend, prompts.textual_detection_prompts(),
            args.score_thresh, nms_threshold=args.nms_thresh,
            max_inflight=args.max_inflight)
        prompt_id = "textual-1-3"
    else:
        prompt = prompts.catalog_lookup(prompts.Task.HELMET, args.prompt)
        followup = None
        if args.followup.lower() != "none":
            followup = prompts.catalog_lookup(prompts.Task.HELMET, args.followup)
        if not isinstance(prompt, prompts.DirectPrompt) or not isinstance(
            followup, (prompts.DirectPrompt, type(None))
        ):
            raise ConfigError("crop-chat prompts must be direct chat prompts")
        chat_backend = _backend_for(args, mode, EndpointKind.VISUAL_CHAT,
                                    args.chat_endpoint, recorder)
        results = pipelines.run_detection_crop_chat(
            manifest, det_backend, chat_backend, cfg, args.score_thresh,
            args.crop_pad, prompt, followup, max_inflight=args.max_inflight)
        prompt_id = prompt.id if followup is None else f"{prompt.id}+{followup.id}"

    detection_report = metrics.score_detection(results, manifest, args.match_iou)
    label = args.label or f"detect-{args.variant}"
    run_report = metrics.detection_run_report(
        "helmet", args.variant, label, prompt_id, detection_report)
    config = {
        "command": "detect",
        "variant": args.variant,
        "prompt": prompt_id,
        "label": label,
        "manifest": args.manifest,
        "mode": mode,
        "endpoint": args.endpoint,
        "chat_endpoint": args.chat_endpoint,
        "record": args.record,
        "replay": args.replay,
        "assoc_metric": args.assoc_metric,
        "assoc_thresh": args.assoc_thresh,
        "nms_thresh": args.nms_thresh,
        "score_thresh": args.score_thresh,
        "match_iou": args.match_iou,
        "crop_pad": args.crop_pad,
        "max_inflight": args.max_inflight,
        "timeout": args.timeout,
        "retries": args.retries,
        "benchmarks": not args.no_benchmarks,
    }
    _write_outputs(Path(args.out), run_report, results, config, not args.no_benchmarks)
    failures = sum(1 for r in results if r.failure is not None)
    print(f"{len(results)} samples, {failures} failures -> {args.out}")
    return EXIT_SAMPLE_FAILURES if failures else EXIT_OK


def _detect_manifest_kind(path: Path) -> str:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
    return "classification" if header == ",".join(CLASSIFICATION_HEADER) else "detection"


def cmd_inspect(args) -> int:
    path = Path(args.manifest)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    if _detect_manifest_kind(path) == "classification":
        manifest = load_classification_manifest(path, prompts.Task(args.task))
        counts = class_counts(manifest)
        print(f"{len(manifest)} samples, {counts['positive']} positive, "
              f"{counts['negative']} negative")
    else:
        manifest = load_detection_manifest(path)
        counts = class_counts(manifest)
        total_boxes = sum(counts.values())
        per_class = ", ".join(f"{name} {counts[name]}" for name in counts)
        print(f"{len(manifest)} samples, {total_boxes} boxes ({per_class})")
    if len(manifest) == 0:
        print("warning: manifest has no samples", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    config_path = run_dir / "run_config.json"
    results_path = run_dir / "results.jsonl"
    if not config_path.is_file() or not results_path.is_file():
        raise ConfigError(f"{run_dir} is not a run directory "
                          "(run_config.json / results.jsonl missing)")
    config = json.loads(config_path.read_text("utf-8"))
    results = pipelines.results_from_jsonl(results_path.read_text("utf-8"))

    if config["command"] == "classify":
        manifest = load_classification_manifest(config["manifest"], config["task"])
        matrix, class_report = metrics.score_classification(results, manifest)
        run_report = metrics.classification_run_report(
            config["task"], config["pipeline"], config["label"], config["prompt"],
            matrix, class_report)
    else:
        manifest = load_detection_manifest(config["manifest"])
        detection_report = metrics.score_detection(results, manifest, config["match_iou"])
        run_report = metrics.detection_run_report(
            "helmet", config["variant"], config["label"], config["prompt"], detection_report)

    _write_outputs(run_dir, run_report, results, config, config.get("benchmarks", True))
    print(f"reports regenerated in {run_dir}")
    return EXIT_OK


def cmd_mock_serve(args) -> int:
    try:
        server = mockserver.make_server(args.fixture, args.host, args.port)
    except OSError as exc:
        print(f"vlmbench mock-serve: cannot bind {args.host}:{args.port}: {exc}",
              file=sys.stderr)
        return EXIT_CONFIG
    print(f"serving {args.fixture} on http://{args.host}:{server.server_port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {
        "classify": cmd_classify,
        "detect": cmd_detect,
        "inspect": cmd_inspect,
        "report": cmd_report,
        "mock-serve": cmd_mock_serve,
    }[args.command]
    try:
        return handler(args)
    except (ConfigError, ManifestError, mockserver.FixtureError,
            prompts.PromptLookupError, ValueError, OSError) as exc:
        print(f"vlmbench {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
