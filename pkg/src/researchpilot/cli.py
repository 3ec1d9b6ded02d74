"""Headless entrypoints: run a pipeline to files, serve the HTTP API, and
inspect report history.

Event lines (NDJSON) go to stderr; human-readable stage lines and the final
draft go to stdout. Exit codes: 0 success, 1 run or lookup failure, 2
configuration or usage failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import socket
import sys
from pathlib import Path

import uvicorn

from .agents import run_pipeline
from .api import create_app
from .config import DEFAULT_PORT, ENV_FILE, build_deps, load_settings
from .domain import (
    ConfigError,
    EventType,
    PipelineEvent,
    canonical_json,
    validate_runtime_config,
)
from .embeddings import Embedder
from .store import NotFound, ReportStore

_FLAG_ENV_NAMES = {
    "provider": "RP_PROVIDER",
    "model": "RP_MODEL",
    "api_key": "RP_API_KEY",
    "base_url": "RP_BASE_URL",
    "embedding_mode": "RP_EMBEDDING_MODE",
    "s2_api_key": "RP_S2_API_KEY",
    "s2_base_url": "RP_S2_BASE_URL",
    "arxiv_base_url": "RP_ARXIV_BASE_URL",
    "db": "RP_DB_PATH",
    "host": "RP_HOST",
    "port": "RP_PORT",
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--provider", choices=["mock", "openai_compatible", "anthropic"])
    parser.add_argument("--model")
    parser.add_argument("--api-key", dest="api_key")
    parser.add_argument("--base-url", dest="base_url")
    parser.add_argument(
        "--embedding-mode", dest="embedding_mode", choices=["remote", "local", "auto"]
    )
    parser.add_argument("--s2-api-key", dest="s2_api_key")
    parser.add_argument("--s2-base-url", dest="s2_base_url")
    parser.add_argument("--arxiv-base-url", dest="arxiv_base_url")
    parser.add_argument("--db", help="report database path")
    parser.add_argument("--env-file", dest="env_file", default=ENV_FILE)


def _settings_from_args(args: argparse.Namespace):
    overrides = {}
    for attr, env_name in _FLAG_ENV_NAMES.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[env_name] = str(value)
    return load_settings(overrides, env_file=args.env_file)


def _human_line(event: PipelineEvent) -> str | None:
    data = event.data
    if event.type is EventType.QUEUED:
        return "queued"
    if event.type is EventType.AGENT_STARTED:
        return f"{event.agent.value}: started"
    if event.type is EventType.AGENT_COMPLETED:
        agent = event.agent.value
        if agent == "search":
            return f"search: {data.get('paper_count')} papers, {data.get('warning_count')} warnings"
        if agent == "extraction":
            return f"extraction: {data.get('extraction_count')} papers extracted"
        if agent == "synthesis":
            return (
                f"synthesis: {data.get('consensus')} consensus, "
                f"{data.get('contradictions')} contradictions, {data.get('open_gaps')} gaps"
            )
        return f"writer: {data.get('draft_chars')} characters"
    if event.type is EventType.DONE:
        return f"done: report {data.get('report_id')}"
    if event.type is EventType.ERROR:
        return f"error at {data.get('stage')}: {data.get('message')}"
    return None


def cmd_run(args: argparse.Namespace) -> int:
    try:
        settings = _settings_from_args(args)
        validate_runtime_config(settings.config)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    store = ReportStore(settings.db_path)
    try:
        deps = build_deps(settings, settings.config, store)

        def emit(event: PipelineEvent) -> None:
            print(event.to_json_line(), file=sys.stderr, flush=True)
            line = _human_line(event)
            if line is not None:
                print(line, flush=True)

        report = asyncio.run(
            run_pipeline(args.question, settings.config, deps, emit)
        )
    finally:
        store.close()
    if report is None:
        return 1
    if args.json_path:
        Path(args.json_path).write_text(
            canonical_json(report.to_dict()) + "\n", encoding="utf-8"
        )
    if args.out:
        Path(args.out).write_text(report.draft_markdown + "\n", encoding="utf-8")
    else:
        print()
        print(report.draft_markdown)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        settings = _settings_from_args(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((settings.host, settings.port))
        port = probe.getsockname()[1]
    except OSError:
        print(f"port {settings.port} is already in use", file=sys.stderr)
        return 2
    finally:
        probe.close()
    app = create_app(settings)
    print(f"serving on http://{settings.host}:{port}", file=sys.stderr, flush=True)
    uvicorn.run(app, host=settings.host, port=port, log_level="warning")
    return 0


def cmd_reports(args: argparse.Namespace) -> int:
    try:
        settings = _settings_from_args(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    store = ReportStore(settings.db_path)
    try:
        if args.reports_command == "list":
            for summary in store.list_reports(args.limit):
                print(
                    json.dumps(
                        {
                            "report_id": summary.report_id,
                            "question": summary.question,
                            "created_at": summary.created_at,
                        },
                        ensure_ascii=False,
                    )
                )
            return 0
        if args.reports_command == "search":
            embed = Embedder(settings.config).embed
            for hit in store.search_reports(args.query, args.k, embed):
                print(
                    json.dumps(
                        {
                            "report_id": hit.report_id,
                            "question": hit.question,
                            "score": hit.score,
                            "created_at": hit.created_at,
                            "match_kind": hit.match_kind,
                        },
                        ensure_ascii=False,
                    )
                )
            return 0
        try:
            print(store.get_payload(args.report_id))
        except NotFound as exc:
            print(str(exc), file=sys.stderr)
            return 1
        return 0
    finally:
        store.close()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="researchpilot",
        description="Literature-review pipeline: retrieve, extract, synthesize, draft.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one research question end to end")
    run.add_argument("question")
    run.add_argument("--out", help="write the markdown draft here instead of stdout")
    run.add_argument(
        "--json", dest="json_path", help="also write the full report JSON here"
    )
    _add_config_flags(run)
    run.set_defaults(func=cmd_run)

    serve = sub.add_parser("serve", help="serve the HTTP API")
    serve.add_argument("--port", type=int, help=f"default {DEFAULT_PORT}")
    serve.add_argument("--host")
    _add_config_flags(serve)
    serve.set_defaults(func=cmd_serve)

    reports = sub.add_parser("reports", help="inspect report history")
    reports_sub = reports.add_subparsers(dest="reports_command", required=True)

    rl = reports_sub.add_parser("list", help="newest reports first")
    rl.add_argument("--limit", type=int, default=20)
    _add_config_flags(rl)
    rl.set_defaults(func=cmd_reports)

    rs = reports_sub.add_parser("search", help="search report history")
    rs.add_argument("query")
    rs.add_argument("--k", type=int, default=5)
    _add_config_flags(rs)
    rs.set_defaults(func=cmd_reports)

    rshow = reports_sub.add_parser("show", help="print one full report")
    rshow.add_argument("report_id")
    _add_config_flags(rshow)
    rshow.set_defaults(func=cmd_reports)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
