"""Command-line entry points: replay, generate, serve.

Exit codes for ``replay``: 0 when no CRITICAL alert fired, 2 when at least
one did, 1 on operational errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path

from driftwatch.errors import (
    ConfigError,
    CsvFormatError,
    ErrorBudgetExceeded,
    SnapshotError,
)
from driftwatch.ingestion import Engine, replay_csv, write_event_csv
from driftwatch.monitor import MonitorConfig
from driftwatch.report import ReportBundle
from driftwatch.synthetic import ScenarioSpec, config_for, generate, paper_shaped_scenario

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CRITICAL = 2

log = logging.getLogger("driftwatch")


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        config = MonitorConfig.load(args.config)
    except (OSError, ConfigError) as exc:
        return _fail(f"cannot load config: {exc}")
    engine = Engine(config)
    try:
        with open(args.input, newline="", encoding="utf-8") as fh:
            errors = replay_csv(fh, engine, error_budget=args.error_budget)
    except OSError as exc:
        return _fail(f"cannot read input: {exc}")
    except (CsvFormatError, ErrorBudgetExceeded) as exc:
        return _fail(str(exc))
    for err in errors:
        log.warning("%s", err)
    if engine.diagnostics.accepted == 0:
        return _fail("no events")
    bundle = ReportBundle.from_engine(engine)
    bundle.write(args.out)
    print(
        f"{len(bundle.windows)} window(s), {len(bundle.alerts)} alert(s), "
        f"{len(errors)} bad row(s); outputs in {args.out}"
    )
    return EXIT_CRITICAL if bundle.has_critical else EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    try:
        if args.paper_shaped:
            spec = paper_shaped_scenario(args.seed if args.seed is not None else 42)
        else:
            spec = ScenarioSpec.load(args.spec)
            if args.seed is not None:
                spec = ScenarioSpec(
                    args.seed, spec.models, spec.phases, spec.window_duration,
                    spec.origin, spec.class_label, spec.window_labels,
                )
    except (OSError, ConfigError) as exc:
        return _fail(f"invalid scenario: {exc}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        n = write_event_csv(generate(spec), fh)
    if args.write_config:
        Path(args.write_config).write_text(
            json.dumps(config_for(spec).to_dict(), indent=2) + "\n", encoding="utf-8"
        )
    print(f"wrote {n} events to {out}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from driftwatch.service import MonitorHTTPServer, MonitorService, parse_listen

    try:
        config = MonitorConfig.load(args.config)
        host, port = parse_listen(args.listen)
    except (OSError, ConfigError, ValueError) as exc:
        return _fail(str(exc))
    alert_log = Path(args.out) / "alerts.jsonl" if args.out else None
    try:
        service = MonitorService(config, args.snapshot, alert_log, fresh=args.fresh)
    except SnapshotError as exc:
        return _fail(f"{exc} (use --fresh to start with empty state)")
    try:
        server = MonitorHTTPServer((host, port), service)
    except OSError as exc:
        return _fail(f"cannot bind {host}:{port}: {exc}")

    def _stop(signum, frame):
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGTERM, _stop)
    signal.signal(signal.SIGINT, _stop)
    print(f"listening on {host}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    finally:
        server.server_close()
        service.save_snapshot()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftwatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("replay", help="replay a prediction CSV and write reports")
    p.add_argument("--input", required=True, help="CSV of prediction events")
    p.add_argument("--config", required=True, help="monitor config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--error-budget", type=int, default=100,
                   help="abort after this many bad CSV rows (default 100)")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("generate", help="write a synthetic prediction CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--paper-shaped", action="store_true",
                     help="six checkpoints sized like the retrospective cohort")
    src.add_argument("--spec", help="scenario spec JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--write-config", help="also write a matching monitor config JSON here")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("serve", help="run the HTTP ingestion service")
    p.add_argument("--config", required=True)
    p.add_argument("--listen", default="127.0.0.1:8080", help="host:port")
    p.add_argument("--snapshot", help="state snapshot path (restored on start, written on stop)")
    p.add_argument("--fresh", action="store_true", help="ignore an existing snapshot")
    p.add_argument("--out", help="directory for the append-only alerts.jsonl")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
