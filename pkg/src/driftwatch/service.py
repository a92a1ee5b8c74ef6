"""HTTP ingestion endpoint.

Requests may arrive concurrently, but every mutation of the engine happens
under one lock, so events are applied in a single total order.
"""
from __future__ import annotations

import json
import logging
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from driftwatch.events import PredictionEvent
from driftwatch.ingestion import Engine, StateSnapshot, restore, snapshot
from driftwatch.monitor import Alert, MonitorConfig
from driftwatch.report import alert_line

logger = logging.getLogger(__name__)

MAX_BODY_BYTES = 16 * 1024 * 1024


class MonitorService:
    """Engine plus persistence: snapshot on close, append-only alert log."""

    def __init__(
        self,
        config: MonitorConfig,
        snapshot_path: str | Path | None = None,
        alert_log: str | Path | None = None,
        fresh: bool = False,
    ) -> None:
        self.snapshot_path = Path(snapshot_path) if snapshot_path else None
        self.alert_log = Path(alert_log) if alert_log else None
        self._lock = threading.Lock()
        if self.snapshot_path and self.snapshot_path.exists() and not fresh:
            # Raises ConfigMismatchError / SnapshotError; callers decide whether to start fresh.
            self.engine = restore(
                StateSnapshot.load(self.snapshot_path), config, on_alert=self._log_alert
            )
            logger.info("restored state from %s", self.snapshot_path)
        else:
            self.engine = Engine(config, on_alert=self._log_alert)

    def _log_alert(self, alert: Alert, class_label: str) -> None:
        if self.alert_log is None:
            return
        self.alert_log.parent.mkdir(parents=True, exist_ok=True)
        with open(self.alert_log, "a", encoding="utf-8") as fh:
            fh.write(alert_line(alert, class_label))

    def submit(self, payload) -> tuple[int, dict]:
        """Validate and apply one JSON event or a JSON array of them.

        The batch is all-or-nothing: any invalid record rejects the request.
        """
        records = payload if isinstance(payload, list) else [payload]
        events, errors = [], []
        for i, rec in enumerate(records):
            if not isinstance(rec, dict):
                errors.append({"index": i, "error": "record must be a JSON object"})
                continue
            try:
                events.append(PredictionEvent.from_dict(rec))
            except ValueError as exc:
                errors.append({"index": i, "error": str(exc)})
        if errors:
            return HTTPStatus.BAD_REQUEST, {"errors": errors}
        with self._lock:
            before = self.engine.diagnostics.accepted
            alerts = self.engine.ingest_many(events)
            accepted = self.engine.diagnostics.accepted - before
        return HTTPStatus.ACCEPTED, {
            "received": len(events),
            "accepted": accepted,
            "alerts": [a.to_dict() for a in alerts],
        }

    def status(self) -> dict:
        with self._lock:
            return self.engine.status()

    def readings(self, window: str | None = None) -> list[dict]:
        with self._lock:
            pairs = self.engine.readings()
        return [
            {"class_label": label, **r.to_dict()}
            for label, r in pairs
            if window is None or r.window.label == window
        ]

    def alert_lines(self) -> str:
        with self._lock:
            return "".join(alert_line(a, label) for label, a in self.engine.alerts())

    def save_snapshot(self) -> None:
        if self.snapshot_path is None:
            return
        with self._lock:
            snap = snapshot(self.engine)
        snap.save(self.snapshot_path)
        logger.info("wrote snapshot to %s", self.snapshot_path)


class _Handler(BaseHTTPRequestHandler):
    server: "MonitorHTTPServer"

    def log_message(self, fmt, *args):  # route through logging instead of stderr
        logger.debug("%s - " + fmt, self.address_string(), *args)

    def _send(self, status: int, body: bytes, content_type: str = "application/json") -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, doc) -> None:
        self._send(status, json.dumps(doc, sort_keys=True).encode())

    def do_POST(self):
        url = urlparse(self.path)
        if url.path != "/v1/predictions":
            return self._send_json(HTTPStatus.NOT_FOUND, {"error": "not found"})
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY_BYTES:
            return self._send_json(HTTPStatus.REQUEST_ENTITY_TOO_LARGE, {"error": "body too large"})
        try:
            payload = json.loads(self.rfile.read(length) or b"null")
        except json.JSONDecodeError as exc:
            return self._send_json(
                HTTPStatus.BAD_REQUEST, {"errors": [{"index": None, "error": f"invalid JSON: {exc}"}]}
            )
        status, doc = self.server.service.submit(payload)
        self._send_json(status, doc)

    def do_GET(self):
        url = urlparse(self.path)
        service = self.server.service
        if url.path == "/v1/status":
            return self._send_json(HTTPStatus.OK, service.status())
        if url.path == "/v1/readings":
            window = parse_qs(url.query).get("window", [None])[0]
            return self._send_json(HTTPStatus.OK, service.readings(window))
        if url.path == "/v1/alerts":
            return self._send(
                HTTPStatus.OK, service.alert_lines().encode(), "application/x-ndjson"
            )
        self._send_json(HTTPStatus.NOT_FOUND, {"error": "not found"})


class MonitorHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], service: MonitorService) -> None:
        super().__init__(address, _Handler)
        self.service = service


def parse_listen(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"listen address must be host:port, got {addr!r}")
    return host or "127.0.0.1", int(port)
