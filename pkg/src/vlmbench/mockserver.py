"""Deterministic mock backend server for self-contained runs and tests.

Serves the full wire contract from an immutable fixture file. Two fixture
flavors are understood:

* ``.jsonl`` - a record store as written by record mode; responses are
  looked up by request digest, so a recorded session can be re-served.
* ``.json``  - canned responses keyed by sample image path (matched by
  image content), with optional defaults and prompt-substring rules for
  /v1/generate. Paths are resolved relative to the fixture file.

Unknown requests get HTTP 404 with the request digest in the body.
"""

from __future__ import annotations

import base64
import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any

from .backends import (
    CLASSIFY_PATH,
    DETECT_PATH,
    GENERATE_PATH,
    HEALTH_PATH,
    ExchangeStore,
    image_sha,
    request_digest,
)

_ENDPOINT_KEYS = {CLASSIFY_PATH: "classify", GENERATE_PATH: "generate", DETECT_PATH: "detect"}


class FixtureError(ValueError):
    """Malformed mock fixture file."""


class MockFixture:
    """Immutable lookup table from requests to canned responses."""

    def __init__(
        self,
        by_digest: dict[str, dict[str, Any]] | None = None,
        by_image: dict[str, dict[str, Any]] | None = None,
        defaults: dict[str, Any] | None = None,
    ):
        self._by_digest = by_digest or {}
        self._by_image = by_image or {}
        self._defaults = defaults or {}

    @classmethod
    def load(cls, path: str | Path) -> "MockFixture":
        path = Path(path)
        if not path.is_file():
            raise FixtureError(f"fixture not found: {path}")
        if path.suffix == ".jsonl":
            try:
                exchanges = ExchangeStore.load(path)
            except (json.JSONDecodeError, KeyError) as exc:
                raise FixtureError(f"{path}: bad record store: {exc}") from None
            return cls(by_digest={d: e.response for d, e in exchanges.items()})
        try:
            raw = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise FixtureError(f"{path}: not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise FixtureError(f"{path}: fixture must be a JSON object")

        root = path.parent / raw.get("root", ".")
        by_image: dict[str, dict[str, Any]] = {}
        defaults: dict[str, Any] = {}
        for endpoint_path, key in _ENDPOINT_KEYS.items():
            entries = raw.get(key, {})
            if not isinstance(entries, dict):
                raise FixtureError(f"{path}: {key!r} must map image paths to responses")
            for rel, response in entries.items():
                image_file = root / rel
                if not image_file.is_file():
                    raise FixtureError(f"{path}: {key}: image not found: {rel}")
                sha = image_sha(image_file.read_bytes())
                by_image[f"{endpoint_path}:{sha}"] = response
            if f"{key}_default" in raw:
                defaults[endpoint_path] = raw[f"{key}_default"]
        return cls(by_image=by_image, defaults=defaults)

    @staticmethod
    def _apply_generate_rules(rules: Any, prompt: str) -> dict[str, Any] | None:
        if isinstance(rules, dict):
            return rules
        for rule in rules:
            needle = rule.get("if_prompt_contains")
            if needle is None or needle in prompt:
                return {"text": rule["text"]}
        return None

    @staticmethod
    def _apply_detect_rules(rules: Any, queries: list[str]) -> dict[str, Any] | None:
        if isinstance(rules, dict):
            return rules
        for rule in rules:
            needle = rule.get("if_query_contains")
            if needle is None or any(needle in q for q in queries):
                return {"detections": rule["detections"]}
        return None

    def respond(self, endpoint_path: str, request: dict[str, Any]) -> dict[str, Any] | None:
        digest = request_digest(endpoint_path, request)
        if digest in self._by_digest:
            return self._by_digest[digest]
        if endpoint_path not in _ENDPOINT_KEYS:
            return None
        try:
            image = base64.b64decode(request["image_b64"], validate=True)
        except (KeyError, TypeError, ValueError):
            return None
        entry = self._by_image.get(f"{endpoint_path}:{image_sha(image)}")
        if entry is None:
            entry = self._defaults.get(endpoint_path)
        if entry is None:
            return None
        if endpoint_path == GENERATE_PATH:
            return self._apply_generate_rules(entry, request.get("prompt", ""))
        if endpoint_path == DETECT_PATH:
            return self._apply_detect_rules(entry, request.get("queries", []))
        return entry


def _make_handler(fixture: MockFixture):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):  # noqa: D102 - silence per-request logging
            pass

        def _send(self, status: int, payload: dict[str, Any]) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):  # noqa: N802 - http.server naming
            if self.path == HEALTH_PATH:
                self._send(200, {"status": "ok"})
            else:
                self._send(404, {"error": f"unknown path {self.path}"})

        def do_POST(self):  # noqa: N802
            length = int(self.headers.get("Content-Length", 0))
            try:
                request = json.loads(self.rfile.read(length).decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError):
                self._send(400, {"error": "request body is not valid JSON"})
                return
            if self.path not in _ENDPOINT_KEYS:
                self._send(404, {"error": f"unknown path {self.path}"})
                return
            response = fixture.respond(self.path, request)
            if response is None:
                self._send(
                    404,
                    {
                        "error": "no fixture entry for request",
                        "digest": request_digest(self.path, request),
                    },
                )
                return
            self._send(200, response)

    return Handler


def make_server(fixture_path: str | Path, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Build (but do not start) a mock server; port 0 picks a free port."""
    fixture = MockFixture.load(fixture_path)
    server = ThreadingHTTPServer((host, port), _make_handler(fixture))
    server.daemon_threads = True
    return server
