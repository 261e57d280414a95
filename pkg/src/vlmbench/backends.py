"""Clients for the three backend kinds, plus record/replay and a test mock.

Wire contract (UTF-8 JSON bodies):

    POST {base}/v1/classify  {image_b64, labels}                -> {scores}
    POST {base}/v1/generate  {image_b64, prompt}                -> {text}
    POST {base}/v1/detect    {image_b64, queries, score_threshold}
                             -> {detections: [{box, query_index, score}]}
    GET  {base}/health                                          -> {status: "ok"}

Every exchange can be recorded to a JSON-lines store and replayed later by
request digest, which makes whole runs reproducible without any network.
"""

from __future__ import annotations

import base64
import enum
import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import requests

from .geometry import BoundingBox, ScoredDetection

CLASSIFY_PATH = "/v1/classify"
GENERATE_PATH = "/v1/generate"
DETECT_PATH = "/v1/detect"
HEALTH_PATH = "/health"

RETRY_BACKOFF_S = 0.5


class PipelineError(Exception):
    """Base class for everything that can go wrong talking to a backend."""


class BackendError(PipelineError):
    """Transport failure that survived the retry budget."""


class ProtocolError(PipelineError):
    """The backend answered, but not with what the contract promises."""


class ReplayMissError(PipelineError):
    """Replay store has no entry for the request digest."""


class EndpointKind(enum.Enum):
    SIMILARITY_CLASSIFIER = "similarity"
    VISUAL_CHAT = "chat"
    OPEN_VOCAB_DETECTOR = "detector"


@dataclass(frozen=True)
class BackendEndpoint:
    kind: EndpointKind
    base_url: str
    timeout: float = 30.0
    max_retries: int = 2
    token: str | None = None

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive: {self.timeout}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0: {self.max_retries}")


def canonical_json(obj: Any) -> str:
    """Stable serialization: sorted keys, no whitespace, escaped non-ASCII."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def request_digest(endpoint_path: str, request: dict[str, Any]) -> str:
    payload = canonical_json({"path": endpoint_path, "request": request})
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def image_sha(image: bytes) -> str:
    """Content key used by path-keyed mock fixtures."""
    return hashlib.sha256(image).hexdigest()


@dataclass(frozen=True)
class BackendExchange:
    """One request/response pair, as persisted in the record store."""

    endpoint_path: str
    request_digest: str
    request: dict[str, Any]
    response: dict[str, Any]
    latency_ms: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "endpoint_path": self.endpoint_path,
                "request_digest": self.request_digest,
                "request": self.request,
                "response": self.response,
                "latency_ms": self.latency_ms,
            }
        )

    @classmethod
    def from_json(cls, line: str) -> "BackendExchange":
        raw = json.loads(line)
        return cls(
            endpoint_path=raw["endpoint_path"],
            request_digest=raw["request_digest"],
            request=raw["request"],
            response=raw["response"],
            latency_ms=raw["latency_ms"],
        )


class ExchangeStore:
    """Append-only JSON-lines store of BackendExchange records."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, exchange: BackendExchange) -> None:
        line = exchange.to_json()
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    @staticmethod
    def load(path: str | Path) -> dict[str, BackendExchange]:
        """Read a store into a digest-keyed map (later duplicates win)."""
        exchanges: dict[str, BackendExchange] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                exchange = BackendExchange.from_json(line)
                exchanges[exchange.request_digest] = exchange
        return exchanges


class Backend:
    """Typed request builders and response validation, over a raw `call`.

    Subclasses provide `call(path, request) -> (response, latency_ms)`;
    the classify/generate/detect wrappers here own payload shape and
    contract checks so every transport behaves identically.
    """

    kind: EndpointKind | None = None

    def call(self, path: str, request: dict[str, Any]) -> tuple[dict[str, Any], float]:
        raise NotImplementedError

    def _check_kind(self, expected: EndpointKind) -> None:
        if self.kind is not None and self.kind is not expected:
            raise ValueError(f"endpoint kind is {self.kind.value}, expected {expected.value}")

    def classify(self, image: bytes, labels: list[str]) -> tuple[list[float], float]:
        """Per-label similarity scores for the image, plus latency in ms."""
        if not labels:
            raise ValueError("labels must be non-empty")
        self._check_kind(EndpointKind.SIMILARITY_CLASSIFIER)
        request = {"image_b64": _b64(image), "labels": list(labels)}
        response, latency_ms = self.call(CLASSIFY_PATH, request)
        scores = response.get("scores")
        if not isinstance(scores, list) or len(scores) != len(labels):
            raise ProtocolError(
                f"classify: expected {len(labels)} scores, got {scores!r}"
            )
        for value in scores:
            if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise ProtocolError(f"classify: score out of range: {value!r}")
        return [float(v) for v in scores], latency_ms

    def generate(self, image: bytes, prompt: str) -> tuple[str, float]:
        """Free-text answer for (image, prompt), plus latency in ms."""
        self._check_kind(EndpointKind.VISUAL_CHAT)
        request = {"image_b64": _b64(image), "prompt": prompt}
        response, latency_ms = self.call(GENERATE_PATH, request)
        text = response.get("text")
        if not isinstance(text, str) or not text:
            raise ProtocolError(f"generate: empty or missing text in {response!r}")
        return text, latency_ms

    def detect(
        self, image: bytes, queries: list[str], score_threshold: float
    ) -> tuple[list[ScoredDetection], float]:
        """Detections for the text queries, filtered by score, plus latency."""
        if not queries:
            raise ValueError("queries must be non-empty")
        self._check_kind(EndpointKind.OPEN_VOCAB_DETECTOR)
        request = {
            "image_b64": _b64(image),
            "queries": list(queries),
            "score_threshold": score_threshold,
        }
        response, latency_ms = self.call(DETECT_PATH, request)
        raw = response.get("detections")
        if not isinstance(raw, list):
            raise ProtocolError(f"detect: missing detections in {response!r}")
        detections: list[ScoredDetection] = []
        for entry in raw:
            try:
                box = entry["box"]
                query_index = entry["query_index"]
                score = entry["score"]
            except (TypeError, KeyError) as exc:
                raise ProtocolError(f"detect: malformed detection {entry!r}") from exc
            if not isinstance(query_index, int) or not 0 <= query_index < len(queries):
                raise ProtocolError(f"detect: query_index out of range: {entry!r}")
            if not isinstance(score, (int, float)) or not 0.0 <= score <= 1.0:
                raise ProtocolError(f"detect: score out of range: {entry!r}")
            if (
                not isinstance(box, list)
                or len(box) != 4
                or not all(isinstance(v, (int, float)) for v in box)
                or min(box) < 0
            ):
                raise ProtocolError(f"detect: bad box: {entry!r}")
            try:
                bounding_box = BoundingBox(*[float(v) for v in box])
            except ValueError as exc:
                raise ProtocolError(f"detect: bad box: {entry!r}") from exc
            if score >= score_threshold:
                detections.append(
                    ScoredDetection(box=bounding_box, class_index=query_index, score=float(score))
                )
        return detections, latency_ms


def _b64(image: bytes) -> str:
    return base64.b64encode(image).decode("ascii")


class HttpBackend(Backend):
    """Live client with bounded retries and exponential backoff."""

    def __init__(self, endpoint: BackendEndpoint, session: requests.Session | None = None):
        self.endpoint = endpoint
        self.kind = endpoint.kind
        self._session = session or requests.Session()

    def call(self, path: str, request: dict[str, Any]) -> tuple[dict[str, Any], float]:
        url = self.endpoint.base_url.rstrip("/") + path
        headers = {}
        if self.endpoint.token:
            headers["Authorization"] = f"Bearer {self.endpoint.token}"
        last_error: Exception | None = None
        for attempt in range(self.endpoint.max_retries + 1):
            if attempt:
                time.sleep(RETRY_BACKOFF_S * 2 ** (attempt - 1))
            started = time.perf_counter()
            try:
                http_response = self._session.post(
                    url, json=request, headers=headers, timeout=self.endpoint.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            latency_ms = (time.perf_counter() - started) * 1000.0
            if http_response.status_code >= 500:
                last_error = BackendError(
                    f"{url}: server error {http_response.status_code}"
                )
                continue
            if http_response.status_code != 200:
                raise ProtocolError(
                    f"{url}: HTTP {http_response.status_code}: {http_response.text[:200]}"
                )
            try:
                return http_response.json(), latency_ms
            except ValueError as exc:
                raise ProtocolError(f"{url}: response is not JSON") from exc
        raise BackendError(
            f"{url}: failed after {self.endpoint.max_retries + 1} attempts: {last_error}"
        ) from last_error

    def health(self) -> bool:
        url = self.endpoint.base_url.rstrip("/") + HEALTH_PATH
        try:
            response = self._session.get(url, timeout=self.endpoint.timeout)
        except requests.RequestException:
            return False
        return response.status_code == 200 and response.json().get("status") == "ok"


class RecordingBackend(Backend):
    """Pass-through wrapper persisting every successful exchange.

    Retries happen inside the wrapped backend, so only final outcomes are
    stored and a digest never appears more often than it was answered.
    """

    def __init__(self, inner: Backend, store: ExchangeStore):
        self.inner = inner
        self.store = store
        self.kind = inner.kind

    def call(self, path: str, request: dict[str, Any]) -> tuple[dict[str, Any], float]:
        response, latency_ms = self.inner.call(path, request)
        self.store.append(
            BackendExchange(
                endpoint_path=path,
                request_digest=request_digest(path, request),
                request=request,
                response=response,
                latency_ms=latency_ms,
            )
        )
        return response, latency_ms


class ReplayBackend(Backend):
    """Serves recorded responses by digest; performs no network traffic.

    Latency comes back exactly as recorded, so replayed runs reproduce the
    original timing columns byte for byte.
    """

    def __init__(self, store_path: str | Path):
        self.store_path = Path(store_path)
        self._exchanges = ExchangeStore.load(self.store_path)

    def call(self, path: str, request: dict[str, Any]) -> tuple[dict[str, Any], float]:
        digest = request_digest(path, request)
        exchange = self._exchanges.get(digest)
        if exchange is None:
            raise ReplayMissError(f"no recorded exchange for digest {digest} ({path})")
        return exchange.response, exchange.latency_ms


Responder = Callable[[dict[str, Any]], dict[str, Any]]


@dataclass
class MockBackend(Backend):
    """In-process deterministic backend: a pure function of the request.

    Each endpoint takes either a canned response dict or a callable from
    the request payload to a response dict.
    """

    classify_fn: dict[str, Any] | Responder | None = None
    generate_fn: dict[str, Any] | Responder | None = None
    detect_fn: dict[str, Any] | Responder | None = None
    latency_ms: float = 0.0
    calls: list[tuple[str, dict[str, Any]]] = field(default_factory=list)

    def call(self, path: str, request: dict[str, Any]) -> tuple[dict[str, Any], float]:
        handler = {
            CLASSIFY_PATH: self.classify_fn,
            GENERATE_PATH: self.generate_fn,
            DETECT_PATH: self.detect_fn,
        }.get(path)
        if handler is None:
            raise ProtocolError(f"mock has no handler for {path}")
        self.calls.append((path, request))
        response = handler(request) if callable(handler) else handler
        return response, self.latency_ms
