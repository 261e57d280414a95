"""Contract self-test: exercise every endpoint and validate the schema.

Runs against any server claiming the wire contract (this adapter, the
harness's mock server, a future reimplementation) and reports each
violation it finds, so servers stay drop-in interchangeable.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass, field

import requests
from PIL import Image

TEST_IMAGE_SIZE = (32, 24)
TEST_LABELS = ["a rider wearing a helmet", "a rider without a helmet"]
TEST_PROMPT = "Describe the image."
TEST_QUERIES = ["motorbike", "person"]
TEST_SCORE_THRESHOLD = 0.1


def probe_image_bytes() -> bytes:
    """The bundled probe image: deterministic two-tone PNG."""
    image = Image.new("RGB", TEST_IMAGE_SIZE, (40, 80, 120))
    for x in range(TEST_IMAGE_SIZE[0] // 2):
        for y in range(TEST_IMAGE_SIZE[1] // 2):
            image.putpixel((x, y), (220, 220, 220))
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


@dataclass
class SelftestResult:
    passed: bool
    problems: list[str] = field(default_factory=list)

    def summary(self) -> str:
        if self.passed:
            return "contract selftest: PASS"
        lines = "\n".join(f"  - {p}" for p in self.problems)
        return f"contract selftest: FAIL\n{lines}"


def contract_selftest(base_url: str, timeout: float = 30.0) -> SelftestResult:
    problems: list[str] = []
    base = base_url.rstrip("/")
    image_b64 = base64.b64encode(probe_image_bytes()).decode("ascii")
    session = requests.Session()

    def post(path: str, payload: dict) -> dict | None:
        try:
            response = session.post(base + path, json=payload, timeout=timeout)
        except requests.RequestException as exc:
            problems.append(f"{path}: transport error: {exc}")
            return None
        if response.status_code != 200:
            problems.append(f"{path}: HTTP {response.status_code}: {response.text[:120]}")
            return None
        try:
            return response.json()
        except ValueError:
            problems.append(f"{path}: response body is not JSON")
            return None

    try:
        health = session.get(base + "/health", timeout=timeout)
        if health.status_code != 200 or health.json().get("status") != "ok":
            problems.append(f"/health: expected status ok, got {health.text[:120]}")
    except (requests.RequestException, ValueError) as exc:
        problems.append(f"/health: {exc}")

    payload = post("/v1/classify", {"image_b64": image_b64, "labels": TEST_LABELS})
    if payload is not None:
        scores = payload.get("scores")
        if not isinstance(scores, list):
            problems.append(f"/v1/classify: missing scores list, got {payload!r}")
        else:
            if len(scores) != len(TEST_LABELS):
                problems.append(
                    f"/v1/classify: {len(TEST_LABELS)} labels but {len(scores)} scores"
                )
            for value in scores:
                if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                    problems.append(f"/v1/classify: score out of [0,1]: {value!r}")

    payload = post("/v1/generate", {"image_b64": image_b64, "prompt": TEST_PROMPT})
    if payload is not None:
        text = payload.get("text")
        if not isinstance(text, str) or not text:
            problems.append(f"/v1/generate: empty or missing text: {payload!r}")

    payload = post(
        "/v1/detect",
        {
            "image_b64": image_b64,
            "queries": TEST_QUERIES,
            "score_threshold": TEST_SCORE_THRESHOLD,
        },
    )
    if payload is not None:
        detections = payload.get("detections")
        if not isinstance(detections, list):
            problems.append(f"/v1/detect: missing detections list: {payload!r}")
        else:
            width, height = TEST_IMAGE_SIZE
            for entry in detections:
                box = entry.get("box") if isinstance(entry, dict) else None
                if (
                    not isinstance(box, list)
                    or len(box) != 4
                    or not all(isinstance(v, (int, float)) for v in box)
                ):
                    problems.append(f"/v1/detect: malformed box: {entry!r}")
                    continue
                xmin, ymin, xmax, ymax = box
                if not (0 <= xmin < xmax <= width and 0 <= ymin < ymax <= height):
                    problems.append(f"/v1/detect: box outside image bounds: {box}")
                index = entry.get("query_index")
                if not isinstance(index, int) or not 0 <= index < len(TEST_QUERIES):
                    problems.append(f"/v1/detect: query_index out of range: {entry!r}")
                score = entry.get("score")
                if (
                    not isinstance(score, (int, float))
                    or not 0.0 <= score <= 1.0
                    or score < TEST_SCORE_THRESHOLD
                ):
                    problems.append(f"/v1/detect: score violates contract: {entry!r}")

    return SelftestResult(passed=not problems, problems=problems)
