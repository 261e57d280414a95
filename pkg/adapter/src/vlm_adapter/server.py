"""FastAPI service exposing the vlmbench wire contract.

POST /v1/classify   {image_b64, labels}                   -> {scores}
POST /v1/generate   {image_b64, prompt}                   -> {text}
POST /v1/detect     {image_b64, queries, score_threshold} -> {detections}
GET  /health                                              -> {status: "ok"}

One model instance per endpoint kind; requests against the same model
are serialized with a lock, and failures surface as JSON 5xx bodies.
"""

from __future__ import annotations

import base64
import binascii
import io
import logging
import threading

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel

from .config import AdapterConfig
from .models import build_model

log = logging.getLogger("vlm_adapter")


class ClassifyRequest(BaseModel):
    image_b64: str
    labels: list[str]


class GenerateRequest(BaseModel):
    image_b64: str
    prompt: str


class DetectRequest(BaseModel):
    image_b64: str
    queries: list[str]
    score_threshold: float = 0.1


class _Mount:
    """A model plus the lock serializing access to it."""

    def __init__(self, model):
        self.model = model
        self.lock = threading.Lock()


def _decode_image(image_b64: str, max_bytes: int) -> Image.Image:
    try:
        raw = base64.b64decode(image_b64, validate=True)
    except (binascii.Error, ValueError):
        raise HTTPException(status_code=400, detail="image_b64 is not valid base64")
    if len(raw) > max_bytes:
        raise HTTPException(
            status_code=400, detail=f"image exceeds {max_bytes} byte limit"
        )
    try:
        image = Image.open(io.BytesIO(raw))
        image.load()
    except (UnidentifiedImageError, OSError):
        raise HTTPException(status_code=400, detail="image bytes are not a valid image")
    return image


def create_app(config: AdapterConfig) -> FastAPI:
    """Build the service; model loading happens here, eagerly."""
    app = FastAPI(title="vlm-adapter", docs_url=None, redoc_url=None)
    mounts: dict[str, _Mount] = {}
    for kind in ("similarity", "chat", "detector"):
        spec = getattr(config, kind)
        if spec != "none":
            mounts[kind] = _Mount(build_model(kind, spec, config.device))
            log.info("mounted %s model: %s", kind, mounts[kind].model.name)

    @app.exception_handler(Exception)
    async def _internal_error(request, exc):
        log.exception("request failed")
        return JSONResponse(status_code=500, content={"error": str(exc)})

    def _mount(kind: str) -> _Mount:
        mount = mounts.get(kind)
        if mount is None:
            raise HTTPException(status_code=404, detail=f"{kind} endpoint is disabled")
        return mount

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/classify")
    def classify(request: ClassifyRequest):
        if not request.labels:
            raise HTTPException(status_code=400, detail="labels must be non-empty")
        mount = _mount("similarity")
        image = _decode_image(request.image_b64, config.max_image_bytes)
        with mount.lock:
            scores = mount.model.classify(image, request.labels)
        return {"scores": [float(s) for s in scores]}

    @app.post("/v1/generate")
    def generate(request: GenerateRequest):
        mount = _mount("chat")
        image = _decode_image(request.image_b64, config.max_image_bytes)
        with mount.lock:
            text = mount.model.generate(image, request.prompt)
        return {"text": text}

    @app.post("/v1/detect")
    def detect(request: DetectRequest):
        if not request.queries:
            raise HTTPException(status_code=400, detail="queries must be non-empty")
        mount = _mount("detector")
        image = _decode_image(request.image_b64, config.max_image_bytes)
        with mount.lock:
            detections = mount.model.detect(
                image, request.queries, request.score_threshold
            )
        return {"detections": detections}

    return app
