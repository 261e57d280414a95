"""The six evaluation pipelines, each mapping a manifest to SampleResults.

Samples may be processed concurrently up to `max_inflight`, but result
order always equals manifest order and turns within one sample stay
sequential. Backend trouble becomes a per-sample failure, never an
aborted run.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

from PIL import Image

from .backends import Backend, PipelineError
from .datasets import ClassificationSample, DetectionSample, Manifest
from .geometry import BoundingBox, clamp_crop, nms
from .postprocess import AssociationConfig, RiderLabel, associate_riders, riders_for_crops
from .prompts import (
    CascadeSpec,
    DirectPrompt,
    LabelPair,
    TextualDetectionPrompt,
    Verdict,
    build_followup,
    compose_followup,
    parse_label,
)

BASIC_DETECTION_QUERIES = ["motorbike", "person", "helmet"]
DEFAULT_MAX_INFLIGHT = 4


@dataclass(frozen=True)
class LabeledBox:
    label: RiderLabel
    box: BoundingBox
    score: float


@dataclass(frozen=True)
class DetectionPrediction:
    boxes: tuple[LabeledBox, ...]
    dropped: int = 0  # crops lost to Unknown verdicts or per-crop failures


@dataclass(frozen=True)
class SampleResult:
    """Outcome for one manifest sample: a prediction or a failure note."""

    sample_id: str
    prediction: Verdict | DetectionPrediction | None
    latency_ms: float | None = None
    failure: str | None = None

    def __post_init__(self) -> None:
        if (self.prediction is None) == (self.failure is None):
            raise ValueError("exactly one of prediction/failure must be set")


def _run_workers(
    manifest: Manifest,
    worker: Callable[[ClassificationSample | DetectionSample], SampleResult],
    max_inflight: int,
) -> list[SampleResult]:
    if max_inflight < 1:
        raise ValueError(f"max_inflight must be >= 1: {max_inflight}")
    if max_inflight == 1:
        return [worker(sample) for sample in manifest.samples]
    with ThreadPoolExecutor(max_workers=max_inflight) as pool:
        return list(pool.map(worker, manifest.samples))


def _require(manifest: Manifest, kind: str) -> None:
    if manifest.kind != kind:
        raise ValueError(f"{kind} manifest required, got {manifest.kind}")


def _failure(sample_id: str, exc: Exception, latency_ms: float | None) -> SampleResult:
    return SampleResult(
        sample_id=sample_id,
        prediction=None,
        latency_ms=latency_ms,
        failure=f"{type(exc).__name__}: {exc}",
    )


def run_similarity_classification(
    manifest: Manifest,
    backend: Backend,
    pair: LabelPair,
    max_inflight: int = DEFAULT_MAX_INFLIGHT,
) -> list[SampleResult]:
    """Argmax over per-label similarity scores; ties go to the positive label."""
    _require(manifest, "classification")

    def worker(sample: ClassificationSample) -> SampleResult:
        sample_id = str(sample.image_path)
        try:
            image = sample.image_path.read_bytes()
            scores, latency_ms = backend.classify(image, pair.labels)
        except (PipelineError, OSError) as exc:
            return _failure(sample_id, exc, None)
        verdict = Verdict.POSITIVE if scores[0] >= scores[1] else Verdict.NEGATIVE
        return SampleResult(sample_id, verdict, latency_ms)

    return _run_workers(manifest, worker, max_inflight)


def run_cascade_classification(
    manifest: Manifest,
    backend: Backend,
    spec: CascadeSpec,
    max_inflight: int = DEFAULT_MAX_INFLIGHT,
) -> list[SampleResult]:
    """Two turns: describe the image, then force a class answer and parse it."""
    _require(manifest, "classification")

    def worker(sample: ClassificationSample) -> SampleResult:
        sample_id = str(sample.image_path)
        latency_ms: float | None = None
        try:
            image = sample.image_path.read_bytes()
            description, turn_latency = backend.generate(image, spec.initial_prompt)
            latency_ms = turn_latency
            answer, turn_latency = backend.generate(image, build_followup(description, spec))
            latency_ms += turn_latency
        except (PipelineError, OSError, ValueError) as exc:
            return _failure(sample_id, exc, latency_ms)
        return SampleResult(sample_id, parse_label(answer, spec.alias_map), latency_ms)

    return _run_workers(manifest, worker, max_inflight)


def run_direct_chat_classification(
    manifest: Manifest,
    backend: Backend,
    prompt: DirectPrompt,
    max_inflight: int = DEFAULT_MAX_INFLIGHT,
) -> list[SampleResult]:
    """Single chat turn followed by alias parsing."""
    _require(manifest, "classification")

    def worker(sample: ClassificationSample) -> SampleResult:
        sample_id = str(sample.image_path)
        try:
            image = sample.image_path.read_bytes()
            answer, latency_ms = backend.generate(image, prompt.text)
        except (PipelineError, OSError) as exc:
            return _failure(sample_id, exc, None)
        return SampleResult(sample_id, parse_label(answer, prompt.alias_map), latency_ms)

    return _run_workers(manifest, worker, max_inflight)


def _split_basic(dets):
    motorbikes = [d for d in dets if d.class_index == 0]
    persons = [d for d in dets if d.class_index == 1]
    helmets = [d for d in dets if d.class_index == 2]
    return motorbikes, persons, helmets


def run_detection_postprocess(
    manifest: Manifest,
    det_backend: Backend,
    cfg: AssociationConfig,
    score_threshold: float,
    max_inflight: int = DEFAULT_MAX_INFLIGHT,
) -> list[SampleResult]:
    """Basic-class detection plus the NMS/association/helmet-label pipeline."""
    _require(manifest, "detection")

    def worker(sample: DetectionSample) -> SampleResult:
        sample_id = str(sample.image_path)
        try:
            image = sample.image_path.read_bytes()
            dets, latency_ms = det_backend.detect(image, BASIC_DETECTION_QUERIES, score_threshold)
        except (PipelineError, OSError) as exc:
            return _failure(sample_id, exc, None)
        motorbikes, persons, helmets = _split_basic(dets)
        verdicts = associate_riders(persons, motorbikes, helmets, cfg)
        boxes = tuple(LabeledBox(v.label, v.person_box, v.score) for v in verdicts)
        return SampleResult(sample_id, DetectionPrediction(boxes), latency_ms)

    return _run_workers(manifest, worker, max_inflight)


def run_detection_textual(
    manifest: Manifest,
    det_backend: Backend,
    prompts: tuple[TextualDetectionPrompt, ...],
    score_threshold: float,
    nms_threshold: float = 0.5,
    max_inflight: int = DEFAULT_MAX_INFLIGHT,
) -> list[SampleResult]:
    """Sentence-query detection; labels come straight from the query mapping."""
    _require(manifest, "detection")
    queries = [p.query for p in prompts]

    def worker(sample: DetectionSample) -> SampleResult:
        sample_id = str(sample.image_path)
        try:
            image = sample.image_path.read_bytes()
            dets, latency_ms = det_backend.detect(image, queries, score_threshold)
        except (PipelineError, OSError) as exc:
            return _failure(sample_id, exc, None)
        boxes: list[LabeledBox] = []
        for label in (RiderLabel.HELMET, RiderLabel.NOHELMET):
            same_class = [d for d in dets if prompts[d.class_index].mapped_class is label]
            for det in nms(same_class, nms_threshold):
                boxes.append(LabeledBox(label, det.box, det.score))
        boxes.sort(key=lambda b: -b.score)
        return SampleResult(sample_id, DetectionPrediction(tuple(boxes)), latency_ms)

    return _run_workers(manifest, worker, max_inflight)


def crop_png(image: Image.Image, box: BoundingBox) -> bytes:
    """Cut `box` out of `image` (expanded to whole pixels) as PNG bytes."""
    left = max(0, math.floor(box.xmin))
    top = max(0, math.floor(box.ymin))
    right = min(image.width, math.ceil(box.xmax))
    bottom = min(image.height, math.ceil(box.ymax))
    buffer = io.BytesIO()
    image.crop((left, top, right, bottom)).save(buffer, format="PNG")
    return buffer.getvalue()


def run_detection_crop_chat(
    manifest: Manifest,
    det_backend: Backend,
    chat_backend: Backend,
    cfg: AssociationConfig,
    score_threshold: float,
    crop_pad: float,
    prompt: DirectPrompt,
    followup: DirectPrompt | None = None,
    max_inflight: int = DEFAULT_MAX_INFLIGHT,
) -> list[SampleResult]:
    """Detect riders, crop each one, and let a chat model decide the label.

    With `followup` set, the first answer is fed back through a second turn
    before parsing (two-turn style); without it the first answer is parsed
    directly. Unknown verdicts drop the crop and are tallied, and a failing
    crop drops only itself, not the sample.
    """
    _require(manifest, "detection")

    def worker(sample: DetectionSample) -> SampleResult:
        sample_id = str(sample.image_path)
        try:
            image_bytes = sample.image_path.read_bytes()
            dets, latency_ms = det_backend.detect(
                image_bytes, BASIC_DETECTION_QUERIES, score_threshold
            )
            image = Image.open(io.BytesIO(image_bytes))
            image.load()
        except (PipelineError, OSError) as exc:
            return _failure(sample_id, exc, None)
        motorbikes, persons, _ = _split_basic(dets)
        pairs = riders_for_crops(persons, motorbikes, cfg)

        boxes: list[LabeledBox] = []
        dropped = 0
        for person, _motorbike in pairs:
            try:
                crop_box = clamp_crop(person.box, image.width, image.height, crop_pad)
                crop = crop_png(image, crop_box)
                answer, turn_latency = chat_backend.generate(crop, prompt.text)
                latency_ms += turn_latency
                if followup is not None:
                    answer, turn_latency = chat_backend.generate(
                        crop, compose_followup(answer, followup.text)
                    )
                    latency_ms += turn_latency
                alias_map = followup.alias_map if followup is not None else prompt.alias_map
            except (PipelineError, ValueError):
                dropped += 1
                continue
            verdict = parse_label(answer, alias_map)
            if verdict is Verdict.UNKNOWN:
                dropped += 1
                continue
            label = RiderLabel.HELMET if verdict is Verdict.POSITIVE else RiderLabel.NOHELMET
            boxes.append(LabeledBox(label, person.box, person.score))
        return SampleResult(sample_id, DetectionPrediction(tuple(boxes), dropped), latency_ms)

    return _run_workers(manifest, worker, max_inflight)


def result_to_obj(result: SampleResult) -> dict:
    """JSON-ready form of a SampleResult, stable field order."""
    if isinstance(result.prediction, Verdict):
        prediction = {"verdict": result.prediction.value}
    elif isinstance(result.prediction, DetectionPrediction):
        prediction = {
            "boxes": [
                {"label": b.label.value, "box": list(b.box.as_tuple()), "score": b.score}
                for b in result.prediction.boxes
            ],
            "dropped": result.prediction.dropped,
        }
    else:
        prediction = None
    return {
        "sample": result.sample_id,
        "prediction": prediction,
        "latency_ms": result.latency_ms,
        "failure": result.failure,
    }


def result_from_obj(obj: dict) -> SampleResult:
    prediction: Verdict | DetectionPrediction | None = None
    raw = obj.get("prediction")
    if raw is not None:
        if "verdict" in raw:
            prediction = Verdict(raw["verdict"])
        else:
            prediction = DetectionPrediction(
                boxes=tuple(
                    LabeledBox(RiderLabel(b["label"]), BoundingBox(*b["box"]), b["score"])
                    for b in raw["boxes"]
                ),
                dropped=raw.get("dropped", 0),
            )
    return SampleResult(
        sample_id=obj["sample"],
        prediction=prediction,
        latency_ms=obj.get("latency_ms"),
        failure=obj.get("failure"),
    )


def results_to_jsonl(results: list[SampleResult]) -> str:
    return "".join(json.dumps(result_to_obj(r)) + "\n" for r in results)


def results_from_jsonl(text: str) -> list[SampleResult]:
    return [result_from_obj(json.loads(line)) for line in text.splitlines() if line.strip()]
