"""Synthetic fixture generation: tiny images, manifests and mock fixtures.

Everything here is deterministic so that generated datasets, record
stores and mock responses are stable across runs. Used by the test suite
and handy for demoing the CLI without any real backend.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .backends import CLASSIFY_PATH, BackendExchange, ExchangeStore, request_digest, _b64
from .geometry import BoundingBox, clamp_crop
from .pipelines import crop_png
from .prompts import Task, catalog_lookup

# Table-1-style replay fixture: confusion counts over the published class
# sizes (516 positive / 494 negative) whose rounded precision/recall/F1
# come out at 0.95 / 0.92 / 0.94.
BLIP_ROW_COUNTS = {"tp": 477, "fp": 25, "fn": 39, "tn": 469}
BLIP_ROW_LATENCY_MS = 490.0


def write_png(path: Path, color: tuple[int, int, int], size: tuple[int, int] = (8, 8)) -> bytes:
    """Write a solid-color PNG and return its bytes."""
    image = Image.new("RGB", size, color)
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    data = buffer.getvalue()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return data


def _color(index: int) -> tuple[int, int, int]:
    # injective below 2**24 so distinct samples never share image bytes
    return (index % 256, index // 256 % 256, index // 65536 % 256)


def make_table1_blip_fixture(root: str | Path) -> tuple[Path, Path]:
    """Materialize the 1010-sample congestion replay fixture.

    Returns (manifest_path, store_path). Replaying the store through the
    similarity pipeline with prompt pair A2 yields exactly the frozen
    confusion counts, hence a 0.95 / 0.92 / 0.94 report row.
    """
    root = Path(root)
    labels = catalog_lookup(Task.CONGESTION, "A2").labels
    store_path = root / "blip_a2.jsonl"
    store_path.parent.mkdir(parents=True, exist_ok=True)
    store_path.write_text("")
    store = ExchangeStore(store_path)

    rows = ["path,label"]
    tp, fp = BLIP_ROW_COUNTS["tp"], BLIP_ROW_COUNTS["fp"]
    positives = BLIP_ROW_COUNTS["tp"] + BLIP_ROW_COUNTS["fn"]
    negatives = BLIP_ROW_COUNTS["fp"] + BLIP_ROW_COUNTS["tn"]

    def add_sample(index: int, label: str, predicted_positive: bool) -> None:
        rel = f"images/{label[:3]}_{index:04d}.png"
        data = write_png(root / rel, _color(index), size=(2, 2))
        rows.append(f"{rel},{label}")
        request = {"image_b64": _b64(data), "labels": labels}
        scores = [0.9, 0.1] if predicted_positive else [0.1, 0.9]
        store.append(
            BackendExchange(
                endpoint_path=CLASSIFY_PATH,
                request_digest=request_digest(CLASSIFY_PATH, request),
                request=request,
                response={"scores": scores},
                latency_ms=BLIP_ROW_LATENCY_MS,
            )
        )

    for i in range(positives):
        add_sample(i, "congested", predicted_positive=i < tp)
    for i in range(negatives):
        add_sample(positives + i, "non-congested", predicted_positive=i < fp)

    manifest_path = root / "manifest.csv"
    manifest_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return manifest_path, store_path


@dataclass(frozen=True)
class SmokeSuite:
    classification_manifest: Path
    detection_manifest: Path
    fixture: Path


# Fixed smoke-scene layout: a rider whose person/motorbike overlap passes
# the containment metric at 0.6 but not plain IoU.
PERSON_BOX = (12.0, 8.0, 38.0, 58.0)
MOTORBIKE_BOX = (10.0, 30.0, 40.0, 60.0)
HELMET_BOX = (18.0, 8.0, 30.0, 20.0)
SCENE_SIZE = (64, 64)


def make_smoke_suite(root: str | Path, samples: int = 10) -> SmokeSuite:
    """Ten-image manifests plus one mock fixture covering all six pipelines."""
    root = Path(root)
    fixture: dict = {"classify": {}, "generate": {}, "detect": {}}

    # Classification: six congested, four free; samples 5 and 6 come back wrong.
    cls_rows = ["path,label"]
    for i in range(samples):
        rel = f"images/cls_{i:02d}.png"
        write_png(root / rel, _color(100 + i))
        truly_positive = i < 6
        predicted_positive = truly_positive ^ (i in (5, 6))
        cls_rows.append(f"{rel},{'congested' if truly_positive else 'non-congested'}")
        fixture["classify"][rel] = {"scores": [0.8, 0.2] if predicted_positive else [0.2, 0.8]}
        fixture["generate"][rel] = [
            {
                "if_prompt_contains": "Write Congested lanes",
                "text": "Congested lanes" if predicted_positive else "Free-lanes",
            },
            {
                "if_prompt_contains": "Only return non-Congested",
                "text": "congested" if predicted_positive else "non-Congested",
            },
            {"text": "A highway scene with several lanes."},
        ]
    cls_manifest = root / "classification.csv"
    cls_manifest.write_text("\n".join(cls_rows) + "\n", encoding="utf-8")

    # Detection: one rider per scene; even scenes wear a helmet. The basic
    # detector misses the helmet in scene 8, and scene 1 carries a duplicate
    # person box for NMS to remove.
    det_rows = ["path,class,xmin,ymin,xmax,ymax"]
    person, motorbike, helmet = PERSON_BOX, MOTORBIKE_BOX, HELMET_BOX
    for i in range(samples):
        rel = f"images/det_{i:02d}.png"
        image_bytes = write_png(root / rel, _color(200 + i), size=SCENE_SIZE)
        has_helmet = i % 2 == 0
        det_rows.append(f"{rel},motorbike," + ",".join(str(v) for v in motorbike))
        det_rows.append(
            f"{rel},{'Helmet' if has_helmet else 'NoHelmet'}," + ",".join(str(v) for v in person)
        )

        basic_dets = [
            {"box": list(motorbike), "query_index": 0, "score": 0.9},
            {"box": list(person), "query_index": 1, "score": 0.85},
        ]
        if i == 1:
            shifted = [person[0] + 1, person[1] + 1, person[2] + 1, person[3] + 1]
            basic_dets.append({"box": shifted, "query_index": 1, "score": 0.7})
        if has_helmet and i != 8:
            basic_dets.append({"box": list(helmet), "query_index": 2, "score": 0.8})

        textual_dets = [
            {"box": list(person), "query_index": 0 if has_helmet else 2, "score": 0.9}
        ]
        if i == 3:
            shifted = [person[0] + 1, person[1] + 1, person[2] + 1, person[3] + 1]
            textual_dets.append({"box": shifted, "query_index": 1, "score": 0.8})
        fixture["detect"][rel] = [
            {"if_query_contains": "A person on a motorbike", "detections": textual_dets},
            {"detections": basic_dets},
        ]

        # Crop fed to the chat model in the crop-chat pipeline; answers track
        # the ground truth.
        image = Image.open(io.BytesIO(image_bytes))
        crop_rel = f"crops/det_{i:02d}.png"
        crop_box = clamp_crop(BoundingBox(*person), *SCENE_SIZE, pad=0.0)
        crop_path = root / crop_rel
        crop_path.parent.mkdir(parents=True, exist_ok=True)
        crop_path.write_bytes(crop_png(image, crop_box))
        fixture["generate"][crop_rel] = [
            {"if_prompt_contains": "Write no if any person", "text": "yes" if has_helmet else "no"},
            {"text": "A rider on a motorbike."},
        ]
    det_manifest = root / "detection.csv"
    det_manifest.write_text("\n".join(det_rows) + "\n", encoding="utf-8")

    fixture_path = root / "fixture.json"
    fixture_path.write_text(json.dumps(fixture, indent=2) + "\n", encoding="utf-8")
    return SmokeSuite(
        classification_manifest=cls_manifest,
        detection_manifest=det_manifest,
        fixture=fixture_path,
    )
