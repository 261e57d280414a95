"""Model mounts for the three endpoint kinds.

The "builtin" family is fully deterministic and needs no weights: a
histogram similarity scorer, a stats-based caption generator and a
luminance-quadrant detector. They keep the service self-contained for
tests and demos while exposing exactly the contract real models use.

Transformers-backed mounts ("clip:...", "blip:...", "owlvit:...") load
open checkpoints lazily; whichever checkpoint is mounted is printed at
startup.
"""

from __future__ import annotations

import hashlib
import math
from typing import Protocol

import numpy as np
from PIL import Image


class SimilarityModel(Protocol):
    name: str

    def classify(self, image: Image.Image, labels: list[str]) -> list[float]: ...


class ChatModel(Protocol):
    name: str

    def generate(self, image: Image.Image, prompt: str) -> str: ...


class DetectorModel(Protocol):
    name: str

    def detect(
        self, image: Image.Image, queries: list[str], score_threshold: float
    ) -> list[dict]: ...


def softmax(logits: list[float]) -> list[float]:
    peak = max(logits)
    exps = [math.exp(v - peak) for v in logits]
    total = sum(exps)
    return [v / total for v in exps]


def _image_histogram(image: Image.Image, bins: int = 8) -> np.ndarray:
    rgb = np.asarray(image.convert("RGB"), dtype=np.float64).reshape(-1, 3)
    parts = [
        np.histogram(rgb[:, channel], bins=bins, range=(0, 256))[0]
        for channel in range(3)
    ]
    vec = np.concatenate(parts).astype(np.float64)
    norm = np.linalg.norm(vec)
    return vec / norm if norm else vec


def _text_embedding(text: str, dim: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
    rng = np.random.default_rng(seed)
    vec = rng.normal(size=dim)
    return vec / np.linalg.norm(vec)


class HistogramSimilarity:
    """Cosine similarity between an RGB histogram and per-label embeddings."""

    name = "builtin-histogram"

    def classify(self, image: Image.Image, labels: list[str]) -> list[float]:
        image_vec = _image_histogram(image)
        logits = [
            10.0 * float(np.dot(image_vec, _text_embedding(label, image_vec.size)))
            for label in labels
        ]
        return softmax(logits)


class CaptionChat:
    """Single-turn describer built from plain image statistics."""

    name = "builtin-caption"

    def generate(self, image: Image.Image, prompt: str) -> str:
        rgb = np.asarray(image.convert("RGB"), dtype=np.float64)
        mean = rgb.mean(axis=(0, 1)).round().astype(int)
        brightness = int(rgb.mean().round())
        return (
            f"A {image.width}x{image.height} image with mean color "
            f"#{mean[0]:02x}{mean[1]:02x}{mean[2]:02x} and brightness {brightness}."
        )


class LuminanceDetector:
    """One box per query around the image's brighter quadrants."""

    name = "builtin-luminance"

    def detect(
        self, image: Image.Image, queries: list[str], score_threshold: float
    ) -> list[dict]:
        gray = np.asarray(image.convert("L"), dtype=np.float64)
        h, w = gray.shape
        half_h, half_w = max(h // 2, 1), max(w // 2, 1)
        quadrants = [
            (0, 0), (half_w, 0), (0, half_h), (half_w, half_h),
        ]
        brightness = [
            gray[y : y + half_h, x : x + half_w].mean() for x, y in quadrants
        ]
        brightest = int(np.argmax(brightness))
        detections = []
        for index, _query in enumerate(queries):
            x, y = quadrants[(brightest + index) % 4]
            inset_x, inset_y = max(half_w // 10, 1), max(half_h // 10, 1)
            box = [
                float(x + inset_x),
                float(y + inset_y),
                float(min(x + half_w - inset_x, w)),
                float(min(y + half_h - inset_y, h)),
            ]
            if box[2] <= box[0] or box[3] <= box[1]:
                continue
            score = round(0.5 + 0.5 * float(brightness[(brightest + index) % 4]) / 255.0, 4)
            score = min(score, 1.0)
            if score >= score_threshold:
                detections.append({"box": box, "query_index": index, "score": score})
        return detections


class ClipSimilarity:
    """transformers CLIP mount; softmax over per-label logits."""

    def __init__(self, checkpoint: str, device: str = "cpu"):
        from transformers import CLIPModel, CLIPProcessor

        self.name = f"clip:{checkpoint}"
        self._device = device
        self._model = CLIPModel.from_pretrained(checkpoint).to(device).eval()
        self._processor = CLIPProcessor.from_pretrained(checkpoint)

    def classify(self, image: Image.Image, labels: list[str]) -> list[float]:
        import torch

        inputs = self._processor(
            text=labels, images=image, return_tensors="pt", padding=True
        ).to(self._device)
        with torch.no_grad():
            logits = self._model(**inputs).logits_per_image[0]
        return logits.softmax(dim=-1).tolist()


class BlipChat:
    """transformers BLIP mount: prompt-conditioned caption generation."""

    def __init__(self, checkpoint: str, device: str = "cpu"):
        from transformers import BlipForConditionalGeneration, BlipProcessor

        self.name = f"blip:{checkpoint}"
        self._device = device
        self._model = (
            BlipForConditionalGeneration.from_pretrained(checkpoint).to(device).eval()
        )
        self._processor = BlipProcessor.from_pretrained(checkpoint)

    def generate(self, image: Image.Image, prompt: str) -> str:
        import torch

        inputs = self._processor(image, prompt, return_tensors="pt").to(self._device)
        with torch.no_grad():
            output = self._model.generate(**inputs, max_new_tokens=60)
        return self._processor.decode(output[0], skip_special_tokens=True)


class OwlVitDetector:
    """transformers OWL-ViT mount for open-vocabulary detection."""

    def __init__(self, checkpoint: str, device: str = "cpu"):
        from transformers import OwlViTForObjectDetection, OwlViTProcessor

        self.name = f"owlvit:{checkpoint}"
        self._device = device
        self._model = OwlViTForObjectDetection.from_pretrained(checkpoint).to(device).eval()
        self._processor = OwlViTProcessor.from_pretrained(checkpoint)

    def detect(
        self, image: Image.Image, queries: list[str], score_threshold: float
    ) -> list[dict]:
        import torch

        inputs = self._processor(
            text=[queries], images=image, return_tensors="pt"
        ).to(self._device)
        with torch.no_grad():
            outputs = self._model(**inputs)
        target_size = torch.tensor([[image.height, image.width]])
        result = self._processor.post_process_object_detection(
            outputs, threshold=score_threshold, target_sizes=target_size
        )[0]
        detections = []
        for box, label, score in zip(result["boxes"], result["labels"], result["scores"]):
            xmin, ymin, xmax, ymax = (float(v) for v in box)
            detections.append(
                {
                    "box": [
                        max(0.0, xmin),
                        max(0.0, ymin),
                        min(float(image.width), xmax),
                        min(float(image.height), ymax),
                    ],
                    "query_index": int(label),
                    "score": min(1.0, float(score)),
                }
            )
        return detections


_FAMILIES = {
    "similarity": {"builtin": lambda spec, device: HistogramSimilarity(),
                   "clip": lambda spec, device: ClipSimilarity(spec, device)},
    "chat": {"builtin": lambda spec, device: CaptionChat(),
             "blip": lambda spec, device: BlipChat(spec, device)},
    "detector": {"builtin": lambda spec, device: LuminanceDetector(),
                 "owlvit": lambda spec, device: OwlVitDetector(spec, device)},
}


def build_model(kind: str, spec: str, device: str = "cpu"):
    """Instantiate the model named by `spec` for an endpoint kind.

    Spec grammar: "builtin" or "<family>:<checkpoint>". Raises ValueError
    for unknown kinds/families; checkpoint load errors propagate.
    """
    if kind not in _FAMILIES:
        raise ValueError(f"unknown endpoint kind {kind!r}")
    family, _, checkpoint = spec.partition(":")
    builders = _FAMILIES[kind]
    if family not in builders:
        raise ValueError(
            f"unknown model family {family!r} for {kind}; "
            f"expected one of {sorted(builders)}"
        )
    if family != "builtin" and not checkpoint:
        raise ValueError(f"model spec {spec!r} needs a checkpoint after the colon")
    return builders[family](checkpoint, device)
