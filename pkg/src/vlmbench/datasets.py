"""Manifest loading for the classification and detection datasets.

Both manifests are flat UTF-8 CSV files (LF or CRLF). Image paths are
resolved relative to the manifest file's directory and must exist at load
time so runs fail before the first backend call, not in the middle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .geometry import BoundingBox
from .prompts import Task, Verdict

CLASSIFICATION_HEADER = ["path", "label"]
DETECTION_HEADER = ["path", "class", "xmin", "ymin", "xmax", "ymax"]
DETECTION_CLASSES = ("motorbike", "Helmet", "NoHelmet")

# Manifest label words per classification task; first = condition present.
TASK_LABEL_WORDS: dict[Task, tuple[str, str]] = {
    Task.CONGESTION: ("congested", "non-congested"),
    Task.CRACK: ("cracked", "non-cracked"),
}


class ManifestError(ValueError):
    """Malformed or inconsistent manifest file."""


@dataclass(frozen=True)
class ClassificationSample:
    image_path: Path
    true_class: Verdict


@dataclass(frozen=True)
class DetectionSample:
    image_path: Path
    ground_truth: tuple[tuple[str, BoundingBox], ...]


@dataclass(frozen=True)
class Manifest:
    """Ordered, immutable sample index; file order is the processing order."""

    task: Task
    kind: str  # "classification" | "detection"
    samples: tuple[ClassificationSample, ...] | tuple[DetectionSample, ...]
    source: Path

    def __len__(self) -> int:
        return len(self.samples)


def _read_rows(path: Path, expected_header: list[str]) -> list[list[str]]:
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != expected_header:
        raise ManifestError(
            f"{path}: expected header {','.join(expected_header)!r}, "
            f"got {','.join(rows[0]) if rows else '<empty file>'!r}"
        )
    return rows[1:]


def _resolve_image(manifest_path: Path, raw: str, row_no: int) -> Path:
    image_path = Path(raw)
    if not image_path.is_absolute():
        image_path = manifest_path.parent / image_path
    if not image_path.is_file():
        raise ManifestError(f"{manifest_path}: row {row_no}: image not found: {raw}")
    return image_path


def load_classification_manifest(path: str | Path, task: Task | str) -> Manifest:
    """Load a "path,label" manifest; labels are the task's two class words."""
    task = Task(task) if isinstance(task, str) else task
    if task not in TASK_LABEL_WORDS:
        raise ManifestError(f"not a classification task: {task.value}")
    positive_word, negative_word = TASK_LABEL_WORDS[task]
    manifest_path = Path(path)

    samples: list[ClassificationSample] = []
    seen: set[str] = set()
    for row_no, row in enumerate(_read_rows(manifest_path, CLASSIFICATION_HEADER), start=2):
        if len(row) != 2:
            raise ManifestError(f"{manifest_path}: row {row_no}: expected 2 fields, got {len(row)}")
        raw_path, label = row[0].strip(), row[1].strip().lower()
        if raw_path in seen:
            raise ManifestError(f"{manifest_path}: row {row_no}: duplicate path {raw_path!r}")
        seen.add(raw_path)
        if label == positive_word:
            true_class = Verdict.POSITIVE
        elif label == negative_word:
            true_class = Verdict.NEGATIVE
        else:
            raise ManifestError(
                f"{manifest_path}: row {row_no}: unknown label {row[1]!r} "
                f"(expected {positive_word!r} or {negative_word!r})"
            )
        samples.append(ClassificationSample(_resolve_image(manifest_path, raw_path, row_no), true_class))
    return Manifest(task=task, kind="classification", samples=tuple(samples), source=manifest_path)


def load_detection_manifest(path: str | Path) -> Manifest:
    """Load a "path,class,xmin,ymin,xmax,ymax" manifest, grouped by path."""
    manifest_path = Path(path)
    grouped: dict[str, list[tuple[str, BoundingBox]]] = {}
    resolved: dict[str, Path] = {}
    for row_no, row in enumerate(_read_rows(manifest_path, DETECTION_HEADER), start=2):
        if len(row) != 6:
            raise ManifestError(f"{manifest_path}: row {row_no}: expected 6 fields, got {len(row)}")
        raw_path, class_name = row[0].strip(), row[1].strip()
        if class_name not in DETECTION_CLASSES:
            raise ManifestError(
                f"{manifest_path}: row {row_no}: unknown class {row[1]!r} "
                f"(expected one of {', '.join(DETECTION_CLASSES)})"
            )
        try:
            coords = [float(v) for v in row[2:6]]
        except ValueError as exc:
            raise ManifestError(f"{manifest_path}: row {row_no}: bad coordinate: {exc}") from None
        if min(coords) < 0:
            raise ManifestError(f"{manifest_path}: row {row_no}: negative coordinate")
        try:
            box = BoundingBox(*coords)
        except ValueError as exc:
            raise ManifestError(f"{manifest_path}: row {row_no}: {exc}") from None
        if raw_path not in grouped:
            grouped[raw_path] = []
            resolved[raw_path] = _resolve_image(manifest_path, raw_path, row_no)
        grouped[raw_path].append((class_name, box))

    samples = tuple(
        DetectionSample(image_path=resolved[raw], ground_truth=tuple(boxes))
        for raw, boxes in grouped.items()
    )
    return Manifest(task=Task.HELMET, kind="detection", samples=samples, source=manifest_path)


def class_counts(manifest: Manifest) -> dict[str, int]:
    """Per-class tallies used by `inspect` and sanity tests."""
    if manifest.kind == "classification":
        counts = {"positive": 0, "negative": 0}
        for sample in manifest.samples:
            key = "positive" if sample.true_class is Verdict.POSITIVE else "negative"
            counts[key] += 1
        return counts
    counts = {name: 0 for name in DETECTION_CLASSES}
    for sample in manifest.samples:
        for class_name, _ in sample.ground_truth:
            counts[class_name] += 1
    return counts
