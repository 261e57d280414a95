"""Axis-aligned box arithmetic: IoU, overlap-over-min, NMS and crop clamping.

Boxes follow the Pascal-VOC convention (xmin, ymin, xmax, ymax) in pixel
coordinates. Coordinates are real-valued because detector endpoints may
return fractional pixels. All functions here are pure and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BoundingBox:
    """Pascal-VOC rectangle. Zero-area boxes are rejected at construction.

    Coordinates may be negative so that raw detector output reaching past
    the image frame stays representable; clamp_crop and the manifest
    loaders are the places that pin boxes inside [0, w] x [0, h].
    """

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self) -> None:
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(
                f"degenerate box: ({self.xmin}, {self.ymin}, {self.xmax}, {self.ymax})"
            )

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)


@dataclass(frozen=True)
class ScoredDetection:
    """One detector hit: a box, an index into the query list and a confidence."""

    box: BoundingBox
    class_index: int
    score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score out of range: {self.score}")
        if self.class_index < 0:
            raise ValueError(f"negative class index: {self.class_index}")


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    """Area of the overlap rectangle; 0 when the boxes are disjoint."""
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union, in [0, 1]."""
    inter = intersection_area(a, b)
    if inter <= 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def overlap_over_min(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over the smaller box's area, in [0, 1].

    Containment-style metric: a small box fully inside a large one scores
    1.0 where IoU stays near zero. Always >= iou(a, b).
    """
    inter = intersection_area(a, b)
    if inter <= 0.0:
        return 0.0
    return inter / min(a.area, b.area)


def nms(dets: list[ScoredDetection], iou_threshold: float) -> list[ScoredDetection]:
    """Greedy non-maximum suppression over a single-class detection list.

    Candidates are visited by descending score (ties keep input order) and a
    candidate is suppressed when its IoU with any already-kept box is
    strictly greater than `iou_threshold`. The result is sorted by
    descending score and is a subset of the input.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1): {iou_threshold}")
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    kept: list[ScoredDetection] = []
    for i in order:
        candidate = dets[i]
        if all(iou(candidate.box, k.box) <= iou_threshold for k in kept):
            kept.append(candidate)
    return kept


def clamp_crop(box: BoundingBox, width: float, height: float, pad: float = 0.0) -> BoundingBox:
    """Expand `box` by `pad` on each side and intersect with the image frame.

    Raises ValueError when the padded box lies entirely outside the
    `width` x `height` image.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"image size must be positive: {width}x{height}")
    if pad < 0:
        raise ValueError(f"pad must be non-negative: {pad}")
    xmin = max(0.0, box.xmin - pad)
    ymin = max(0.0, box.ymin - pad)
    xmax = min(float(width), box.xmax + pad)
    ymax = min(float(height), box.ymax + pad)
    if xmax <= xmin or ymax <= ymin:
        raise ValueError(f"box {box.as_tuple()} lies outside the {width}x{height} image")
    return BoundingBox(xmin, ymin, xmax, ymax)
