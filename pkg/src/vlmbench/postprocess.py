"""Turns raw {person, motorbike, helmet} detections into labeled rider boxes.

Three steps: per-class NMS, person-to-motorbike association (drops
pedestrians and other bystanders), then helmet assignment deciding
Helmet vs NoHelmet for every retained rider.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .geometry import BoundingBox, ScoredDetection, iou, nms, overlap_over_min


class AssocMetric(enum.Enum):
    """Overlap metric used for person<->motorbike and person<->helmet pairing."""

    IOU = "iou"
    OVERLAP_OVER_MIN = "iomin"


class RiderLabel(enum.Enum):
    HELMET = "Helmet"
    NOHELMET = "NoHelmet"


@dataclass(frozen=True)
class AssociationConfig:
    """Thresholds for the post-processing pipeline.

    A helmet box can never reach IoU 0.6 against a full-person box, so the
    containment-style metric is the default; plain IoU stays selectable.
    """

    metric: AssocMetric = AssocMetric.OVERLAP_OVER_MIN
    assoc_threshold: float = 0.6
    nms_threshold: float = 0.5

    def __post_init__(self) -> None:
        for name in ("assoc_threshold", "nms_threshold"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must be in (0, 1): {value}")

    def overlap(self, a: BoundingBox, b: BoundingBox) -> float:
        if self.metric is AssocMetric.IOU:
            return iou(a, b)
        return overlap_over_min(a, b)


@dataclass(frozen=True)
class RiderVerdict:
    """A retained rider: its person box, the motorbike it sits on, a label."""

    person_box: BoundingBox
    motorbike_box: BoundingBox
    label: RiderLabel
    score: float


def riders_for_crops(
    persons: list[ScoredDetection],
    motorbikes: list[ScoredDetection],
    cfg: AssociationConfig,
) -> list[tuple[ScoredDetection, ScoredDetection]]:
    """NMS plus person-to-motorbike association, helmets not consulted.

    Each surviving person is bound to the single motorbike maximizing the
    overlap metric, provided that overlap strictly exceeds
    cfg.assoc_threshold. Pairs come back ordered by descending person
    score (ties keep detector order). Two persons may share a motorbike.
    """
    kept_persons = nms(persons, cfg.nms_threshold)
    kept_motorbikes = nms(motorbikes, cfg.nms_threshold)

    pairs: list[tuple[ScoredDetection, ScoredDetection]] = []
    for person in kept_persons:
        best: ScoredDetection | None = None
        best_overlap = 0.0
        for motorbike in kept_motorbikes:
            ratio = cfg.overlap(person.box, motorbike.box)
            if ratio > best_overlap:
                best, best_overlap = motorbike, ratio
        if best is not None and best_overlap > cfg.assoc_threshold:
            pairs.append((person, best))
    return pairs


def associate_riders(
    persons: list[ScoredDetection],
    motorbikes: list[ScoredDetection],
    helmets: list[ScoredDetection],
    cfg: AssociationConfig,
) -> list[RiderVerdict]:
    """Full post-processing: association plus Helmet/NoHelmet assignment.

    A helmet box labels at most one rider: the retained person with the
    highest overlap above cfg.assoc_threshold (a helmet is worn by one
    head, and this stops a single box from blanketing a pillion
    passenger). Persons left without an assigned helmet are NoHelmet.
    """
    pairs = riders_for_crops(persons, motorbikes, cfg)
    kept_helmets = nms(helmets, cfg.nms_threshold)

    with_helmet: set[int] = set()
    for helmet in kept_helmets:
        best_idx: int | None = None
        best_overlap = 0.0
        for idx, (person, _) in enumerate(pairs):
            ratio = cfg.overlap(person.box, helmet.box)
            if ratio > best_overlap:
                best_idx, best_overlap = idx, ratio
        if best_idx is not None and best_overlap > cfg.assoc_threshold:
            with_helmet.add(best_idx)

    return [
        RiderVerdict(
            person_box=person.box,
            motorbike_box=motorbike.box,
            label=RiderLabel.HELMET if idx in with_helmet else RiderLabel.NOHELMET,
            score=person.score,
        )
        for idx, (person, motorbike) in enumerate(pairs)
    ]
