"""Zero-shot vision-language benchmark harness.

Evaluates similarity, chat-cascade and detector-based pipelines on
congestion, crack and helmet-violation tasks against any backend that
speaks the project's wire contract, with record/replay for reproducible
desk-scale runs.
"""

from .backends import (
    BackendEndpoint,
    BackendError,
    EndpointKind,
    HttpBackend,
    MockBackend,
    PipelineError,
    ProtocolError,
    RecordingBackend,
    ReplayBackend,
    ReplayMissError,
)
from .datasets import Manifest, load_classification_manifest, load_detection_manifest
from .geometry import BoundingBox, ScoredDetection, clamp_crop, iou, nms, overlap_over_min
from .metrics import (
    ConfusionMatrix,
    emit_report,
    round_half_up,
    score_classification,
    score_detection,
)
from .postprocess import (
    AssociationConfig,
    AssocMetric,
    RiderLabel,
    RiderVerdict,
    associate_riders,
    riders_for_crops,
)
from .prompts import (
    AliasMap,
    CascadeSpec,
    DirectPrompt,
    LabelPair,
    Task,
    TextualDetectionPrompt,
    Verdict,
    build_followup,
    catalog_lookup,
    parse_label,
)

__version__ = "0.1.0"

__all__ = [
    "AliasMap",
    "AssocMetric",
    "AssociationConfig",
    "BackendEndpoint",
    "BackendError",
    "BoundingBox",
    "CascadeSpec",
    "ConfusionMatrix",
    "DirectPrompt",
    "EndpointKind",
    "HttpBackend",
    "LabelPair",
    "Manifest",
    "MockBackend",
    "PipelineError",
    "ProtocolError",
    "RecordingBackend",
    "ReplayBackend",
    "ReplayMissError",
    "RiderLabel",
    "RiderVerdict",
    "ScoredDetection",
    "Task",
    "TextualDetectionPrompt",
    "Verdict",
    "associate_riders",
    "build_followup",
    "catalog_lookup",
    "clamp_crop",
    "emit_report",
    "iou",
    "load_classification_manifest",
    "load_detection_manifest",
    "nms",
    "overlap_over_min",
    "parse_label",
    "riders_for_crops",
    "round_half_up",
    "score_classification",
    "score_detection",
]
