"""Scoring and report emission.

Classification is scored into a confusion matrix (Positive = condition
present); detection is scored per class with greedy IoU matching. Reports
render as CSV, Markdown or a JSON summary, with published CNN baseline
rows appended from a constants fixture and flagged "paper-reported".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources

from .datasets import Manifest
from .geometry import iou
from .pipelines import DetectionPrediction, SampleResult
from .prompts import Verdict

REPORT_FORMATS = ("csv", "markdown", "json")
SCORED_DETECTION_CLASSES = ("Helmet", "NoHelmet")

MEASURED = "measured"
PAPER_REPORTED = "paper-reported"


def round_half_up(value: float, places: int = 2) -> float:
    """Decimal half-up rounding: 0.935 -> 0.94, unlike bankers' rounding."""
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0 else 0.0


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    unknown: int = 0  # unparseable verdicts, already folded into fp/fn

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return _ratio(2 * p * r, p + r)

    @property
    def accuracy(self) -> float:
        return _ratio(self.tp + self.tn, self.total)


@dataclass(frozen=True)
class ClassReport:
    precision: float
    recall: float
    f1: float
    accuracy: float
    mean_latency_s: float


@dataclass(frozen=True)
class ClassScores:
    """Per-class detection counts with derived ratios."""

    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return _ratio(2 * p * r, p + r)


@dataclass(frozen=True)
class DetectionReport:
    per_class: dict[str, ClassScores]
    match_iou: float
    mean_latency_s: float
    dropped: int = 0


def mean_latency_s(results: list[SampleResult]) -> float:
    """Mean per-sample latency in seconds over samples that made calls."""
    latencies = [r.latency_ms for r in results if r.latency_ms is not None]
    if not latencies:
        return 0.0
    return sum(latencies) / 1000.0 / len(latencies)


def _check_alignment(results: list[SampleResult], manifest: Manifest) -> None:
    if len(results) != len(manifest.samples):
        raise ValueError(
            f"results/manifest length mismatch: {len(results)} vs {len(manifest.samples)}"
        )
    for result, sample in zip(results, manifest.samples):
        if result.sample_id != str(sample.image_path):
            raise ValueError(
                f"results out of order: {result.sample_id} vs {sample.image_path}"
            )


def score_classification(
    results: list[SampleResult], manifest: Manifest
) -> tuple[ConfusionMatrix, ClassReport]:
    """Count verdicts against ground truth; Unknown and failures score as wrong."""
    if manifest.kind != "classification":
        raise ValueError("classification manifest required")
    _check_alignment(results, manifest)
    tp = fp = fn = tn = unknown = 0
    for result, sample in zip(results, manifest.samples):
        verdict = result.prediction if isinstance(result.prediction, Verdict) else None
        truth = sample.true_class
        if verdict is Verdict.POSITIVE:
            if truth is Verdict.POSITIVE:
                tp += 1
            else:
                fp += 1
        elif verdict is Verdict.NEGATIVE:
            if truth is Verdict.POSITIVE:
                fn += 1
            else:
                tn += 1
        else:  # Unknown verdict or sample failure: wrong for whichever truth
            if verdict is Verdict.UNKNOWN:
                unknown += 1
            if truth is Verdict.POSITIVE:
                fn += 1
            else:
                fp += 1
    matrix = ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn, unknown=unknown)
    report = ClassReport(
        precision=matrix.precision,
        recall=matrix.recall,
        f1=matrix.f1,
        accuracy=matrix.accuracy,
        mean_latency_s=mean_latency_s(results),
    )
    return matrix, report


def score_detection(
    results: list[SampleResult], manifest: Manifest, match_iou: float = 0.5
) -> DetectionReport:
    """Greedy per-class matching: descending score, best unmatched GT wins.

    A prediction matches at most one ground-truth box of its own class at
    IoU >= match_iou; unmatched predictions are FPs and unmatched ground
    truth are FNs. Boxes with the wrong class never match, so a correctly
    placed but mislabeled box costs one FP plus one FN.
    """
    if manifest.kind != "detection":
        raise ValueError("detection manifest required")
    if not 0.0 < match_iou <= 1.0:
        raise ValueError(f"match_iou must be in (0, 1]: {match_iou}")
    _check_alignment(results, manifest)

    counts = {name: [0, 0, 0] for name in SCORED_DETECTION_CLASSES}  # tp, fp, fn
    dropped = 0
    for result, sample in zip(results, manifest.samples):
        prediction = result.prediction
        if isinstance(prediction, DetectionPrediction):
            dropped += prediction.dropped
        for class_name in SCORED_DETECTION_CLASSES:
            if isinstance(prediction, DetectionPrediction):
                preds = [b for b in prediction.boxes if b.label.value == class_name]
            else:
                preds = []
            preds.sort(key=lambda b: -b.score)
            truths = [box for cls, box in sample.ground_truth if cls == class_name]
            matched: set[int] = set()
            for pred in preds:
                best_idx, best_iou = -1, 0.0
                for idx, truth_box in enumerate(truths):
                    if idx in matched:
                        continue
                    overlap = iou(pred.box, truth_box)
                    if overlap > best_iou:
                        best_idx, best_iou = idx, overlap
                if best_idx >= 0 and best_iou >= match_iou:
                    matched.add(best_idx)
                    counts[class_name][0] += 1
                else:
                    counts[class_name][1] += 1
            counts[class_name][2] += len(truths) - len(matched)

    per_class = {
        name: ClassScores(tp=c[0], fp=c[1], fn=c[2]) for name, c in counts.items()
    }
    return DetectionReport(
        per_class=per_class,
        match_iou=match_iou,
        mean_latency_s=mean_latency_s(results),
        dropped=dropped,
    )


@dataclass(frozen=True)
class ReportRow:
    """One table line; ratios stay full-precision until rendering."""

    model: str
    prompt_id: str | None
    class_name: str | None
    precision: float | None
    recall: float | None
    f1: float | None
    mean_latency_s: float
    source: str = MEASURED


@dataclass
class RunReport:
    task: str
    pipeline: str
    prompt_id: str | None
    counts: dict
    ratios: dict
    mean_latency_s: float
    rows: list[ReportRow] = field(default_factory=list)


def classification_run_report(
    task: str,
    pipeline: str,
    model_label: str,
    prompt_id: str | None,
    matrix: ConfusionMatrix,
    report: ClassReport,
) -> RunReport:
    row = ReportRow(
        model=model_label,
        prompt_id=prompt_id,
        class_name=None,
        precision=report.precision,
        recall=report.recall,
        f1=report.f1,
        mean_latency_s=report.mean_latency_s,
    )
    return RunReport(
        task=task,
        pipeline=pipeline,
        prompt_id=prompt_id,
        counts={
            "tp": matrix.tp,
            "fp": matrix.fp,
            "fn": matrix.fn,
            "tn": matrix.tn,
            "unknown": matrix.unknown,
        },
        ratios={
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
            "accuracy": report.accuracy,
        },
        mean_latency_s=report.mean_latency_s,
        rows=[row],
    )


def detection_run_report(
    task: str,
    pipeline: str,
    model_label: str,
    prompt_id: str | None,
    report: DetectionReport,
) -> RunReport:
    rows = [
        ReportRow(
            model=model_label,
            prompt_id=prompt_id,
            class_name=name,
            precision=scores.precision,
            recall=scores.recall,
            f1=scores.f1,
            mean_latency_s=report.mean_latency_s,
        )
        for name, scores in report.per_class.items()
    ]
    return RunReport(
        task=task,
        pipeline=pipeline,
        prompt_id=prompt_id,
        counts={
            name: {"tp": s.tp, "fp": s.fp, "fn": s.fn}
            for name, s in report.per_class.items()
        }
        | {"dropped": report.dropped},
        ratios={
            name: {"precision": s.precision, "recall": s.recall, "f1": s.f1}
            for name, s in report.per_class.items()
        },
        mean_latency_s=report.mean_latency_s,
        rows=rows,
    )


def benchmark_rows(task: str) -> list[ReportRow]:
    """Published CNN baseline rows for the task, flagged paper-reported."""
    raw = json.loads(
        resources.files("vlmbench").joinpath("data/benchmark_rows.json").read_text("utf-8")
    )
    rows = []
    for entry in raw.get(task, []):
        rows.append(
            ReportRow(
                model=entry["model"],
                prompt_id=None,
                class_name=entry["class"],
                precision=entry["precision"],
                recall=entry["recall"],
                f1=entry["f1"],
                mean_latency_s=entry["inference_time_s"],
                source=PAPER_REPORTED,
            )
        )
    return rows


def _fmt_ratio(value: float | None, empty: str) -> str:
    if value is None:
        return empty
    return f"{round_half_up(value):.2f}"


def emit_report(reports: list[RunReport], fmt: str) -> str:
    """Render reports as one document; same inputs give identical bytes."""
    if not reports:
        raise ValueError("at least one report required")
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {REPORT_FORMATS}")

    if fmt == "json":
        summaries = [
            {
                "task": r.task,
                "pipeline": r.pipeline,
                "prompt_id": r.prompt_id,
                "counts": r.counts,
                "ratios": r.ratios,
                "mean_latency_s": r.mean_latency_s,
            }
            for r in reports
        ]
        payload = summaries[0] if len(summaries) == 1 else summaries
        return json.dumps(payload, indent=2) + "\n"

    all_rows = [row for report in reports for row in report.rows]
    if fmt == "csv":
        lines = ["model,prompt,class,precision,recall,f1,time_per_image_s,source"]
        for row in all_rows:
            lines.append(
                ",".join(
                    [
                        row.model,
                        row.prompt_id or "",
                        row.class_name or "",
                        _fmt_ratio(row.precision, ""),
                        _fmt_ratio(row.recall, ""),
                        _fmt_ratio(row.f1, ""),
                        _fmt_ratio(row.mean_latency_s, ""),
                        row.source,
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    lines = [
        "| Model | Prompt | Class | Precision | Recall | F1 | Time/image | Source |",
        "| --- | --- | --- | --- | --- | --- | --- | --- |",
    ]
    for row in all_rows:
        lines.append(
            "| "
            + " | ".join(
                [
                    row.model,
                    row.prompt_id or "-",
                    row.class_name or "-",
                    _fmt_ratio(row.precision, "-"),
                    _fmt_ratio(row.recall, "-"),
                    _fmt_ratio(row.f1, "-"),
                    f"{_fmt_ratio(row.mean_latency_s, '-')} sec",
                    row.source,
                ]
            )
            + " |"
        )
    return "\n".join(lines) + "\n"
