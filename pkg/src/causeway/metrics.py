"""Score predicted cause sets against ground-truth annotations.

Three rates, each averaged over annotations: top-1 accuracy against the
primary cause, and precision/recall of the top-3 predicted causes against the
annotated true-cause set. An annotation with no matching prediction scores
zero on all three.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateAnnotationTime, EmptyTruth, MetricsError
from .frames import _num
from .graph import CauseSet, f_from_json

TOP_K = 3


@dataclass
class GroundTruthAnnotation:
    anomaly_time: float
    true_causes: set[str]
    primary_cause: str

    def __post_init__(self):
        if not self.true_causes:
            raise MetricsError(f"annotation at {self.anomaly_time} has no true causes")
        if self.primary_cause not in self.true_causes:
            raise MetricsError(
                f"annotation at {self.anomaly_time}: primary cause "
                f"{self.primary_cause!r} is not among the true causes")


@dataclass
class PerAnomalyScore:
    anomaly_time: float
    matched: bool
    top1_correct: bool
    precision_at_3: float
    recall_at_3: float

    def to_json(self) -> dict:
        return {
            "anomaly_time": _num(self.anomaly_time),
            "matched": self.matched,
            "top1_correct": self.top1_correct,
            "precision_at_3": self.precision_at_3,
            "recall_at_3": self.recall_at_3,
        }


@dataclass
class EvaluationReport:
    acc_at_1: float
    precision_at_3: float
    recall_at_3: float
    n_evaluated: int                      # matched (prediction, annotation) pairs
    per_anomaly: list[PerAnomalyScore]

    def to_json(self) -> dict:
        return {
            "acc_at_1": self.acc_at_1,
            "precision_at_3": self.precision_at_3,
            "recall_at_3": self.recall_at_3,
            "n_evaluated": self.n_evaluated,
            "per_anomaly": [s.to_json() for s in self.per_anomaly],
        }


def _match(annotation_time: float, available: dict[float, CauseSet],
           tolerance: float) -> float | None:
    """Key of the closest unclaimed prediction within the tolerance, if any."""
    best_key, best_gap = None, None
    for t in available:
        gap = abs(t - annotation_time)
        if gap <= tolerance and (best_gap is None or gap < best_gap or
                                 (gap == best_gap and t < best_key)):
            best_key, best_gap = t, gap
    return best_key


def evaluate(predictions: list[CauseSet], truth: list[GroundTruthAnnotation],
             tolerance_seconds: float = 0.0) -> EvaluationReport:
    """Match predictions to annotations by anomaly time and average the metrics.

    Matching is exact by default; a positive tolerance claims the closest
    prediction within it (each prediction used at most once). Precision@3
    divides by min(3, |prediction|) so a short but fully correct prediction
    is not penalized; an empty prediction scores zero.
    """
    if not truth:
        raise EmptyTruth("no annotations to evaluate against")
    seen: set[float] = set()
    for ann in truth:
        if ann.anomaly_time in seen:
            raise DuplicateAnnotationTime(
                f"duplicate annotation time {ann.anomaly_time}")
        seen.add(ann.anomaly_time)

    available: dict[float, CauseSet] = {}
    for pred in predictions:
        if pred.anomaly_time is None:
            raise MetricsError("every prediction needs an anomaly_time to be matched")
        available.setdefault(float(pred.anomaly_time), pred)

    scores: list[PerAnomalyScore] = []
    n_matched = 0
    for ann in sorted(truth, key=lambda a: a.anomaly_time):
        key = _match(ann.anomaly_time, available, tolerance_seconds)
        if key is None:
            scores.append(PerAnomalyScore(ann.anomaly_time, False, False, 0.0, 0.0))
            continue
        pred = available.pop(key)
        n_matched += 1
        top = pred.channels()[:TOP_K]
        hits = len(set(top) & ann.true_causes)
        precision = hits / min(TOP_K, len(top)) if top else 0.0
        recall = hits / len(ann.true_causes)
        top1 = bool(top) and top[0] == ann.primary_cause
        scores.append(PerAnomalyScore(ann.anomaly_time, True, top1, precision, recall))

    n = len(scores)
    return EvaluationReport(
        acc_at_1=sum(s.top1_correct for s in scores) / n,
        precision_at_3=sum(s.precision_at_3 for s in scores) / n,
        recall_at_3=sum(s.recall_at_3 for s in scores) / n,
        n_evaluated=n_matched,
        per_anomaly=scores,
    )


def report_table(report: EvaluationReport) -> str:
    """Plain-text summary table."""
    rows = [
        ("Acc@1", report.acc_at_1),
        ("Precision@3", report.precision_at_3),
        ("Recall@3", report.recall_at_3),
    ]
    lines = [f"{'metric':<12} {'value':>8}", "-" * 21]
    lines += [f"{name:<12} {value:>8.4f}" for name, value in rows]
    lines.append(f"{'matched':<12} {report.n_evaluated:>8d}")
    return "\n".join(lines)


# --- file formats -----------------------------------------------------------

def load_annotations(path: str | Path) -> list[GroundTruthAnnotation]:
    """Annotation file: JSON list of {anomaly_time, primary_cause, true_causes}."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, list):
        raise MetricsError(f"annotation file {path} must hold a JSON list")
    out = []
    for item in doc:
        try:
            out.append(GroundTruthAnnotation(
                anomaly_time=float(item["anomaly_time"]),
                true_causes={str(c) for c in item["true_causes"]},
                primary_cause=str(item["primary_cause"]),
            ))
        except (KeyError, TypeError) as exc:
            raise MetricsError(f"bad annotation entry {item!r}: {exc}") from exc
    return out


def _cause_set_from_json(item: dict) -> CauseSet:
    causes = [(str(c["channel"]), f_from_json(c.get("f_stat", 0.0)))
              for c in item.get("causes", [])]
    return CauseSet(target=str(item.get("target", "")), causes=causes,
                    anomaly_time=float(item["anomaly_time"]))


def load_predictions(path: str | Path) -> list[CauseSet]:
    """Predictions: a JSON list file, or a directory of per-anomaly JSON records."""
    path = Path(path)
    items: list[dict] = []
    if path.is_dir():
        for child in sorted(path.glob("*.json")):
            with open(child, "r", encoding="utf-8") as fh:
                items.append(json.load(fh))
    else:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, list):
            raise MetricsError(f"prediction file {path} must hold a JSON list")
        items = doc
    try:
        return [_cause_set_from_json(item) for item in items]
    except (KeyError, TypeError) as exc:
        raise MetricsError(f"bad prediction entry: {exc}") from exc
