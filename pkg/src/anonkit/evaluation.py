"""Entity-level scoring of predictions against gold annotations.

A prediction counts only when document, byte span and type all equal a gold
item; partial overlaps score as one false positive plus one false negative.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .core import Detection, EntityType, Span
from .errors import OverlappingGold


@dataclass(frozen=True)
class Annotation:
    doc_id: str
    span: Span
    entity_type: EntityType
    text: str = ""

    @property
    def key(self) -> tuple:
        return (self.doc_id, self.span.start, self.span.end, self.entity_type.name)

    @classmethod
    def from_dict(cls, row: dict) -> "Annotation":
        doc = row["doc"]
        if row.get("location"):
            doc = f"{doc}#{row['location']}"
        return cls(doc, Span(int(row["start"]), int(row["end"])), EntityType.parse(row["type"]),
                   row.get("text", ""))

    def to_dict(self) -> dict:
        return {"doc": self.doc_id, "start": self.span.start, "end": self.span.end,
                "type": self.entity_type.name, "text": self.text}


# Gold and predictions share one shape.
GoldAnnotation = Annotation


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


def compute_metrics(tp: int, fp: int, fn: int) -> MetricsReport:
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    total = precision + recall
    f1 = 2 * precision * recall / total if total else 0.0
    return MetricsReport(tp, fp, fn, precision, recall, f1)


def annotations_from_detections(doc_id: str, detections: Iterable[Detection],
                                include_preserved: bool = False) -> list[Annotation]:
    out = []
    for d in detections:
        if d.preserved and not include_preserved:
            continue
        doc = f"{doc_id}#{d.location}" if d.location else doc_id
        out.append(Annotation(doc, d.span, d.entity_type, d.text))
    return out


def check_gold(gold: Iterable[Annotation]) -> None:
    by_doc: dict[str, list[Span]] = defaultdict(list)
    for g in gold:
        by_doc[g.doc_id].append(g.span)
    for doc, spans in by_doc.items():
        spans.sort()
        for a, b in zip(spans, spans[1:]):
            if a.overlaps(b):
                raise OverlappingGold(f"{doc}: gold spans [{a.start},{a.end}) and [{b.start},{b.end}) overlap")


def match_detections(gold: Iterable[Annotation], pred: Iterable[Annotation]) -> tuple[int, int, int]:
    """Return ``(tp, fp, fn)`` under exact document/span/type matching."""
    gold = list(gold)
    pred = list(pred)
    check_gold(gold)
    available = Counter(g.key for g in gold)
    tp = 0
    for p in pred:
        if available[p.key] > 0:
            available[p.key] -= 1
            tp += 1
    return tp, len(pred) - tp, len(gold) - tp


def evaluate(gold: list[Annotation], pred: list[Annotation]) -> tuple[MetricsReport, dict[str, MetricsReport]]:
    """Overall metrics plus a per-type breakdown."""
    overall = compute_metrics(*match_detections(gold, pred))
    per_type = {}
    for name in sorted({a.entity_type.name for a in gold} | {a.entity_type.name for a in pred}):
        g = [a for a in gold if a.entity_type.name == name]
        p = [a for a in pred if a.entity_type.name == name]
        per_type[name] = compute_metrics(*match_detections(g, p))
    return overall, per_type


def load_annotations(path: Path | str, include_preserved: bool = False) -> list[Annotation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                if row.get("preserved") and not include_preserved:
                    continue
                out.append(Annotation.from_dict(row))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad annotation ({exc})") from None
    return out


def format_table(overall: MetricsReport, per_type: dict[str, MetricsReport]) -> str:
    header = f"{'scope':<20} {'TP':>5} {'FP':>5} {'FN':>5} {'P':>8} {'R':>8} {'F1':>8}"
    lines = [header, "-" * len(header)]
    for name, m in [*per_type.items(), ("OVERALL", overall)]:
        lines.append(f"{name:<20} {m.tp:>5} {m.fp:>5} {m.fn:>5} "
                     f"{m.precision:>8.4f} {m.recall:>8.4f} {m.f1:>8.4f}")
    return "\n".join(lines)
