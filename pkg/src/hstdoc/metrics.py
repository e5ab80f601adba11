"""Layout-quality metrics.

Overlap   = (100/N) * sum_i sum_{j!=i} area(b_i & b_j) / area(b_i)
Alignment = -(100/N) * sum_i log(1 - g_i), with g_i the smallest left,
            centre or right edge distance to any other box, divided by W.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import kernels
from .layout_engine import EngineReport
from .layout_seq import LayoutDoc

SCALE = 100.0


def _boxes(doc: LayoutDoc):
    boxes = doc.boxes
    if any(b is None for b in boxes):
        raise ValueError("metrics need every box")
    return boxes


def overlap(doc: LayoutDoc) -> float:
    boxes = _boxes(doc)
    if not boxes:
        return 0.0
    return SCALE * kernels.overlap_sum(boxes) / len(boxes)


def alignment(doc: LayoutDoc) -> float:
    boxes = _boxes(doc)
    if len(boxes) < 2:
        return 0.0
    return SCALE * kernels.alignment_sum(boxes, doc.width) / len(boxes)


def failure_rate(reports: Sequence[EngineReport]) -> float:
    if not reports:
        return 0.0
    return sum(r.outcome == "excluded" for r in reports) / len(reports)


@dataclass
class LayoutMetrics:
    overlap: float = 0.0
    alignment: float = 0.0
    n_docs: int = 0
    per_doc: dict[str, list] = field(default_factory=lambda: {"doc_id": [], "overlap": [], "alignment": []})

    def to_dict(self) -> dict:
        return {"n_docs": self.n_docs, "overlap": self.overlap, "alignment": self.alignment,
                "backend": kernels.BACKEND, "per_doc": self.per_doc}


def corpus_metrics(docs: Iterable[LayoutDoc]) -> LayoutMetrics:
    m = LayoutMetrics()
    for n, doc in enumerate(docs):
        m.per_doc["doc_id"].append(doc.doc_id or str(n))
        m.per_doc["overlap"].append(overlap(doc))
        m.per_doc["alignment"].append(alignment(doc))
    m.n_docs = len(m.per_doc["doc_id"])
    if m.n_docs:
        m.overlap = sum(m.per_doc["overlap"]) / m.n_docs
        m.alignment = sum(m.per_doc["alignment"]) / m.n_docs
    return m
