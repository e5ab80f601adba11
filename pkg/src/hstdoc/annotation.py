"""Open-set VIE entity graph built from an HST tree."""

from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Sequence

from .glyphs import GlyphModel
from .hst import HstNode, HstTree, NodeKind

CATEGORIES = ("header", "key", "value", "other")

Box = tuple[int, int, int, int]


@dataclass(frozen=True)
class Entity:
    id: int
    text: str
    category: str
    box: Box | None = None
    # outgoing links only: every pair starts with this entity's id
    links: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if not self.text:
            raise ValueError(f"entity {self.id} has empty text")
        if self.box is not None:
            x1, y1, x2, y2 = self.box
            if not (x1 < x2 and y1 < y2):
                raise ValueError(f"entity {self.id} has degenerate box {self.box}")
        for pair in self.links:
            if pair[0] != self.id:
                raise ValueError(f"entity {self.id} carries foreign link {pair}")


@dataclass(frozen=True)
class DocumentAnnotation:
    width: int
    height: int
    entities: tuple[Entity, ...] = ()

    def __post_init__(self):
        ids = {e.id for e in self.entities}
        for e in self.entities:
            for _, child in e.links:
                if child not in ids:
                    raise ValueError(f"link {e.id}->{child} points to a missing entity")

    def links(self) -> list[tuple[int, int]]:
        return [pair for e in self.entities for pair in e.links]

    def by_id(self, entity_id: int) -> Entity:
        ent = self.entities[entity_id]
        if ent.id != entity_id:
            ent = next(e for e in self.entities if e.id == entity_id)
        return ent

    def children(self, entity_id: int) -> list[int]:
        return [c for _, c in self.by_id(entity_id).links]

    def with_boxes(self, boxes: Sequence[Box]) -> DocumentAnnotation:
        if len(boxes) != len(self.entities):
            raise ValueError(f"{len(boxes)} boxes for {len(self.entities)} entities")
        ents = tuple(replace(e, box=tuple(int(v) for v in b)) for e, b in zip(self.entities, boxes))
        return replace(self, entities=ents)


class EntitySlot(NamedTuple):
    """Where an entity comes from in the HST tree.

    ``path`` is () for the title, (p,) for paragraph p's header and
    (p, i, j, ...) for body nodes; ``part`` tells key and value apart on
    ``key_value`` nodes.
    """

    text: str
    category: str
    path: tuple[int, ...]
    part: str
    depth: int
    parent: int | None


def entity_slots(tree: HstTree, link_headers: bool = False) -> list[EntitySlot]:
    """Entities of ``tree`` in reading (pre-order) order; list index is the id."""
    slots: list[EntitySlot] = [EntitySlot(tree.title, "header", (), "title", 0, None)]

    def visit(node: HstNode, path, parent):
        own = len(slots)
        if node.kind is NodeKind.KEY_VALUE:
            slots.append(EntitySlot(node.text, "key", path, "key", node.depth, parent))
            slots.append(EntitySlot(node.value, "value", path, "value", node.depth, own))
        elif node.kind is NodeKind.KEY:
            slots.append(EntitySlot(node.text, "key", path, "key", node.depth, parent))
        elif node.kind is NodeKind.VALUE:
            slots.append(EntitySlot(node.text, "value", path, "value", node.depth, parent))
        else:
            slots.append(EntitySlot(node.text, "other", path, "text", node.depth, parent))
        for i, child in enumerate(node.children):
            visit(child, path + (i,), own)

    for p, para in enumerate(tree.paragraphs):
        head = None
        if para.text:
            head = len(slots)
            slots.append(EntitySlot(para.text, "header", (p,), "header", 0, None))
        for i, child in enumerate(para.children):
            visit(child, (p, i), head if link_headers else None)
    return slots


def extract_entities(tree: HstTree, width: int = 850, height: int = 1100,
                     link_headers: bool = False) -> DocumentAnnotation:
    """Entities (without boxes) and parent->child links for ``tree``.

    Headers are unlinked roots unless ``link_headers`` is set, in which case
    each paragraph header also links to its direct children.
    """
    slots = entity_slots(tree, link_headers)
    outgoing: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for i, slot in enumerate(slots):
        if slot.parent is not None:
            outgoing[slot.parent].append((slot.parent, i))
    ents = tuple(Entity(i, s.text, s.category, None, tuple(outgoing[i])) for i, s in enumerate(slots))
    return DocumentAnnotation(width, height, ents)


class MissingBox(ValueError):
    def __init__(self, entity_id: int):
        self.entity_id = entity_id
        super().__init__(f"entity {entity_id} has no box")


class CyclicLinks(ValueError):
    def __init__(self, doc_index: int):
        self.doc_index = doc_index
        super().__init__(f"document {doc_index} has cyclic links")


def word_boxes(text: str, box: Box, gm: GlyphModel | None = None) -> list[dict]:
    """Split ``box`` horizontally among whitespace-separated words.

    Each word owns its glyphs plus the whitespace that follows it, weighted
    by glyph advance ratio, so the word boxes tile the entity box.
    """
    gm = gm or GlyphModel()
    x1, y1, x2, y2 = box
    spans = []
    pos = 0
    for word in text.split():
        start = text.index(word, pos)
        spans.append((word, start))
        pos = start + len(word)
    if not spans:
        return []
    weights = [gm.ratio(ch) for ch in text]
    total = sum(weights)
    cum = [0]
    for w in weights:
        cum.append(cum[-1] + w)
    out = []
    for k, (word, start) in enumerate(spans):
        begin = 0 if k == 0 else start
        end = len(text) if k + 1 == len(spans) else spans[k + 1][1]
        left = x1 + round((x2 - x1) * cum[begin] / total)
        right = x1 + round((x2 - x1) * cum[end] / total)
        out.append({"text": word, "box": [left, y1, right, y2]})
    return out


def export_funsd(ann: DocumentAnnotation, gm: GlyphModel | None = None) -> bytes:
    """FUNSD-style ``{"form": [...]}`` JSON; links appear on both endpoints."""
    touching: dict[int, list[list[int]]] = defaultdict(list)
    for parent, child in ann.links():
        touching[parent].append([parent, child])
        touching[child].append([parent, child])
    form = []
    for e in ann.entities:
        if e.box is None:
            raise MissingBox(e.id)
        form.append({
            "id": e.id,
            "text": e.text,
            "box": list(e.box),
            "label": e.category,
            "linking": touching[e.id],
            "words": word_boxes(e.text, e.box, gm),
        })
    return json.dumps({"form": form}, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def load_funsd(data: bytes | str, width: int = 0, height: int = 0) -> DocumentAnnotation:
    """Inverse of :func:`export_funsd` (links are taken from the parent's record)."""
    form = json.loads(data)["form"]
    ents = []
    for rec in form:
        own = tuple((p, c) for p, c in rec.get("linking", []) if p == rec["id"])
        ents.append(Entity(rec["id"], rec["text"], rec["label"], tuple(rec["box"]), own))
    return DocumentAnnotation(width, height, tuple(ents))


def entity_levels(ann: DocumentAnnotation, doc_index: int = 0) -> dict[int, int]:
    """Longest-path depth of each entity from a root (an entity with no incoming link)."""
    ids = [e.id for e in ann.entities]
    indeg = {i: 0 for i in ids}
    out = defaultdict(list)
    for parent, child in ann.links():
        out[parent].append(child)
        indeg[child] += 1
    level = {i: 0 for i in ids}
    queue = deque(i for i in ids if indeg[i] == 0)
    seen = 0
    while queue:
        node = queue.popleft()
        seen += 1
        for child in out[node]:
            level[child] = max(level[child], level[node] + 1)
            indeg[child] -= 1
            if indeg[child] == 0:
                queue.append(child)
    if seen != len(ids):
        raise CyclicLinks(doc_index)
    return level


@dataclass
class HierarchyStats:
    levels: dict[int, float] = field(default_factory=dict)
    avg_entities: float = 0.0
    n_docs: int = 0

    def row(self, max_level: int = 5) -> list[float]:
        """Per-level averages for levels 0..max_level followed by avg entities."""
        return [self.levels.get(k, 0.0) for k in range(max_level + 1)] + [self.avg_entities]

    def to_dict(self) -> dict:
        return {
            "levels": {str(k): v for k, v in sorted(self.levels.items())},
            "avg_entities_per_doc": self.avg_entities,
            "n_docs": self.n_docs,
        }


def hierarchy_stats(corpus: Sequence[DocumentAnnotation]) -> HierarchyStats:
    counts: dict[int, int] = defaultdict(int)
    total = 0
    for index, ann in enumerate(corpus):
        for lvl in entity_levels(ann, index).values():
            counts[lvl] += 1
        total += len(ann.entities)
    n = len(corpus)
    if n == 0:
        return HierarchyStats()
    top = max(counts) if counts else -1
    levels = {k: counts.get(k, 0) / n for k in range(top + 1)}
    return HierarchyStats(levels, total / n, n)


def iter_category_counts(ann: DocumentAnnotation) -> Iterator[tuple[str, int]]:
    for cat in CATEGORIES:
        yield cat, sum(1 for e in ann.entities if e.category == cat)
