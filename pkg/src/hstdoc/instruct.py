"""Instruction samples for hierarchical structure parsing and key-value extraction.

Four tasks:
  hsp       image -> full HST
  hsp_loc   image + region (0-999 coordinates) -> HST of what lies inside
  vie       image + key -> value text
  vie_hsp   image + key -> HST of the key's section, then "###Answer: value"
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .annotation import DocumentAnnotation, entity_slots
from .hst import HstNode, HstTree, NodeKind, write_body, write_hst, write_nodes
from .layout_seq import derive_seed

TASKS = ("hsp", "hsp_loc", "vie", "vie_hsp")
ANSWER_MARK = "###Answer:"
DEFAULT_COUNTS = {"hsp": 1, "hsp_loc": 1, "vie": 3, "vie_hsp": 1}


class NoValueChild(ValueError):
    pass


@dataclass(frozen=True)
class InstructionDoc:
    tree: HstTree
    annotation: DocumentAnnotation
    image: str = ""
    lang: str = ""

    @property
    def language(self) -> str:
        if self.lang:
            return self.lang
        return "zh" if self.tree.source_lang == "cjk" else "en"


@dataclass(frozen=True)
class InstructionSample:
    task: str
    image: str
    prompt: str
    target: str
    region: tuple[int, int, int, int] | None = None
    # entity id of the queried key (vie, vie_hsp)
    key_id: int | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "hsp_loc":
            if self.region is None or not all(0 <= v <= 999 for v in self.region):
                raise ValueError(f"hsp_loc needs a region inside [0, 999], got {self.region}")

    def to_dict(self) -> dict:
        d = {"task": self.task, "image": self.image, "prompt": self.prompt, "target": self.target}
        if self.region is not None:
            d["region"] = list(self.region)
        if self.key_id is not None:
            d["key_id"] = self.key_id
        return d


@lru_cache(maxsize=1)
def load_templates() -> dict:
    res = resources.files("hstdoc") / "assets" / "templates" / "questions.json"
    return json.loads(res.read_text(encoding="utf-8"))


def benchmark_question(benchmark: str, key: str) -> str:
    return load_templates()["benchmarks"][benchmark].format(key=key)


def _tpl(lang: str) -> dict:
    t = load_templates()
    return t.get(lang) or t["en"]


def strip_key(text: str) -> str:
    return text.rstrip().rstrip(":：").rstrip()


def normalize_box(box, width: int, height: int) -> tuple[int, int, int, int]:
    x1, y1, x2, y2 = box
    nx = lambda v: min(999, max(0, (v * 1000) // width))  # noqa: E731
    ny = lambda v: min(999, max(0, (v * 1000) // height))  # noqa: E731
    return nx(x1), ny(y1), nx(x2), ny(y2)


def format_region(region) -> str:
    return "[" + ", ".join(str(v) for v in region) + "]"


def value_children(ann: DocumentAnnotation, key_id: int) -> list[int]:
    return sorted(c for c in ann.children(key_id) if ann.by_id(c).category == "value")


def answer_text(ann: DocumentAnnotation, key_id: int) -> str:
    vals = value_children(ann, key_id)
    if not vals:
        raise NoValueChild(f"entity {key_id} has no value child")
    return "\n".join(ann.by_id(v).text for v in vals)


def make_hsp(doc: InstructionDoc, seed: int = 0) -> InstructionSample:
    prompts = _tpl(doc.language)["hsp"]
    prompt = prompts[random.Random(seed).randrange(len(prompts))]
    return InstructionSample("hsp", doc.image, prompt, write_hst(doc.tree))


def _prune_node(node: HstNode, path, depth, ids, keep) -> list[HstNode]:
    if node.kind is NodeKind.KEY_VALUE:
        has_key = ids[(path, "key")] in keep
        has_val = ids[(path, "value")] in keep
        if has_key and has_val:
            kind, text, value = NodeKind.KEY_VALUE, node.text, node.value
        elif has_key:
            kind, text, value = NodeKind.KEY, node.text, ""
        elif has_val:
            kind, text, value = NodeKind.VALUE, node.value, ""
        else:
            kind = None
    else:
        part = {NodeKind.KEY: "key", NodeKind.VALUE: "value"}.get(node.kind, "text")
        kind = node.kind if ids[(path, part)] in keep else None
        text, value = node.text, ""
    kids = []
    for i, child in enumerate(node.children):
        kids += _prune_node(child, path + (i,), depth + 1 if kind else depth, ids, keep)
    if kind is None:
        return kids
    if kids and kind in (NodeKind.VALUE, NodeKind.FREE_TEXT):
        kind = NodeKind.KEY
    if not kids and kind is NodeKind.KEY and not text.endswith((":", "：")):
        kind = NodeKind.VALUE
    if kind in (NodeKind.VALUE, NodeKind.FREE_TEXT):
        kind = NodeKind.FREE_TEXT if depth == 0 else NodeKind.VALUE
    return [HstNode(kind, text, tuple(kids), depth, value)]


def pruned_hst(tree: HstTree, keep: set[int]) -> str:
    """HST text of the entities in ``keep``; dropped nodes hand their children up.

    The title line is emitted only when the title entity is kept.
    """
    ids = {(s.path, s.part): i for i, s in enumerate(entity_slots(tree))}
    paras = []
    for p, para in enumerate(tree.paragraphs):
        head = bool(para.text) and ids[((p,), "header")] in keep
        kids = []
        for i, child in enumerate(para.children):
            kids += _prune_node(child, (p, i), child.depth if head else 0, ids, keep)
        if head or kids:
            paras.append(HstNode(NodeKind.HEADER, para.text if head else "", tuple(kids), 0,
                                 level=para.level if head else 0))
    body = write_body(paras)
    return f"{tree.title}\n{body}" if 0 in keep else body


def _descendants(ann: DocumentAnnotation, root: int) -> set[int]:
    seen = {root}
    stack = [root]
    while stack:
        for c in ann.children(stack.pop()):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return seen


def contained(inner, outer) -> bool:
    return outer[0] <= inner[0] and outer[1] <= inner[1] and inner[2] <= outer[2] and inner[3] <= outer[3]


def make_hsp_loc(doc: InstructionDoc, seed: int = 0, region=None, max_tries: int = 8) -> InstructionSample | None:
    """Localized parsing sample, or ``None`` when no usable region was found.

    Without an explicit pixel ``region`` the hull of a random entity and its
    link descendants is used. Entities count as inside only when their
    normalized box lies fully within the normalized region.
    """
    ann = doc.annotation
    if not ann.entities:
        return None
    w, h = ann.width, ann.height
    norm = {e.id: normalize_box(e.box, w, h) for e in ann.entities}
    rng = random.Random(seed)
    tries = 1 if region is not None else max_tries
    for _ in range(tries):
        if region is None:
            root = rng.choice(ann.entities).id
            group = [ann.by_id(i).box for i in _descendants(ann, root)]
            hull = (min(b[0] for b in group), min(b[1] for b in group),
                    max(b[2] for b in group), max(b[3] for b in group))
        else:
            hull = region
        nreg = normalize_box(hull, w, h)
        if nreg[0] >= nreg[2] or nreg[1] >= nreg[3]:
            continue
        keep = {i for i, nb in norm.items() if contained(nb, nreg)}
        if not keep:
            continue
        prompts = _tpl(doc.language)["hsp_loc"]
        prompt = prompts[rng.randrange(len(prompts))].format(region=format_region(nreg))
        return InstructionSample("hsp_loc", doc.image, prompt, pruned_hst(doc.tree, keep), nreg)
    return None


def make_vie(doc: InstructionDoc, key_id: int) -> InstructionSample:
    key = doc.annotation.by_id(key_id)
    prompt = _tpl(doc.language)["vie"].format(key=strip_key(key.text))
    return InstructionSample("vie", doc.image, prompt, answer_text(doc.annotation, key_id), key_id=key_id)


def section_hst(tree: HstTree, key_id: int) -> str:
    """Header line plus the whole top-level subtree that contains ``key_id``."""
    slot = entity_slots(tree)[key_id]
    if len(slot.path) < 2:
        raise ValueError(f"entity {key_id} is not inside a paragraph body")
    para = tree.paragraphs[slot.path[0]]
    lines = [f"<h{para.level}> {para.text}"] if para.text else []
    write_nodes([para.children[slot.path[1]]], lines)
    return "\n".join(lines)


def make_vie_hsp(doc: InstructionDoc, key_id: int) -> InstructionSample:
    answer = answer_text(doc.annotation, key_id)
    context = section_hst(doc.tree, key_id)
    if ANSWER_MARK in context or ANSWER_MARK in answer:
        raise ValueError(f"document text already contains {ANSWER_MARK!r}")
    key = doc.annotation.by_id(key_id)
    prompt = _tpl(doc.language)["vie_hsp"].format(key=strip_key(key.text))
    return InstructionSample("vie_hsp", doc.image, prompt, f"{context}\n{ANSWER_MARK} {answer}", key_id=key_id)


def answer_of(sample: InstructionSample) -> str:
    if sample.task == "vie":
        return sample.target
    return sample.target.split(ANSWER_MARK + " ", 1)[1]


def queryable_keys(ann: DocumentAnnotation) -> list[int]:
    return [e.id for e in ann.entities if e.category == "key" and value_children(ann, e.id)]


def build_instructions(docs: Iterable[tuple[str, InstructionDoc]], seed: int,
                       counts: Mapping[str, int] | None = None) -> tuple[list[InstructionSample], dict]:
    """Emit samples for every (doc_id, doc); returns the samples and a count manifest.

    ``counts`` caps how many samples of each task one document contributes.
    """
    counts = {**DEFAULT_COUNTS, **(counts or {})}
    samples: list[InstructionSample] = []
    made = {t: 0 for t in TASKS}
    skipped = {t: 0 for t in TASKS}
    n_docs = 0
    for doc_id, doc in docs:
        n_docs += 1
        rng = random.Random(derive_seed(seed, "instr", doc_id))
        if counts["hsp"] > 0:
            samples.append(make_hsp(doc, rng.randrange(1 << 30)))
            made["hsp"] += 1
        for _ in range(counts["hsp_loc"]):
            s = make_hsp_loc(doc, rng.randrange(1 << 30))
            if s is None:
                skipped["hsp_loc"] += 1
                continue
            samples.append(s)
            made["hsp_loc"] += 1
        keys = queryable_keys(doc.annotation)
        for task, maker in (("vie", make_vie), ("vie_hsp", make_vie_hsp)):
            chosen = sorted(rng.sample(keys, min(counts[task], len(keys))))
            for key_id in chosen:
                try:
                    samples.append(maker(doc, key_id))
                except ValueError:
                    skipped[task] += 1
                    continue
                made[task] += 1
    manifest = {"n_docs": n_docs, "counts": made, "skipped": skipped, "total": sum(made.values())}
    return samples, manifest


def region_ok(region: Sequence[int]) -> bool:
    return all(0 <= v <= 999 for v in region) and region[0] < region[2] and region[1] < region[3]

