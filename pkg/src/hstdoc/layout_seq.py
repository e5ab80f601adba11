"""Layout wire format, box masking and training-pair emission.

A layout serializes as compact JSON with a fixed key order::

    {"width":850,"height":1100,"entities":[{"text":"Name:","box":[40,40,100,60]}]}

Masking replaces every box by a one-element list holding a ``<FILL_i>``
token (1-based); the model answers with a map from tokens to coordinates.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence

Box = tuple[int, int, int, int]
FillMap = dict[int, Box]

FORM_SOURCES = {"funsd": 4, "xfund": 4}

_FILL_RE = re.compile(r'\["<FILL_(\d+)>"\]')
_INT_RE = re.compile(r"[+-]?\d+")


@dataclass(frozen=True)
class LayoutEntity:
    text: str
    box: Box | None = None


@dataclass(frozen=True)
class LayoutDoc:
    width: int
    height: int
    entities: tuple[LayoutEntity, ...] = ()
    source: str = ""
    doc_id: str = ""

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"canvas must be positive, got {self.width}x{self.height}")
        for e in self.entities:
            if e.box is not None and len(e.box) != 4:
                raise ValueError(f"box for {e.text!r} needs 4 coordinates")

    @property
    def boxes(self) -> list[Box | None]:
        return [e.box for e in self.entities]

    def with_boxes(self, boxes: Sequence[Box]) -> LayoutDoc:
        if len(boxes) != len(self.entities):
            raise ValueError(f"{len(boxes)} boxes for {len(self.entities)} entities")
        ents = tuple(LayoutEntity(e.text, tuple(int(v) for v in b)) for e, b in zip(self.entities, boxes))
        return replace(self, entities=ents)


@dataclass(frozen=True)
class MaskedLayout:
    text: str
    mask_count: int


@dataclass(frozen=True)
class TrainingPair:
    input: str
    target: str
    source: str = ""
    doc_id: str = ""
    seed: int = 0

    def to_json(self) -> str:
        return json.dumps({"input": self.input, "target": self.target, "source": self.source,
                           "doc_id": self.doc_id, "seed": self.seed}, ensure_ascii=False)


class ProtocolError(ValueError):
    """A model answer that violates the fill-map protocol."""

    kind = "ProtocolError"

    def __init__(self, message: str, key: str | int | None = None):
        self.key = key
        super().__init__(f"{self.kind}: {message}")


class InvalidJson(ProtocolError):
    kind = "InvalidJson"


class MissingToken(ProtocolError):
    kind = "MissingToken"


class ExtraToken(ProtocolError):
    kind = "ExtraToken"


class BadCoordinateArity(ProtocolError):
    kind = "BadCoordinateArity"


class NonIntegerCoordinate(ProtocolError):
    kind = "NonIntegerCoordinate"


def fill_token(i: int) -> str:
    return f"<FILL_{i}>"


def _dumps(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def _head(doc: LayoutDoc) -> str:
    return f'{{"width":{int(doc.width)},"height":{int(doc.height)},"entities":['


def serialize_layout(doc: LayoutDoc) -> str:
    parts = []
    for e in doc.entities:
        if e.box is None:
            raise ValueError(f"entity {e.text!r} has no box")
        coords = ",".join(str(int(v)) for v in e.box)
        parts.append(f'{{"text":{_dumps(e.text)},"box":[{coords}]}}')
    return _head(doc) + ",".join(parts) + "]}"


def mask_layout(doc: LayoutDoc) -> MaskedLayout:
    present = {e.box is not None for e in doc.entities}
    if len(present) > 1:
        raise ValueError("boxes must be all present or all absent")
    parts = [f'{{"text":{_dumps(e.text)},"box":["{fill_token(i)}"]}}'
             for i, e in enumerate(doc.entities, 1)]
    return MaskedLayout(_head(doc) + ",".join(parts) + "]}", len(doc.entities))


def parse_layout(text: str, source: str = "", doc_id: str = "") -> LayoutDoc:
    """Read a serialized (unmasked) layout back into a :class:`LayoutDoc`."""
    obj = json.loads(text)
    return layout_from_obj(obj, source, doc_id)


def layout_from_obj(obj: Mapping, source: str = "", doc_id: str = "") -> LayoutDoc:
    ents = tuple(LayoutEntity(str(e["text"]), tuple(int(v) for v in e["box"]) if e.get("box") is not None else None)
                 for e in obj.get("entities", []))
    return LayoutDoc(int(obj["width"]), int(obj["height"]), ents,
                     str(obj.get("source", source)), str(obj.get("doc_id", doc_id)))


def _reject_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ExtraToken(f"duplicate key {k!r}", k)
        out[k] = v
    return out


def _coords(key: str, value) -> Box:
    if isinstance(value, str):
        items = [s.strip() for s in value.strip().split(",")]
        if len(items) != 4:
            raise BadCoordinateArity(f"{key} has {len(items)} coordinates", key)
        if not all(_INT_RE.fullmatch(s) for s in items):
            raise NonIntegerCoordinate(f"{key} has non-integer coordinate in {value!r}", key)
        return tuple(int(s) for s in items)
    if isinstance(value, list):
        if len(value) != 4:
            raise BadCoordinateArity(f"{key} has {len(value)} coordinates", key)
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise NonIntegerCoordinate(f"{key} has non-integer coordinate in {value!r}", key)
        return tuple(value)
    raise BadCoordinateArity(f"{key} is neither a string nor a list", key)


def parse_fill_map(output: str, expected_n: int) -> FillMap:
    """Validate a model answer against ``expected_n`` fill tokens."""
    try:
        obj = json.loads(output, object_pairs_hook=_reject_duplicates)
    except ExtraToken:
        raise
    except (json.JSONDecodeError, TypeError) as exc:
        raise InvalidJson(str(exc)) from None
    if not isinstance(obj, dict):
        raise InvalidJson(f"expected an object, got {type(obj).__name__}")
    for i in range(1, expected_n + 1):
        if fill_token(i) not in obj:
            raise MissingToken(f"{fill_token(i)} absent", i)
    wanted = {fill_token(i) for i in range(1, expected_n + 1)}
    for key in obj:
        if key not in wanted:
            raise ExtraToken(f"unexpected key {key!r}", key)
    return {i: _coords(fill_token(i), obj[fill_token(i)]) for i in range(1, expected_n + 1)}


def format_fill_map(fills: Mapping[int, Box]) -> str:
    """Canonical target text: string values joined with ", "."""
    items = [f'{_dumps(fill_token(i))}:{_dumps(", ".join(str(int(v)) for v in fills[i]))}'
             for i in sorted(fills)]
    return "{" + ",".join(items) + "}"


def apply_fill(masked: MaskedLayout | str, fills: Mapping[int, Box]) -> str:
    text = masked.text if isinstance(masked, MaskedLayout) else masked

    def sub(m):
        i = int(m.group(1))
        if i not in fills:
            raise MissingToken(f"{fill_token(i)} absent", i)
        return "[" + ",".join(str(int(v)) for v in fills[i]) + "]"

    return _FILL_RE.sub(sub, text)


def permute_entities(doc: LayoutDoc, seed: int) -> LayoutDoc:
    ents = list(doc.entities)
    random.Random(seed).shuffle(ents)
    return replace(doc, entities=tuple(ents))


def derive_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def token_estimate(text: str) -> int:
    return -(-len(text) // 4)


@dataclass
class PairStats:
    emitted: int = 0
    dropped: int = 0
    per_source: dict[str, int] = field(default_factory=dict)


def build_training_pairs(corpus: Iterable[LayoutDoc], seed: int,
                         upsample_weights: Mapping[str, int] | None = None,
                         max_tokens: int = 8000,
                         stats: PairStats | None = None) -> Iterator[TrainingPair]:
    """Yield masked-input / fill-map-target pairs.

    Each document is repeated ``upsample_weights[source]`` times (form
    sources default to 4, everything else to 1) and every repeat gets its
    own entity permutation. Pairs whose input exceeds ``max_tokens``
    (estimated as characters / 4) are dropped and counted in ``stats``.
    """
    weights = dict(FORM_SOURCES)
    if upsample_weights:
        weights.update(upsample_weights)
    stats = stats if stats is not None else PairStats()
    for index, doc in enumerate(corpus):
        doc_id = doc.doc_id or str(index)
        for rep in range(int(weights.get(doc.source, 1))):
            sub = derive_seed(seed, doc.source, doc_id, index, rep)
            shuffled = permute_entities(doc, sub)
            masked = mask_layout(shuffled)
            if token_estimate(masked.text) > max_tokens:
                stats.dropped += 1
                continue
            target = format_fill_map({i: e.box for i, e in enumerate(shuffled.entities, 1)})
            stats.emitted += 1
            stats.per_source[doc.source] = stats.per_source.get(doc.source, 0) + 1
            yield TrainingPair(masked.text, target, doc.source, doc_id, sub)


def read_layout_jsonl(lines: Iterable[str], default_source: str = "") -> Iterator[LayoutDoc]:
    """OCR ingestion: one ``{width, height, entities:[{text, box}]}`` object per line."""
    for n, line in enumerate(lines):
        if line.strip():
            yield layout_from_obj(json.loads(line), default_source, str(n))


def layout_to_obj(doc: LayoutDoc) -> dict:
    return {"width": doc.width, "height": doc.height,
            "entities": [{"text": e.text, "box": list(e.box) if e.box is not None else None}
                         for e in doc.entities],
            "source": doc.source, "doc_id": doc.doc_id}
