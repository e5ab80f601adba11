"""Overflow repair, styling and SVG output."""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from xml.sax.saxutils import escape, quoteattr

from .annotation import DocumentAnnotation
from .glyphs import GlyphModel
from .layout_seq import Box, LayoutDoc
from .raster import RasterBackendUnavailable, rasterize  # noqa: F401 - public API

LATIN_FONTS = ("DejaVu Sans", "DejaVu Serif", "Liberation Sans", "Liberation Serif", "Courier New")
CJK_FONTS = ("Noto Sans CJK SC", "Noto Serif CJK SC", "SimSun", "SimHei")
TINTS = ("#fbf8f1", "#f4f6fa", "#f7f7f2", "#fdf6ec")
TEXTURES = ("textures/paper_grain.png", "textures/paper_fibre.png")
BASELINE_DROP = Fraction(1, 5)


class MisalignedAnnotation(ValueError):
    pass


def same_row(a: Box, b: Box) -> bool:
    """Vertical overlap larger than half the shorter box."""
    overlap = min(a[3], b[3]) - max(a[1], b[1])
    shorter = min(a[3] - a[1], b[3] - b[1])
    return 2 * overlap > shorter


def repair_overflow(doc: LayoutDoc, gm: GlyphModel | None = None, warnings: list | None = None,
                    clamp: bool = False) -> LayoutDoc:
    """Widen boxes too narrow for their text and push same-row neighbours right.

    Entities are visited in document order. When one widens by ``d``, every
    entity on its row starting at or after its old right edge moves by
    ``d``, and the push cascades to entities on the rows of those that moved.
    """
    gm = gm or GlyphModel()
    boxes = [list(b) for b in doc.boxes]
    if any(b is None for b in doc.boxes):
        raise ValueError("repair needs every box")
    order = sorted(range(len(boxes)), key=lambda j: (boxes[j][0], j))
    for i, ent in enumerate(doc.entities):
        b = boxes[i]
        needed = gm.width_for_box(ent.text, b[3] - b[1])
        d = needed - (b[2] - b[0])
        if d <= 0:
            continue
        old_right = b[2]
        b[2] += d
        pushers = [((b[0], b[1], old_right, b[3]), old_right)]
        order.sort(key=lambda j: (boxes[j][0], j))
        for j in order:
            if j == i:
                continue
            cand = boxes[j]
            for pbox, pright in pushers:
                if cand[0] >= pright and same_row(pbox, cand):
                    pushers.append((tuple(cand), cand[2]))
                    cand[0] += d
                    cand[2] += d
                    break
    if warnings is not None or clamp:
        for i, b in enumerate(boxes):
            if b[2] > doc.width:
                if warnings is not None:
                    warnings.append(f"entity {i} extends to x={b[2]} past canvas width {doc.width}")
                if clamp:
                    b[2] = doc.width
    return doc.with_boxes([tuple(b) for b in boxes])


@dataclass(frozen=True)
class StylePlan:
    seed: int = 0
    font_family: str = LATIN_FONTS[0]
    bold_headers: bool = True
    grid_lines: float = 0.0
    background: str = "white"
    tint: str = TINTS[0]
    texture: str = TEXTURES[0]

    def __post_init__(self):
        if self.background not in ("white", "tint", "texture_ref"):
            raise ValueError(f"unknown background {self.background!r}")
        if not 0.0 <= self.grid_lines <= 1.0:
            raise ValueError("grid_lines is a probability")

    @classmethod
    def sample(cls, seed: int, lang: str = "en") -> StylePlan:
        rng = random.Random(seed)
        fonts = CJK_FONTS if lang in ("zh", "cjk") else LATIN_FONTS
        return cls(
            seed=seed,
            font_family=rng.choice(fonts),
            bold_headers=rng.random() < 0.9,
            grid_lines=rng.choice((0.0, 0.0, 0.5, 1.0)),
            background=rng.choice(("white", "white", "tint", "texture_ref")),
            tint=rng.choice(TINTS),
            texture=rng.choice(TEXTURES),
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def grid_mask(self, n: int) -> list[bool]:
        rng = random.Random(f"grid:{self.seed}")
        return [rng.random() < self.grid_lines for _ in range(n)]


def _num(x) -> str:
    if isinstance(x, int) or (isinstance(x, Fraction) and x.denominator == 1):
        return str(int(x))
    return f"{float(x):.2f}".rstrip("0").rstrip(".")


def render_svg(doc: LayoutDoc, ann: DocumentAnnotation, plan: StylePlan | None = None,
               gm: GlyphModel | None = None) -> bytes:
    """SVG 1.1 bytes: background, grid rectangles, then one <text> per entity."""
    plan = plan or StylePlan()
    gm = gm or GlyphModel()
    if len(ann.entities) != len(doc.entities) or any(
            a.text != d.text for a, d in zip(ann.entities, doc.entities)):
        raise MisalignedAnnotation("annotation entities do not match layout entities")
    w, h = doc.width, doc.height
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" '
        f'version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
    ]
    if plan.background == "texture_ref":
        out.append(f'<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>')
        out.append(f'<image x="0" y="0" width="{w}" height="{h}" preserveAspectRatio="none" '
                   f'xlink:href={quoteattr(plan.texture)}/>')
    else:
        fill = "#ffffff" if plan.background == "white" else plan.tint
        out.append(f'<rect x="0" y="0" width="{w}" height="{h}" fill="{fill}"/>')
    grid = plan.grid_mask(len(doc.entities))
    if any(grid):
        out.append('<g class="grid" fill="none" stroke="#404040" stroke-width="1">')
        for ent, lay, on in zip(ann.entities, doc.entities, grid):
            if on:
                x1, y1, x2, y2 = lay.box
                out.append(f'<rect data-id="{ent.id}" x="{x1}" y="{y1}" width="{x2 - x1}" height="{y2 - y1}"/>')
        out.append("</g>")
    out.append(f'<g class="text" font-family={quoteattr(plan.font_family)} fill="#111111">')
    for ent, lay in zip(ann.entities, doc.entities):
        x1, y1, x2, y2 = lay.box
        size = gm.font_size(y2 - y1)
        baseline = y2 - BASELINE_DROP * size
        bold = ' font-weight="bold"' if plan.bold_headers and ent.category == "header" else ""
        out.append(f'<text data-id="{ent.id}" data-label="{ent.category}" x="{x1}" y="{_num(baseline)}" '
                   f'font-size="{_num(size)}"{bold} xml:space="preserve">{escape(lay.text)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")


__all__ = [
    "GlyphModel", "StylePlan", "MisalignedAnnotation", "RasterBackendUnavailable",
    "repair_overflow", "render_svg", "rasterize", "same_row",
]
