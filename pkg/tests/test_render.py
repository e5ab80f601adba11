import io
import math
import re
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hstdoc.annotation import extract_entities
from hstdoc.glyphs import GlyphModel
from hstdoc.hst import parse_hst
from hstdoc.layout_engine import flow_boxes
from hstdoc.layout_seq import LayoutDoc, LayoutEntity
from hstdoc.render import (MisalignedAnnotation, StylePlan, rasterize, render_svg, repair_overflow,
                           same_row)

GM = GlyphModel()
SVG = "{http://www.w3.org/2000/svg}"


def doc(*ents, w=850, h=1100):
    return LayoutDoc(w, h, tuple(LayoutEntity(t, b) for t, b in ents))


def laid_out(text):
    tree = parse_hst(text)
    boxes = flow_boxes(tree)
    ann = extract_entities(tree).with_boxes(boxes)
    return doc(*[(e.text, e.box) for e in ann.entities]), ann


INFO = "Title\n<content>\n<h1> Info\nName: John\n- note\n</content>"


@pytest.mark.parametrize("text,size,width", [
    ("Title", 21, 65),   # 0.6 * 21 = 12.6 -> 13 per glyph
    ("Name:", 15, 45),   # 9 per glyph
    ("表单", 15, 30),
    ("a表", 10, 16),
    ("", 10, 0),
])
def test_text_width(text, size, width):
    assert GM.text_width(text, size) == width


def test_font_size_and_exactness():
    assert GM.font_size(28) == 21
    # 0.6 * 5 must not round up to 4 through float error
    assert GM.text_width("ab", 5) == 6


@pytest.mark.parametrize("kwargs", [dict(advance_ratio_latin=0), dict(font_scale=2.5), dict(advance_ratio_cjk=-1)])
def test_glyph_model_bounds(kwargs):
    with pytest.raises(ValueError):
        GlyphModel(**kwargs)


def test_repair_fits_unchanged():
    d = doc(("ab", (0, 0, 100, 20)), ("cd", (110, 0, 200, 20)))
    assert repair_overflow(d) == d


def test_repair_worked_example():
    # h 26 -> font 19.5 -> ceil(11.7) = 12 per glyph; ten glyphs need 120 against a 100-wide box
    key = "Reference:"
    assert GM.width_for_box(key, 26) == 120
    d = doc((key, (0, 0, 100, 26)), ("x", (110, 0, 200, 26)), ("y", (110, 40, 200, 66)))
    out = repair_overflow(d)
    assert out.boxes == [(0, 0, 120, 26), (130, 0, 220, 26), (110, 40, 200, 66)]


def test_repair_cascades_along_row():
    d = doc(("Reference:", (0, 0, 100, 26)), ("Reference:", (110, 0, 210, 26)), ("x", (215, 0, 300, 26)))
    assert repair_overflow(d).boxes == [(0, 0, 120, 26), (130, 0, 250, 26), (255, 0, 340, 26)]


def test_repair_leaves_left_neighbour():
    d = doc(("x", (0, 0, 50, 26)), ("Reference:", (60, 0, 100, 26)))
    assert repair_overflow(d).boxes[0] == (0, 0, 50, 26)


def test_repair_warns_and_clamps_past_canvas():
    d = doc(("Reference:", (800, 0, 840, 26)), w=850)
    warnings = []
    assert repair_overflow(d, warnings=warnings).boxes[0] == (800, 0, 920, 26)
    assert warnings and "920" in warnings[0]
    assert repair_overflow(d, clamp=True).boxes[0] == (800, 0, 850, 26)


@pytest.mark.parametrize("a,b,expected", [
    ((0, 0, 1, 20), (0, 10, 1, 30), False),   # exactly half: not more than half
    ((0, 0, 1, 20), (0, 9, 1, 30), True),
    ((0, 0, 1, 20), (0, 20, 1, 40), False),
    ((0, 0, 1, 40), (0, 10, 1, 20), True),    # shorter box fully inside
])
def test_same_row(a, b, expected):
    assert same_row(a, b) is expected and same_row(b, a) is expected


@st.composite
def crowded_rows(draw):
    """Rows of non-overlapping boxes, many deliberately too narrow for their text."""
    ents = []
    y = 0
    for _ in range(draw(st.integers(1, 5))):
        h = draw(st.integers(12, 40))
        x = draw(st.integers(0, 30))
        for _ in range(draw(st.integers(1, 5))):
            text = draw(st.text(alphabet="abcXYZ 表单", min_size=1, max_size=12))
            w = draw(st.integers(1, 120))
            jitter = draw(st.integers(0, h // 4))
            ents.append(LayoutEntity(text, (x, y + jitter, x + w, y + jitter + h)))
            x += w + draw(st.integers(0, 15))
        y += h + h // 4 + draw(st.integers(1, 20))
    return LayoutDoc(10_000, 10_000, tuple(ents))


@settings(max_examples=200, deadline=None)
@given(crowded_rows())
def test_repair_properties(d):
    before = d.boxes
    after = repair_overflow(d).boxes
    for e, b in zip(d.entities, after):
        assert GM.width_for_box(e.text, b[3] - b[1]) <= b[2] - b[0]
    for b0, b1 in zip(before, after):
        assert (b0[1], b0[3]) == (b1[1], b1[3])
        assert b1[0] >= b0[0]
    n = len(before)
    for i in range(n):
        for j in range(n):
            if i != j and same_row(before[i], before[j]) and before[i][2] <= before[j][0]:
                assert after[i][2] <= after[j][0]


def test_svg_structure_and_baseline():
    d, ann = laid_out(INFO)
    svg = render_svg(d, ann, StylePlan(grid_lines=1.0), GM)
    root = ET.fromstring(svg)
    texts = root.findall(f".//{SVG}text")
    assert [t.text for t in texts] == [e.text for e in ann.entities]
    for t, e in zip(texts, ann.entities):
        size = 0.75 * (e.box[3] - e.box[1])
        assert float(t.get("x")) == e.box[0]
        assert math.isclose(float(t.get("y")), e.box[3] - 0.2 * size)
        assert (t.get("font-weight") == "bold") == (e.category == "header")
    assert len(root.findall(f".//{SVG}g[@class='grid']/{SVG}rect")) == len(ann.entities)
    # background is the first drawn element
    assert list(root)[0].tag == f"{SVG}rect" and list(root)[0].get("width") == "850"


def test_svg_no_bold_no_grid():
    d, ann = laid_out(INFO)
    svg = render_svg(d, ann, StylePlan(bold_headers=False), GM)
    assert b"bold" not in svg and b'class="grid"' not in svg


def test_svg_deterministic_and_style_keeps_boxes():
    d, ann = laid_out(INFO)
    for seed in range(20):
        plan = StylePlan.sample(seed)
        assert StylePlan.sample(seed) == plan
        svg = render_svg(d, ann, plan, GM)
        assert svg == render_svg(d, ann, plan, GM)
        xs = [int(x) for x in re.findall(rb'<text data-id="\d+" data-label="\w+" x="(\d+)"', svg)]
        assert xs == [b[0] for b in d.boxes]


def test_svg_texture_reference():
    d, ann = laid_out(INFO)
    svg = render_svg(d, ann, StylePlan(background="texture_ref"), GM)
    assert b'xlink:href="textures/paper_grain.png"' in svg


def test_svg_escapes_text():
    d, ann = laid_out("A & <B>\n<content>\n</content>")
    root = ET.fromstring(render_svg(d, ann))
    assert root.find(f".//{SVG}text").text == "A & <B>"


def test_misaligned_annotation():
    d, ann = laid_out(INFO)
    with pytest.raises(MisalignedAnnotation):
        render_svg(doc(("x", (0, 0, 1, 1))), ann)


@pytest.mark.parametrize("kwargs", [dict(background="blue"), dict(grid_lines=1.5)])
def test_style_plan_invariants(kwargs):
    with pytest.raises(ValueError):
        StylePlan(**kwargs)


@pytest.mark.parametrize("dpi,size", [(96, (850, 1100)), (192, (1700, 2200)), (72, (638, 825))])
def test_rasterize_size(dpi, size):
    pytest.importorskip("PIL")
    from PIL import Image

    d, ann = laid_out(INFO)
    png = rasterize(render_svg(d, ann, StylePlan(background="texture_ref", grid_lines=1.0), GM), dpi)
    img = Image.open(io.BytesIO(png))
    assert img.format == "PNG" and img.size == size


def test_rasterize_draws_text():
    pytest.importorskip("PIL")
    from PIL import Image

    d, ann = laid_out(INFO)
    img = Image.open(io.BytesIO(rasterize(render_svg(d, ann, StylePlan(), GM)))).convert("L")
    assert img.point(lambda p: 255 if p < 200 else 0).getbbox() is not None
    assert rasterize(render_svg(d, ann, StylePlan(), GM)) == rasterize(render_svg(d, ann, StylePlan(), GM))
