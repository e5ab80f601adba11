"""Rasterize the SVG subset produced by :func:`hstdoc.render.render_svg`.

Only what the renderer emits is understood: a background ``rect`` or
``image``, stroked grid ``rect`` elements and left-anchored ``text``.
"""

from __future__ import annotations

import io
import math
import xml.etree.ElementTree as ET
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .glyphs import is_wide

SVG_NS = "{http://www.w3.org/2000/svg}"
XLINK_HREF = "{http://www.w3.org/1999/xlink}href"

_FONT_FILES = {
    False: ("DejaVuSans.ttf", "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf"),
    True: ("DejaVuSans-Bold.ttf", "/usr/share/fonts/truetype/dejavu/DejaVuSans-Bold.ttf"),
}
# tried first for text with wide glyphs; DejaVu has no CJK coverage
_CJK_FONT_FILES = (
    "NotoSansCJK-Regular.ttc",
    "/usr/share/fonts/opentype/noto/NotoSansCJK-Regular.ttc",
    "/usr/share/fonts/truetype/wqy/wqy-microhei.ttc",
    "/usr/share/fonts/truetype/droid/DroidSansFallbackFull.ttf",
)


class RasterBackendUnavailable(RuntimeError):
    pass


def _pil():
    try:
        from PIL import Image, ImageDraw, ImageFont
    except ImportError as exc:
        raise RasterBackendUnavailable("rasterize needs Pillow (pip install 'artifact[raster]')") from exc
    return Image, ImageDraw, ImageFont


def _font(ImageFont, size: float, bold: bool, wide: bool = False):
    for candidate in (_CJK_FONT_FILES if wide else ()) + _FONT_FILES[bold]:
        try:
            return ImageFont.truetype(candidate, max(1, round(size)))
        except OSError:
            continue
    return ImageFont.load_default(size=max(1, round(size)))


def _texture(href: str, base_dir):
    if base_dir is not None and (Path(base_dir) / href).exists():
        return Path(base_dir) / href
    res = resources.files("hstdoc") / "assets" / href
    return res if res.is_file() else None


def pixel_size(length: int, dpi: int) -> int:
    return math.ceil(Fraction(length) * Fraction(dpi, 96))


def rasterize(svg: bytes, dpi: int = 96, base_dir=None) -> bytes:
    """PNG bytes at ``dpi`` (96 dpi = one pixel per SVG unit)."""
    Image, ImageDraw, ImageFont = _pil()
    root = ET.fromstring(svg)
    w, h = int(root.get("width")), int(root.get("height"))
    scale = Fraction(dpi, 96)
    size = (pixel_size(w, dpi), pixel_size(h, dpi))
    img = Image.new("RGB", size, "white")
    draw = ImageDraw.Draw(img)

    def px(v) -> float:
        return float(Fraction(v) * scale)

    for el in root.iter():
        tag = el.tag.replace(SVG_NS, "")
        if tag == "rect":
            x, y = px(el.get("x")), px(el.get("y"))
            x2, y2 = x + px(el.get("width")), y + px(el.get("height"))
            fill = el.get("fill")
            if fill and fill != "none":
                draw.rectangle((x, y, x2 - 1, y2 - 1), fill=fill)
            else:
                draw.rectangle((x, y, x2, y2), outline="#404040", width=max(1, round(px(1))))
        elif tag == "image":
            path = _texture(el.get(XLINK_HREF, ""), base_dir)
            if path is None:
                continue
            with path.open("rb") as fh:
                tile = Image.open(fh).convert("RGB")
                tile.load()
            img.paste(tile.resize(size, Image.BILINEAR), (0, 0))
        elif tag == "text":
            wide = any(is_wide(ch) for ch in el.text or "")
            font = _font(ImageFont, px(el.get("font-size")), el.get("font-weight") == "bold", wide)
            draw.text((px(el.get("x")), px(el.get("y"))), el.text or "", fill="#111111",
                      font=font, anchor="ls")
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return buf.getvalue()
