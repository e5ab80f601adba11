"""Deterministic glyph-advance model used for all layout arithmetic."""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache


@lru_cache(maxsize=4096)
def is_wide(ch: str) -> bool:
    return unicodedata.east_asian_width(ch) in ("W", "F")


@dataclass(frozen=True)
class GlyphModel:
    """Per-glyph advance = ceil(font_size * ratio), ratio by script class.

    Ratios are kept as exact fractions so widths do not depend on float
    rounding (0.6 * 5 is not 3.0 in binary floating point).
    """

    advance_ratio_latin: float = 0.6
    advance_ratio_cjk: float = 1.0
    font_scale: float = 0.75

    def __post_init__(self):
        for name in ("advance_ratio_latin", "advance_ratio_cjk", "font_scale"):
            v = getattr(self, name)
            if not 0 < v <= 2:
                raise ValueError(f"{name}={v} outside (0, 2]")

    def ratio(self, ch: str) -> Fraction:
        r = self.advance_ratio_cjk if is_wide(ch) else self.advance_ratio_latin
        return Fraction(str(r))

    def font_size(self, box_height: int) -> Fraction:
        return Fraction(str(self.font_scale)) * box_height

    def advance(self, ch: str, size) -> int:
        return math.ceil(Fraction(size) * self.ratio(ch))

    def text_width(self, text: str, size) -> int:
        size = Fraction(size)
        return sum(math.ceil(size * self.ratio(ch)) for ch in text)

    def width_for_box(self, text: str, box_height: int) -> int:
        return self.text_width(text, self.font_size(box_height))
