"""Synthetic document generation from hierarchical structured text (HST)."""

from .annotation import DocumentAnnotation, Entity, export_funsd, extract_entities, hierarchy_stats
from .glyphs import GlyphModel
from .hst import HstError, HstNode, HstTree, NodeKind, parse_hst, validate_hst, write_hst
from .layout_seq import (LayoutDoc, LayoutEntity, ProtocolError, apply_fill, build_training_pairs,
                         mask_layout, parse_fill_map, serialize_layout)

__version__ = "0.1.0"

__all__ = [
    "DocumentAnnotation", "Entity", "GlyphModel", "HstError", "HstNode", "HstTree", "LayoutDoc",
    "LayoutEntity", "NodeKind", "ProtocolError", "apply_fill", "build_training_pairs", "export_funsd",
    "extract_entities", "hierarchy_stats", "mask_layout", "parse_fill_map", "parse_hst",
    "serialize_layout", "validate_hst", "write_hst",
]
