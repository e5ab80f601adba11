"""Hierarchical structure text (HST).

An HST document is a title line followed by a ``<content>`` block::

    Employee Record
    <content>
    <h1> Personal Information
    Name: John
    Address:
    - Street: 12 Main St
    - City: Springfield
    </content>

``<hN>`` lines open paragraphs, ``key: value`` lines carry inline pairs and
leading hyphens nest lines under the nearest shallower line.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple


class NodeKind(str, Enum):
    HEADER = "header"
    KEY = "key"
    VALUE = "value"
    KEY_VALUE = "key_value"
    FREE_TEXT = "free_text"


@dataclass(frozen=True)
class HstNode:
    kind: NodeKind
    text: str
    children: tuple[HstNode, ...] = ()
    depth: int = 0
    # inline value of a key_value node
    value: str = ""
    # 1..6 for <hN> paragraphs, 0 for a headerless paragraph
    level: int = 0

    @property
    def key_text(self) -> str:
        return self.text

    @property
    def value_text(self) -> str:
        return self.value


@dataclass(frozen=True)
class HstTree:
    title: str
    paragraphs: tuple[HstNode, ...] = ()

    @property
    def title_node(self) -> HstNode:
        return HstNode(NodeKind.HEADER, self.title, depth=0, level=0)

    @property
    def source_lang(self) -> str:
        return detect_lang(_all_text(self))


class HstError(ValueError):
    kind = "HstError"

    def __init__(self, line_no: int, message: str = ""):
        self.line_no = line_no
        super().__init__(f"{self.kind} at line {line_no}" + (f": {message}" if message else ""))


class MissingContentTag(HstError):
    kind = "MissingContentTag"


class UnbalancedContentTag(HstError):
    kind = "UnbalancedContentTag"


class DepthJump(HstError):
    kind = "DepthJump"


class EmptyHeader(HstError):
    kind = "EmptyHeader"


class MissingTitle(HstError):
    kind = "MissingTitle"


class Diagnostic(NamedTuple):
    line_no: int
    kind: str
    message: str


_HEADER_RE = re.compile(r"<h([1-6])>(.*?)(?:</h\1>)?$")
_HYPHENS_RE = re.compile(r"(?:- ?)+")
_KEY_COLONS = (":", "：")


def detect_lang(text: str) -> str:
    cjk = latin = False
    for ch in text:
        if unicodedata.east_asian_width(ch) in ("W", "F"):
            cjk = True
        elif ch.isalpha():
            latin = True
    if cjk and latin:
        return "mixed"
    return "cjk" if cjk else "latin"


def _all_text(tree: HstTree) -> str:
    parts = [tree.title]
    stack = list(tree.paragraphs)
    while stack:
        node = stack.pop()
        parts.append(node.text)
        parts.append(node.value)
        stack.extend(node.children)
    return "".join(parts)


def split_key_value(text: str) -> tuple[str, str] | None:
    """Split ``text`` into (key, value) at the first ``": "`` or full-width colon.

    Returns ``(key, "")`` for a bare trailing colon and ``None`` when the
    line is not a key at all. The key keeps its colon.
    """
    cuts = []
    at = text.find(": ")
    if at >= 0:
        cuts.append((at, at + 1, at + 2))
    at = text.find("：")
    if at >= 0:
        cuts.append((at, at + 1, at + 1))
    if cuts:
        _, key_end, value_start = min(cuts)
        value = text[value_start:].strip()
        if value:
            return text[:key_end], value
    if text.endswith(_KEY_COLONS):
        return text, ""
    return None


class _Line:
    __slots__ = ("line_no", "depth", "text", "children")

    def __init__(self, line_no, depth, text):
        self.line_no = line_no
        self.depth = depth
        self.text = text
        self.children = []


class _Para:
    __slots__ = ("level", "text", "children")

    def __init__(self, level, text):
        self.level = level
        self.text = text
        self.children = []


def _locate_content(lines, fail):
    opens = [i for i, ln in enumerate(lines) if ln.strip() == "<content>"]
    closes = [i for i, ln in enumerate(lines) if ln.strip() == "</content>"]
    if not opens:
        fail(MissingContentTag(closes[0] + 1 if closes else 1, "no <content> tag"))
        return None
    start = opens[0]
    early = [i for i in closes if i < start]
    if early:
        fail(UnbalancedContentTag(early[0] + 1, "</content> before <content>"))
        return None
    after = [i for i in closes if i > start]
    if not after:
        fail(UnbalancedContentTag(start + 1, "<content> is never closed"))
        return None
    end = after[0]
    nested = [i for i in opens if start < i < end]
    if nested:
        fail(UnbalancedContentTag(nested[0] + 1, "nested <content>"))
        return None
    return start, end


def _parse(text: str, errors: list | None) -> HstTree | None:
    def fail(err):
        if errors is None:
            raise err
        errors.append(err)

    lines = text.splitlines()
    span = _locate_content(lines, fail)
    if span is None:
        return None
    start, end = span
    title = next((ln.strip() for ln in lines[:start] if ln.strip()), None)
    if title is None:
        fail(MissingTitle(start + 1, "no title line before <content>"))
        return None

    paras: list[_Para] = []
    # stack[d] is the most recent line at depth d in the current paragraph
    stack: list = []
    for idx in range(start + 1, end):
        line_no = idx + 1
        raw = lines[idx].strip()
        if not raw:
            continue
        m = _HEADER_RE.match(raw)
        if m:
            head = m.group(2).strip()
            if not head:
                fail(EmptyHeader(line_no, "header tag without text"))
                continue
            para = _Para(int(m.group(1)), head)
            paras.append(para)
            stack = [para]
            continue
        hm = _HYPHENS_RE.match(raw)
        depth = hm.group(0).count("-") if hm else 0
        body = raw[hm.end():].strip() if hm else raw
        if not body:
            continue
        if not paras:
            paras.append(_Para(0, ""))
            stack = []
        if depth > len(stack):
            fail(DepthJump(line_no, f"depth {depth} follows depth {len(stack) - 1}"))
            depth = len(stack)
        node = _Line(line_no, depth, body)
        parent = paras[-1] if depth == 0 else stack[depth - 1]
        parent.children.append(node)
        del stack[depth:]
        stack.append(node)

    return HstTree(title, tuple(_freeze_para(p) for p in paras))


def _freeze_para(para: _Para) -> HstNode:
    kids = tuple(_freeze_line(c) for c in para.children)
    return HstNode(NodeKind.HEADER, para.text, kids, depth=0, level=para.level)


def _freeze_line(line: _Line) -> HstNode:
    kids = tuple(_freeze_line(c) for c in line.children)
    split = split_key_value(line.text)
    if split is not None:
        key, value = split
        if value:
            return HstNode(NodeKind.KEY_VALUE, key, kids, line.depth, value=value)
        return HstNode(NodeKind.KEY, key, kids, line.depth)
    if kids:
        return HstNode(NodeKind.KEY, line.text, kids, line.depth)
    kind = NodeKind.FREE_TEXT if line.depth == 0 else NodeKind.VALUE
    return HstNode(kind, line.text, (), line.depth)


def parse_hst(text: str) -> HstTree:
    """Parse HST text; raises the first :class:`HstError` encountered."""
    return _parse(text, None)


def validate_hst(text: str) -> list[Diagnostic]:
    errors: list[HstError] = []
    _parse(text, errors)
    return [Diagnostic(e.line_no, e.kind, str(e)) for e in errors]


def node_line(node: HstNode) -> str:
    prefix = "- " * node.depth
    if node.kind is NodeKind.KEY_VALUE:
        sep = "" if node.text.endswith("：") else " "
        return f"{prefix}{node.text}{sep}{node.value}"
    return prefix + node.text


def write_nodes(nodes, out: list[str]) -> list[str]:
    for node in nodes:
        out.append(node_line(node))
        write_nodes(node.children, out)
    return out


def write_paragraph(para: HstNode, out: list[str]) -> list[str]:
    if para.text:
        out.append(f"<h{para.level}> {para.text}")
    return write_nodes(para.children, out)


def write_body(paragraphs) -> str:
    out = ["<content>"]
    for para in paragraphs:
        write_paragraph(para, out)
    out.append("</content>")
    return "\n".join(out) + "\n"


def write_hst(tree: HstTree) -> str:
    """Canonical HST text for ``tree`` (LF line endings, trailing newline)."""
    return f"{tree.title}\n" + write_body(tree.paragraphs)


def redepth(node: HstNode, depth: int) -> HstNode:
    """Copy of ``node`` with depths renumbered from ``depth`` downwards."""
    kids = tuple(redepth(c, depth + 1) for c in node.children)
    return replace(node, depth=depth, children=kids)
