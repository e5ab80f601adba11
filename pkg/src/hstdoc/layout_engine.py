"""Fill a masked layout with boxes, remotely or with a rule-based flow."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

from .annotation import entity_slots
from .endpoint import CacheMiss, ChatClient, EndpointConfig, user_messages
from .glyphs import GlyphModel
from .hst import HstTree
from .layout_seq import Box, FillMap, MaskedLayout, ProtocolError, parse_fill_map


@dataclass(frozen=True)
class LayoutRequest:
    masked: MaskedLayout
    canvas: tuple[int, int]
    engine: str = "fallback"
    retry_budget: int = 2

    def __post_init__(self):
        if self.retry_budget < 0:
            raise ValueError("retry_budget must be >= 0")
        if self.engine not in ("remote", "fallback"):
            raise ValueError(f"unknown engine {self.engine!r}")


@dataclass(frozen=True)
class EngineReport:
    attempts: int
    outcome: str
    exclusion_reason: str | None = None

    def __post_init__(self):
        if self.outcome == "excluded" and not self.exclusion_reason:
            raise ValueError("excluded reports need a reason")

    def to_dict(self) -> dict:
        return {"attempts": self.attempts, "outcome": self.outcome, "reason": self.exclusion_reason}


class Excluded(Exception):
    """The sample fails the protocol or box checks and must be skipped."""

    def __init__(self, reason: str, detail: str = "", report: EngineReport | None = None,
                 index: int | None = None):
        self.reason = reason
        self.detail = detail
        self.index = index
        self.report = report or EngineReport(0, "excluded", reason)
        super().__init__(f"{reason}: {detail}" if detail else reason)


class CanvasOverflow(ValueError):
    def __init__(self, needed_height: int, needed_width: int = 0):
        self.needed_height = needed_height
        self.needed_width = needed_width
        super().__init__(f"flow layout needs {needed_width}x{needed_height}")


def complete_layout_remote(req: LayoutRequest, endpoint: EndpointConfig,
                           client: ChatClient | None = None) -> tuple[FillMap, EngineReport]:
    """Send the masked sequence as the sole user message and parse the reply.

    Parse failures are retried up to ``req.retry_budget`` times; when they
    run out :class:`Excluded` is raised carrying the final report.
    """
    client = client or ChatClient(endpoint)
    messages = user_messages(req.masked.text)
    reason, detail = "", ""
    attempts = 0
    for attempt in range(req.retry_budget + 1):
        try:
            reply = client.complete(messages, attempt)
        except CacheMiss:
            if attempt == 0:
                raise
            break
        attempts += 1
        try:
            fills = parse_fill_map(reply, req.masked.mask_count)
        except ProtocolError as exc:
            reason, detail = exc.kind, str(exc)
            continue
        return fills, EngineReport(attempts, "ok")
    raise Excluded(reason, detail, EngineReport(attempts, "excluded", reason))


def complete_many(reqs: Iterable[LayoutRequest], endpoint: EndpointConfig,
                  client: ChatClient | None = None) -> list:
    """Run remote completions with at most ``endpoint.max_concurrency`` in flight.

    Returns, in request order, either ``(fills, report)`` or the exception.
    """
    client = client or ChatClient(endpoint)

    def one(req):
        try:
            return complete_layout_remote(req, endpoint, client)
        except Exception as exc:  # noqa: BLE001 - handed back to the caller per item
            return exc

    with ThreadPoolExecutor(max_workers=max(1, endpoint.max_concurrency)) as pool:
        return list(pool.map(one, reqs))


@dataclass(frozen=True)
class FallbackParams:
    margin: int = 40
    gap: int = 12
    indent: int = 24
    h_header: int = 28
    h_body: int = 20
    leading: int = 8
    width: int = 850
    height: int = 1100
    glyphs: GlyphModel = field(default_factory=GlyphModel)


def flow_boxes(tree: HstTree, style: FallbackParams | None = None) -> list[Box]:
    """Top-down flow layout in reading order; one box per entity."""
    style = style or FallbackParams()
    gm = style.glyphs
    boxes: list[Box] = []
    y = style.margin
    slots = entity_slots(tree)
    k = 0
    while k < len(slots):
        slot = slots[k]
        if slot.part in ("title", "header"):
            h, x = style.h_header, style.margin
        else:
            h, x = style.h_body, style.margin + style.indent * slot.depth
        right = x + gm.width_for_box(slot.text, h)
        boxes.append((x, y, right, y + h))
        k += 1
        if slot.part == "key" and k < len(slots) and slots[k].part == "value" and slots[k].path == slot.path:
            vx = right + style.gap
            boxes.append((vx, y, vx + gm.width_for_box(slots[k].text, h), y + h))
            k += 1
        y += h + style.leading
    if boxes:
        bottom = max(b[3] for b in boxes)
        right = max(b[2] for b in boxes)
        if bottom > style.height or right > style.width:
            raise CanvasOverflow(bottom, right)
    return boxes


def complete_layout_fallback(req: LayoutRequest, tree: HstTree,
                             style: FallbackParams | None = None) -> FillMap:
    style = style or FallbackParams(width=req.canvas[0], height=req.canvas[1])
    boxes = flow_boxes(tree, style)
    if len(boxes) != req.masked.mask_count:
        raise ValueError(f"tree has {len(boxes)} entities, request masks {req.masked.mask_count}")
    return {i: b for i, b in enumerate(boxes, 1)}


def validate_boxes(fills: FillMap, canvas: tuple[int, int], policy: str = "strict") -> FillMap:
    """Reject (strict) or clip (clamp) boxes that leave the canvas; degenerate boxes always fail."""
    if policy not in ("strict", "clamp"):
        raise ValueError(f"unknown policy {policy!r}")
    width, height = canvas
    out: FillMap = {}
    for i in sorted(fills):
        x1, y1, x2, y2 = fills[i]
        if x1 >= x2 or y1 >= y2:
            raise Excluded("DegenerateBox", f"box {i} = {fills[i]}", index=i)
        if policy == "clamp":
            x1, x2 = max(0, min(x1, width)), max(0, min(x2, width))
            y1, y2 = max(0, min(y1, height)), max(0, min(y2, height))
            if x1 >= x2 or y1 >= y2:
                raise Excluded("DegenerateBox", f"box {i} collapses after clamping", index=i)
        elif min(x1, y1) < 0 or x2 > width or y2 > height:
            raise Excluded("OutOfCanvas", f"box {i} = {fills[i]} on {width}x{height}", index=i)
        out[i] = (x1, y1, x2, y2)
    return out
