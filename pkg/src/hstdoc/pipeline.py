"""End-to-end batch: HST files in, rendered documents and training data out.

Output tree under ``output_dir``::

    hst/<id>.hst              canonical HST
    layouts/<id>.json         repaired layout sequence
    images/<id>.svg (.png)    rendered page
    annotations/<id>.json     FUNSD-style entities
    layouts.jsonl             every ok layout, one per line
    train_pairs.jsonl         masked-layout training pairs
    instructions.jsonl        instruction samples
    manifest.json             per-document status and failure rate
    effective_config.json     the configuration actually used
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .annotation import DocumentAnnotation, export_funsd, extract_entities, hierarchy_stats
from .config import PipelineConfig
from .endpoint import ChatClient, EndpointUnreachable
from .fsutil import dump_json, write_atomic, write_jsonl
from .glyphs import GlyphModel, is_wide
from .hst import HstError, HstTree, parse_hst, write_hst
from .instruct import InstructionDoc, build_instructions
from .layout_engine import (CanvasOverflow, EngineReport, Excluded, LayoutRequest,
                            complete_layout_fallback, complete_layout_remote, validate_boxes)
from .layout_seq import (LayoutDoc, LayoutEntity, PairStats, apply_fill, build_training_pairs,
                         derive_seed, layout_to_obj, mask_layout, parse_layout)
from .metrics import corpus_metrics, failure_rate
from .raster import RasterBackendUnavailable, rasterize
from .render import StylePlan, render_svg, repair_overflow

log = logging.getLogger(__name__)


@dataclass
class DocResult:
    doc_id: str
    status: str
    reason: str = ""
    detail: str = ""
    report: EngineReport | None = None
    tree: HstTree | None = None
    layout: LayoutDoc | None = None
    annotation: DocumentAnnotation | None = None
    image: str = ""
    warnings: list[str] = field(default_factory=list)

    def manifest_entry(self) -> dict:
        entry = {"doc_id": self.doc_id, "status": self.status}
        if self.reason:
            entry["reason"] = self.reason
            entry["detail"] = self.detail
        if self.report is not None:
            entry["attempts"] = self.report.attempts
        if self.warnings:
            entry["warnings"] = self.warnings
        return entry


def doc_language(tree: HstTree, default: str) -> str:
    """Mostly-CJK documents get Chinese fonts and prompts; others use the configured language."""
    if tree.source_lang == "latin":
        return default
    text = write_hst(tree)
    wide = sum(is_wide(ch) for ch in text)
    latin = sum(ch.isascii() and ch.isalpha() for ch in text)
    return "zh" if wide >= latin else default


def _skip(doc_id, reason, detail="", report=None) -> DocResult:
    return DocResult(doc_id, "skipped", reason, detail, report)


def process_document(path: Path, cfg: PipelineConfig, out: Path, client: ChatClient | None,
                     gm: GlyphModel) -> DocResult:
    doc_id = path.stem
    p = cfg.pipeline
    canvas = (cfg.canvas.width, cfg.canvas.height)
    try:
        tree = parse_hst(path.read_text(encoding="utf-8"))
    except HstError as exc:
        return _skip(doc_id, exc.kind, str(exc))
    except UnicodeDecodeError as exc:
        return _skip(doc_id, "NotUtf8", str(exc))
    ann = extract_entities(tree, *canvas, link_headers=p.link_headers)
    bare = LayoutDoc(*canvas, tuple(LayoutEntity(e.text) for e in ann.entities), p.source, doc_id)
    masked = mask_layout(bare)
    req = LayoutRequest(masked, canvas, p.engine, cfg.endpoint.retry_budget)
    try:
        if p.engine == "remote":
            fills, report = complete_layout_remote(req, cfg.endpoint, client)
        else:
            fills, report = complete_layout_fallback(req, tree, cfg.fallback_params()), EngineReport(1, "ok")
    except Excluded as exc:
        return DocResult(doc_id, "excluded", exc.reason, exc.detail, exc.report)
    except CanvasOverflow as exc:
        return _skip(doc_id, "CanvasOverflow", str(exc))
    except EndpointUnreachable as exc:
        return _skip(doc_id, "EndpointUnreachable", str(exc))
    try:
        fills = validate_boxes(fills, canvas, p.box_policy)
    except Excluded as exc:
        report = EngineReport(report.attempts, "excluded", exc.reason)
        return DocResult(doc_id, "excluded", exc.reason, exc.detail, report)

    laid = parse_layout(apply_fill(masked, fills), p.source, doc_id)
    warnings: list[str] = []
    laid = repair_overflow(laid, gm, warnings, clamp=p.box_policy == "clamp")
    ann = ann.with_boxes(laid.boxes)
    plan = StylePlan.sample(derive_seed(p.seed, "style", doc_id), doc_language(tree, p.language))
    svg = render_svg(laid, ann, plan, gm)

    image = f"images/{doc_id}.svg"
    write_atomic(out / "hst" / f"{doc_id}.hst", write_hst(tree))
    write_atomic(out / "layouts" / f"{doc_id}.json", json.dumps(layout_to_obj(laid), ensure_ascii=False) + "\n")
    write_atomic(out / image, svg)
    if p.png:
        try:
            write_atomic(out / "images" / f"{doc_id}.png", rasterize(svg, p.dpi))
            image = f"images/{doc_id}.png"
        except RasterBackendUnavailable as exc:
            warnings.append(str(exc))
    write_atomic(out / "annotations" / f"{doc_id}.json", export_funsd(ann, gm))
    return DocResult(doc_id, "ok", report=report, tree=tree, layout=laid, annotation=ann,
                     image=image, warnings=warnings)


def run_pipeline(cfg: PipelineConfig, client: ChatClient | None = None) -> dict:
    """Process every ``*.hst`` under ``input_dir``; returns the manifest.

    Per-document failures are recorded, never raised.
    """
    p = cfg.pipeline
    out = Path(p.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = sorted(Path(p.input_dir).glob("*.hst"))
    gm = GlyphModel()
    if p.engine == "remote" and client is None:
        client = ChatClient(cfg.endpoint)

    def one(path):
        try:
            return process_document(path, cfg, out, client, gm)
        except Exception as exc:  # noqa: BLE001 - a single bad document must not stop the batch
            log.exception("document %s failed", path.name)
            return _skip(path.stem, type(exc).__name__, str(exc))

    with ThreadPoolExecutor(max_workers=p.workers) as pool:
        results = list(pool.map(one, files))

    ok = [r for r in results if r.status == "ok"]
    layouts = [r.layout for r in ok]
    write_jsonl(out / "layouts.jsonl", [json.dumps(layout_to_obj(d), ensure_ascii=False) for d in layouts])

    pair_stats = PairStats()
    pairs = build_training_pairs(layouts, p.seed, cfg.upsample, p.max_tokens, pair_stats)
    write_jsonl(out / "train_pairs.jsonl", [pair.to_json() for pair in pairs])

    docs = [(r.doc_id, InstructionDoc(r.tree, r.annotation, r.image, doc_language(r.tree, p.language)))
            for r in ok]
    samples, instr_manifest = build_instructions(docs, p.seed, cfg.instructions)
    write_jsonl(out / "instructions.jsonl", [json.dumps(s.to_dict(), ensure_ascii=False) for s in samples])

    reports = [r.report for r in results if r.report is not None]
    counts = {s: sum(r.status == s for r in results) for s in ("ok", "excluded", "skipped")}
    manifest = {
        "n_docs": len(results),
        "counts": counts,
        "failure_rate": failure_rate(reports),
        "docs": [r.manifest_entry() for r in results],
        "train_pairs": {"emitted": pair_stats.emitted, "dropped": pair_stats.dropped},
        "instructions": instr_manifest,
        "hierarchy": hierarchy_stats([r.annotation for r in ok]).to_dict() if ok else {},
        "layout_metrics": {k: v for k, v in corpus_metrics(layouts).to_dict().items() if k != "backend"},
    }
    dump_json(out / "manifest.json", manifest)
    dump_json(out / "effective_config.json", cfg.to_dict())
    return manifest


def exit_code(manifest: dict) -> int:
    return 0 if manifest["n_docs"] == 0 or manifest["counts"]["ok"] > 0 else 1
