"""Command-line entry point: ``hstdoc <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import kernels
from .annotation import export_funsd, extract_entities, hierarchy_stats, load_funsd
from .config import ConfigError, load_config
from .content import cmd_gen_content
from .endpoint import EndpointUnreachable
from .fsutil import dump_json, write_atomic, write_jsonl
from .glyphs import GlyphModel
from .hst import HstError, parse_hst, validate_hst, write_hst
from .instruct import TASKS, InstructionDoc, build_instructions
from .layout_engine import (CanvasOverflow, Excluded, LayoutRequest, complete_layout_fallback,
                            complete_layout_remote, validate_boxes)
from .layout_seq import (LayoutDoc, LayoutEntity, PairStats, apply_fill, build_training_pairs,
                         layout_from_obj, mask_layout, parse_layout, read_layout_jsonl,
                         serialize_layout)
from .metrics import corpus_metrics, failure_rate
from .layout_engine import EngineReport
from .pipeline import exit_code, run_pipeline
from .raster import RasterBackendUnavailable, rasterize
from .render import StylePlan, render_svg, repair_overflow

log = logging.getLogger("hstdoc")


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _pairs(items, what: str) -> dict:
    result = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"--{what} expects name=N, got {item!r}")
        result[name] = int(value)
    return result


def _config(args):
    overrides = list(getattr(args, "set", None) or [])
    for flag, key in (("input", "pipeline.input_dir"), ("output", "pipeline.output_dir"),
                      ("engine", "pipeline.engine"), ("seed", "pipeline.seed"),
                      ("lang", "pipeline.language"), ("workers", "pipeline.workers")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"{key}={json.dumps(value)}")
    if getattr(args, "png", False):
        overrides.append("pipeline.png=true")
    return load_config(getattr(args, "config", None), overrides)


def _read_tree(path: str):
    return parse_hst(Path(path).read_text(encoding="utf-8"))


def _read_layout(path: str) -> LayoutDoc:
    return layout_from_obj(json.loads(Path(path).read_text(encoding="utf-8")))


def _boxed_annotation(tree, layout: LayoutDoc, link_headers: bool = False):
    ann = extract_entities(tree, layout.width, layout.height, link_headers)
    if [e.text for e in ann.entities] != [e.text for e in layout.entities]:
        raise SystemExit("layout entities do not match the HST file")
    return ann.with_boxes(layout.boxes)


def cmd_gen(args) -> int:
    cfg = _config(args)
    if args.titles:
        titles = Path(args.titles).read_text(encoding="utf-8").splitlines()
    elif args.theme:
        titles = [f"{args.theme} {i + 1}" for i in range(args.count)]
    else:
        raise SystemExit("gen-content needs --titles or --theme")
    try:
        stats = cmd_gen_content(titles, args.out, cfg.endpoint, cfg.pipeline.language, args.domain,
                                args.retries, args.template, args.exemplar)
    except EndpointUnreachable as exc:
        log.error("%s", exc)
        return 2
    print(json.dumps(stats.to_dict(), ensure_ascii=False, indent=2))
    return 0 if stats.written or not titles else 1


def cmd_pipeline(args) -> int:
    manifest = run_pipeline(_config(args))
    c = manifest["counts"]
    print(f"{manifest['n_docs']} documents: {c['ok']} ok, {c['excluded']} excluded, "
          f"{c['skipped']} skipped; failure rate {manifest['failure_rate']:.4f}")
    return exit_code(manifest)


def cmd_parse(args) -> int:
    text = Path(args.file).read_text(encoding="utf-8")
    problems = validate_hst(text)
    if problems:
        for d in problems:
            print(f"{args.file}:{d.line_no}: {d.kind}: {d.message}", file=sys.stderr)
        return 1
    if args.check:
        return 0
    tree = parse_hst(text)
    if args.entities:
        ann = extract_entities(tree, link_headers=args.link_headers)
        recs = [{"id": e.id, "text": e.text, "category": e.category, "links": [list(p) for p in e.links]}
                for e in ann.entities]
        _emit(json.dumps(recs, ensure_ascii=False, indent=1) + "\n", args.out)
    else:
        _emit(write_hst(tree), args.out)
    return 0


def cmd_layout(args) -> int:
    cfg = _config(args)
    tree = _read_tree(args.file)
    canvas = (cfg.canvas.width, cfg.canvas.height)
    ann = extract_entities(tree, *canvas)
    masked = mask_layout(LayoutDoc(*canvas, tuple(LayoutEntity(e.text) for e in ann.entities)))
    if args.masked:
        _emit(masked.text + "\n", args.out)
        return 0
    req = LayoutRequest(masked, canvas, cfg.pipeline.engine, cfg.endpoint.retry_budget)
    try:
        if req.engine == "remote":
            fills, _ = complete_layout_remote(req, cfg.endpoint)
        else:
            fills = complete_layout_fallback(req, tree, cfg.fallback_params())
        fills = validate_boxes(fills, canvas, cfg.pipeline.box_policy)
    except (Excluded, CanvasOverflow, EndpointUnreachable) as exc:
        print(f"{args.file}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    doc = parse_layout(apply_fill(masked, fills))
    if not args.no_repair:
        doc = repair_overflow(doc, clamp=cfg.pipeline.box_policy == "clamp")
    _emit(serialize_layout(doc) + "\n", args.out)
    return 0


def cmd_render(args) -> int:
    layout = _read_layout(args.layout)
    ann = _boxed_annotation(_read_tree(args.hst), layout)
    plan = StylePlan() if args.seed is None else StylePlan.sample(args.seed, args.lang)
    svg = render_svg(layout, ann, plan, GlyphModel())
    write_atomic(args.out, svg)
    if args.png:
        try:
            write_atomic(Path(args.out).with_suffix(".png"), rasterize(svg, args.dpi))
        except RasterBackendUnavailable as exc:
            print(exc, file=sys.stderr)
            return 1
    return 0


def cmd_export(args) -> int:
    ann = _boxed_annotation(_read_tree(args.hst), _read_layout(args.layout), args.link_headers)
    _emit(export_funsd(ann).decode("utf-8") + "\n", args.out)
    return 0


def cmd_build_train(args) -> int:
    with open(args.input, encoding="utf-8") as fh:
        docs = list(read_layout_jsonl(fh, args.source))
    stats = PairStats()
    pairs = build_training_pairs(docs, args.seed, _pairs(args.weight, "weight"), args.max_tokens, stats)
    write_jsonl(args.out, [p.to_json() for p in pairs])
    print(json.dumps({"emitted": stats.emitted, "dropped": stats.dropped, "per_source": stats.per_source}))
    return 0


def _pipeline_docs(root: Path, lang: str):
    for hst in sorted((root / "hst").glob("*.hst")):
        doc_id = hst.stem
        layout = _read_layout(root / "layouts" / f"{doc_id}.json")
        ann = load_funsd((root / "annotations" / f"{doc_id}.json").read_bytes(), layout.width, layout.height)
        png = root / "images" / f"{doc_id}.png"
        image = f"images/{doc_id}.png" if png.exists() else f"images/{doc_id}.svg"
        yield doc_id, InstructionDoc(_read_tree(hst), ann, image, lang)


def cmd_build_instructions(args) -> int:
    samples, manifest = build_instructions(_pipeline_docs(Path(args.input), args.lang), args.seed,
                                           _pairs(args.count, "count"))
    write_jsonl(args.out, [json.dumps(s.to_dict(), ensure_ascii=False) for s in samples])
    print(json.dumps(manifest))
    return 0


def _annotation_files(paths):
    for p in map(Path, paths):
        yield from sorted(p.glob("*.json")) if p.is_dir() else [p]


def cmd_analyze(args) -> int:
    anns = [load_funsd(f.read_bytes()) for f in _annotation_files(args.paths)]
    stats = hierarchy_stats(anns)
    report = stats.to_dict()
    report["row"] = stats.row(args.max_level)
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return 0


def cmd_metrics(args) -> int:
    with open(args.layouts, encoding="utf-8") as fh:
        report = corpus_metrics(read_layout_jsonl(fh)).to_dict()
    if args.manifest:
        docs = json.loads(Path(args.manifest).read_text(encoding="utf-8"))["docs"]
        reports = [EngineReport(d["attempts"], "excluded" if d["status"] == "excluded" else "ok",
                                d.get("reason") if d["status"] == "excluded" else None)
                   for d in docs if "attempts" in d]
        report["failure_rate"] = failure_rate(reports)
    if args.out:
        dump_json(args.out, report)
    else:
        print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _config_flags(p, pipeline: bool = False):
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one config value")
    p.add_argument("--engine", choices=("fallback", "remote"))
    p.add_argument("--lang", choices=("en", "zh"))
    if pipeline:
        p.add_argument("--input", help="directory of .hst files")
        p.add_argument("--output", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--png", action="store_true", help="also rasterize each page")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hstdoc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-content", help="ask the endpoint for HST documents")
    _config_flags(p)
    p.add_argument("--titles", help="file with one title per line")
    p.add_argument("--theme", help="generate --count titles from a theme")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--domain", default="general", help="general, receipt or exam")
    p.add_argument("--retries", type=int, help="extra attempts per invalid reply")
    p.add_argument("--template", help="prompt template file ($title, $language, $domain, $exemplar)")
    p.add_argument("--exemplar", help="one-shot exemplar .hst file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("pipeline", help="run every stage over a directory of .hst files")
    _config_flags(p, pipeline=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("parse", help="validate and canonicalize an HST file")
    p.add_argument("file")
    p.add_argument("--check", action="store_true", help="only report diagnostics")
    p.add_argument("--entities", action="store_true", help="print the entity graph")
    p.add_argument("--link-headers", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("layout", help="lay out one HST file")
    _config_flags(p)
    p.add_argument("file")
    p.add_argument("--masked", action="store_true", help="print the masked input sequence only")
    p.add_argument("--no-repair", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_layout)

    p = sub.add_parser("render", help="render a layout to SVG")
    p.add_argument("--hst", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="sample a style plan (default: plain style)")
    p.add_argument("--lang", default="en", choices=("en", "zh"))
    p.add_argument("--png", action="store_true")
    p.add_argument("--dpi", type=int, default=96)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("export-funsd", help="write FUNSD-style annotation JSON")
    p.add_argument("--hst", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--link-headers", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("build-train", help="masked-layout training pairs from layout JSONL")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--source", default="", help="source name for lines without one")
    p.add_argument("--weight", action="append", metavar="SOURCE=N")
    p.add_argument("--max-tokens", type=int, default=8000)
    p.set_defaults(func=cmd_build_train)

    p = sub.add_parser("build-instructions", help="instruction samples from a pipeline output dir")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lang", default="en", choices=("en", "zh"))
    p.add_argument("--count", action="append", metavar=f"{{{','.join(TASKS)}}}=N")
    p.set_defaults(func=cmd_build_instructions)

    p = sub.add_parser("analyze", help="hierarchy level statistics of annotation files")
    p.add_argument("paths", nargs="+")
    p.add_argument("--max-level", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("metrics", help="overlap and alignment of a layout JSONL corpus")
    p.add_argument("layouts")
    p.add_argument("--manifest", help="pipeline manifest for the failure rate")
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("metric kernels: %s", kernels.BACKEND)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (HstError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
