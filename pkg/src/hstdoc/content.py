"""Prompt an LLM for HST documents and keep the ones that parse."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from string import Template
from typing import Iterable

from .endpoint import CacheMiss, ChatClient, EndpointConfig, user_messages
from .fsutil import write_atomic
from .hst import validate_hst

log = logging.getLogger(__name__)

LANG_NAMES = {"en": "English", "zh": "简体中文"}
_FENCE_RE = re.compile(r"^```[a-z]*\n(.*?)\n```\s*$", re.S)


def _asset(name: str) -> str:
    return (resources.files("hstdoc") / "assets" / "prompts" / name).read_text(encoding="utf-8")


def load_prompt_template(lang: str = "en", path: str | None = None) -> Template:
    if path:
        return Template(Path(path).read_text(encoding="utf-8"))
    return Template(_asset(f"content_{'zh' if lang == 'zh' else 'en'}.txt"))


def load_exemplar(domain: str = "general", lang: str = "en", path: str | None = None) -> str:
    if path:
        return Path(path).read_text(encoding="utf-8")
    name = f"exemplar_{lang}.hst" if domain == "general" else f"exemplar_{domain}.hst"
    return _asset(name)


def domains() -> dict:
    return json.loads(_asset("domains.json"))


def content_prompt(title: str, lang: str = "en", domain: str = "general",
                   template: Template | None = None, exemplar: str | None = None) -> str:
    template = template or load_prompt_template(lang)
    exemplar = exemplar if exemplar is not None else load_exemplar(domain, lang)
    names = domains().get(domain, {})
    return template.safe_substitute(
        title=title, language=LANG_NAMES.get(lang, lang),
        domain=names.get(lang, names.get("en", domain)), exemplar=exemplar.strip())


def strip_fence(reply: str) -> str:
    """Models like to wrap answers in code fences; drop them."""
    text = reply.strip().replace("\r\n", "\n")
    m = _FENCE_RE.match(text)
    return (m.group(1) if m else text) + "\n"


def slugify(title: str) -> str:
    slug = re.sub(r"[^\w]+", "_", title.strip().lower()).strip("_")
    return slug[:60] or "doc"


@dataclass
class ContentStats:
    written: int = 0
    skipped: int = 0
    invalid_replies: int = 0
    files: list[str] = field(default_factory=list)
    skipped_titles: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"written": self.written, "skipped": self.skipped,
                "invalid_replies": self.invalid_replies, "files": self.files,
                "skipped_titles": self.skipped_titles}


def cmd_gen_content(titles: Iterable[str], out_dir, endpoint: EndpointConfig, lang: str = "en",
                    domain: str = "general", retries: int | None = None,
                    template_path: str | None = None, exemplar_path: str | None = None,
                    client: ChatClient | None = None) -> ContentStats:
    """Write one ``.hst`` file per title.

    Replies that fail validation are retried ``retries`` times (default: the
    endpoint's retry budget) and then skipped. A cache miss on the first
    attempt of a title propagates as :class:`EndpointUnreachable`.
    """
    client = client or ChatClient(endpoint)
    retries = endpoint.retry_budget if retries is None else retries
    template = load_prompt_template(lang, template_path)
    exemplar = load_exemplar(domain, lang, exemplar_path)
    out = Path(out_dir)
    stats = ContentStats()
    for n, title in enumerate(t.strip() for t in titles):
        if not title:
            continue
        messages = user_messages(content_prompt(title, lang, domain, template, exemplar))
        text = None
        for attempt in range(retries + 1):
            try:
                reply = client.complete(messages, attempt)
            except CacheMiss:
                if attempt == 0:
                    raise
                break
            candidate = strip_fence(reply)
            problems = validate_hst(candidate)
            if not problems:
                text = candidate
                break
            stats.invalid_replies += 1
            log.info("title %r attempt %d: %s", title, attempt, problems[0].message)
        if text is None:
            stats.skipped += 1
            stats.skipped_titles.append(title)
            continue
        path = out / f"{n:04d}_{slugify(title)}.hst"
        write_atomic(path, text)
        stats.written += 1
        stats.files.append(path.name)
    return stats
