"""Chat-completion client with an on-disk replay cache.

Modes:
  replay  answer only from the cache; a miss is :class:`EndpointUnreachable`
  record  call the endpoint and store every answer in the cache
  live    call the endpoint, never touch the cache
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass
from pathlib import Path

from .fsutil import write_atomic

log = logging.getLogger(__name__)

ENV_PREFIX = "HSTDOC_"


class EndpointUnreachable(RuntimeError):
    pass


class CacheMiss(EndpointUnreachable):
    pass


@dataclass
class EndpointConfig:
    base_url: str = ""
    model: str = "clgm"
    temperature: float = 0.0
    timeout: float = 120.0
    retry_budget: int = 2
    api_key: str = ""
    replay_dir: str = ""
    mode: str = "replay"
    max_concurrency: int = 4

    def __post_init__(self):
        if self.mode not in ("replay", "record", "live"):
            raise ValueError(f"unknown endpoint mode {self.mode!r}")
        if self.retry_budget < 0:
            raise ValueError("retry_budget must be >= 0")

    def with_env(self, environ=None) -> EndpointConfig:
        """Override URL, model and credentials from ``HSTDOC_*`` variables."""
        env = os.environ if environ is None else environ
        cfg = EndpointConfig(**asdict(self))
        for name in ("base_url", "model", "api_key", "mode", "replay_dir"):
            val = env.get(ENV_PREFIX + name.upper())
            if val:
                setattr(cfg, name, val)
        cfg.__post_init__()
        return cfg

    def public_dict(self) -> dict:
        d = asdict(self)
        d["api_key"] = "***" if self.api_key else ""
        return d


def request_payload(cfg: EndpointConfig, messages: list[dict]) -> dict:
    return {"model": cfg.model, "messages": messages, "temperature": cfg.temperature}


def cache_key(payload: dict, attempt: int = 0) -> str:
    blob = json.dumps({"request": payload, "attempt": attempt}, sort_keys=True,
                      ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ReplayCache:
    def __init__(self, root):
        self.root = Path(root)

    def path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> str | None:
        p = self.path(key)
        if not p.exists():
            return None
        return json.loads(p.read_text(encoding="utf-8"))["response"]

    def put(self, payload: dict, response: str, attempt: int = 0) -> str:
        key = cache_key(payload, attempt)
        rec = {"request": payload, "attempt": attempt, "response": response}
        write_atomic(self.path(key), json.dumps(rec, ensure_ascii=False, indent=1, sort_keys=True))
        return key


def user_messages(content: str, system: str | None = None) -> list[dict]:
    msgs = [{"role": "system", "content": system}] if system else []
    msgs.append({"role": "user", "content": content})
    return msgs


class ChatClient:
    def __init__(self, cfg: EndpointConfig, opener=None):
        self.cfg = cfg
        self.cache = ReplayCache(cfg.replay_dir) if cfg.replay_dir else None
        self._open = opener or urllib.request.urlopen

    def complete(self, messages: list[dict], attempt: int = 0) -> str:
        payload = request_payload(self.cfg, messages)
        key = cache_key(payload, attempt)
        if self.cfg.mode == "replay":
            hit = self.cache.get(key) if self.cache else None
            if hit is None:
                raise CacheMiss(f"no cached response for request {key[:12]} (attempt {attempt})")
            return hit
        reply = self._post(payload)
        if self.cfg.mode == "record" and self.cache:
            self.cache.put(payload, reply, attempt)
        return reply

    def _post(self, payload: dict) -> str:
        if not self.cfg.base_url:
            raise EndpointUnreachable("no base_url configured")
        url = self.cfg.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.cfg.api_key:
            headers["Authorization"] = f"Bearer {self.cfg.api_key}"
        req = urllib.request.Request(url, json.dumps(payload).encode("utf-8"), headers, method="POST")
        try:
            with self._open(req, timeout=self.cfg.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise EndpointUnreachable(f"{url}: {exc}") from exc
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise EndpointUnreachable(f"{url}: unexpected response shape") from None
