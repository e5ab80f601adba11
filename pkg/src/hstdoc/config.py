"""Pipeline configuration: TOML file, then ``--set section.key=value`` flags, then env.

Example file::

    [pipeline]
    language = "en"
    seed = 7
    engine = "fallback"
    input_dir = "samples"
    output_dir = "out"

    [canvas]
    width = 850
    height = 1100

    [endpoint]
    base_url = "http://localhost:8000/v1"
    mode = "replay"
    replay_dir = "cache"

    [instructions]
    vie = 3

    [upsample]
    funsd = 4
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .endpoint import EndpointConfig
from .instruct import DEFAULT_COUNTS
from .layout_engine import FallbackParams


class ConfigError(ValueError):
    pass


@dataclass
class PipelineSection:
    language: str = "en"
    seed: int = 0
    engine: str = "fallback"
    input_dir: str = "samples"
    output_dir: str = "out"
    workers: int = 4
    box_policy: str = "strict"
    link_headers: bool = False
    png: bool = False
    dpi: int = 96
    max_tokens: int = 8000
    source: str = "synthetic"


@dataclass
class CanvasSection:
    width: int = 850
    height: int = 1100


@dataclass
class PipelineConfig:
    pipeline: PipelineSection = field(default_factory=PipelineSection)
    canvas: CanvasSection = field(default_factory=CanvasSection)
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)
    # free-form tables: fallback layout overrides, per-task counts, per-source weights
    fallback: dict = field(default_factory=dict)
    instructions: dict = field(default_factory=lambda: dict(DEFAULT_COUNTS))
    upsample: dict = field(default_factory=dict)

    def validate(self) -> PipelineConfig:
        p = self.pipeline
        if p.language not in ("en", "zh"):
            raise ConfigError(f"language must be en or zh, got {p.language!r}")
        if p.engine not in ("fallback", "remote"):
            raise ConfigError(f"engine must be fallback or remote, got {p.engine!r}")
        if p.box_policy not in ("strict", "clamp"):
            raise ConfigError(f"box_policy must be strict or clamp, got {p.box_policy!r}")
        if p.workers < 1 or p.dpi < 1:
            raise ConfigError("workers and dpi must be positive")
        if self.canvas.width <= 0 or self.canvas.height <= 0:
            raise ConfigError("canvas must be positive")
        known = {f.name for f in fields(FallbackParams)} - {"glyphs", "width", "height"}
        unknown = set(self.fallback) - known
        if unknown:
            raise ConfigError(f"unknown fallback keys {sorted(unknown)}")
        self.endpoint.__post_init__()
        return self

    def fallback_params(self) -> FallbackParams:
        return FallbackParams(width=self.canvas.width, height=self.canvas.height,
                              **{k: int(v) for k, v in self.fallback.items()})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["endpoint"] = self.endpoint.public_dict()
        return d


_SECTIONS = {"pipeline": PipelineSection, "canvas": CanvasSection, "endpoint": EndpointConfig}


def _coerce(raw: str):
    """Read a flag value the way TOML would, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def _assign(cfg: PipelineConfig, section: str, key: str, value) -> None:
    target = getattr(cfg, section, None)
    if target is None:
        raise ConfigError(f"unknown config section {section!r}")
    if isinstance(target, dict):
        target[key] = value
        return
    names = {f.name: f for f in fields(target)}
    if key not in names:
        raise ConfigError(f"unknown key {section}.{key}")
    current = getattr(target, key)
    if isinstance(current, bool) and not isinstance(value, bool):
        raise ConfigError(f"{section}.{key} expects true/false, got {value!r}")
    if isinstance(current, (int, float)) and not isinstance(current, bool):
        try:
            value = type(current)(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{section}.{key} expects a number, got {value!r}") from None
    elif isinstance(current, str):
        value = str(value)
    setattr(target, key, value)


def apply_overrides(cfg: PipelineConfig, overrides) -> PipelineConfig:
    for item in overrides or ():
        name, sep, raw = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} is not section.key=value")
        _assign(cfg, section, key, _coerce(raw.strip()))
    return cfg


def load_config(path=None, overrides=None, environ=None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path:
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        for section, table in data.items():
            if not isinstance(table, dict):
                raise ConfigError(f"top-level key {section!r} must be a table")
            for key, value in table.items():
                _assign(cfg, section, key, value)
    apply_overrides(cfg, overrides)
    cfg.endpoint = cfg.endpoint.with_env(environ)
    return cfg.validate()
