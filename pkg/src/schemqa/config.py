"""Engine configuration.

Values merge with precedence defaults < config file < environment < CLI
flags. The file is YAML (JSON works too); environment overrides use
``SCHEMQA_<SECTION>_<FIELD>``, e.g. ``SCHEMQA_RETRIEVAL_N_RETRIEVE=16``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

ENV_PREFIX = "SCHEMQA_"


@dataclass
class CorpusSection:
    manifest: str | None = None
    index: str | None = None
    window_words: int = 180
    stride_words: int = 90


@dataclass
class RetrievalSection:
    n_retrieve: int = 8
    k_rerank: int = 4
    sim_fn: str = "COSINE"
    embed_dim: int = 256
    embed_seed: int = 13


@dataclass
class SelectionSection:
    k_target: int = 2
    template_dir: str | None = None


@dataclass
class LoopSection:
    max_iters: int = 3
    tau: float = 0.8
    max_react_steps: int = 4


@dataclass
class BackendSection:
    kind: str = "scripted"  # scripted | http
    endpoint: str = ""
    model: str = ""
    auth_token_env: str = "SCHEMQA_API_TOKEN"
    timeout_s: float = 30.0
    retries: int = 3
    concurrency: int = 4
    fixtures: str | None = None
    strict: bool = False
    record: str | None = None


@dataclass
class MemorySection:
    store_dir: str | None = None
    promote_accepted: bool = True
    recall_top_m: int = 4


@dataclass
class ToolsSection:
    fixtures_dir: str | None = None
    strict: bool = False


@dataclass
class ServerSection:
    host: str = "127.0.0.1"
    port: int = 8080
    trace_dir: str | None = None
    bearer_token_env: str | None = None
    static_dir: str | None = None  # serve a built frontend from / when set


@dataclass
class EngineConfig:
    corpus: CorpusSection = field(default_factory=CorpusSection)
    retrieval: RetrievalSection = field(default_factory=RetrievalSection)
    selection: SelectionSection = field(default_factory=SelectionSection)
    loop: LoopSection = field(default_factory=LoopSection)
    backend: BackendSection = field(default_factory=BackendSection)
    memory: MemorySection = field(default_factory=MemorySection)
    tools: ToolsSection = field(default_factory=ToolsSection)
    server: ServerSection = field(default_factory=ServerSection)

    def validate(self) -> "EngineConfig":
        if not 1 <= self.retrieval.k_rerank <= self.retrieval.n_retrieve:
            raise ConfigError(
                f"k_rerank must be in [1, n_retrieve], got {self.retrieval.k_rerank}/{self.retrieval.n_retrieve}"
            )
        if not 0.0 <= self.loop.tau <= 1.0:
            raise ConfigError(f"tau must be in [0, 1], got {self.loop.tau}")
        if not 1 <= self.selection.k_target <= 6:
            raise ConfigError(f"k_target must be in [1, 6], got {self.selection.k_target}")
        if self.retrieval.sim_fn.upper() not in ("COSINE", "DOT"):
            raise ConfigError(f"sim_fn must be COSINE or DOT, got {self.retrieval.sim_fn!r}")
        if self.backend.kind not in ("scripted", "http"):
            raise ConfigError(f"backend.kind must be scripted or http, got {self.backend.kind!r}")
        if self.loop.max_iters < 0 or self.loop.max_react_steps < 1:
            raise ConfigError("max_iters must be >= 0 and max_react_steps >= 1")
        return self


def _coerce(value: str, target_type: type) -> object:
    if target_type is bool:
        return value.strip().lower() in ("1", "true", "yes", "on")
    if target_type is int:
        return int(value)
    if target_type is float:
        return float(value)
    return value


def _section_defaults() -> dict:
    return {name: dataclasses.asdict(cls()) for name, cls in _SECTION_CLASSES.items()}


_SECTION_CLASSES = {
    "corpus": CorpusSection,
    "retrieval": RetrievalSection,
    "selection": SelectionSection,
    "loop": LoopSection,
    "backend": BackendSection,
    "memory": MemorySection,
    "tools": ToolsSection,
    "server": ServerSection,
}


def _deep_update(base: dict, overlay: dict) -> None:
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value


def _env_overlay(env: dict) -> dict:
    overlay: dict = {}
    for section, cls in _SECTION_CLASSES.items():
        fields = {f.name: f for f in dataclasses.fields(cls)}
        prefix = f"{ENV_PREFIX}{section.upper()}_"
        for key, raw in env.items():
            if not key.startswith(prefix):
                continue
            name = key[len(prefix) :].lower()
            if name not in fields:
                raise ConfigError(f"unknown config field for {key}")
            default = getattr(cls(), name)
            target = type(default) if default is not None else str
            try:
                overlay.setdefault(section, {})[name] = _coerce(raw, target)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from exc
    return overlay


def load_config(
    path: str | Path | None = None,
    env: dict | None = None,
    overrides: dict | None = None,
) -> EngineConfig:
    """Build a validated EngineConfig from all four layers."""
    merged = _section_defaults()

    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a mapping of sections")
        for section in raw:
            if section not in _SECTION_CLASSES:
                raise ConfigError(f"unknown config section {section!r}")
        _deep_update(merged, raw)

    env_map = dict(os.environ) if env is None else dict(env)
    _deep_update(merged, _env_overlay(env_map))

    if overrides:
        _deep_update(merged, overrides)

    sections = {}
    for name, cls in _SECTION_CLASSES.items():
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(merged[name]) - known
        if extra:
            raise ConfigError(f"unknown fields in section {name!r}: {sorted(extra)}")
        sections[name] = cls(**merged[name])
    return EngineConfig(**sections).validate()
