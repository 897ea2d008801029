"""Application configuration: one YAML (or JSON) file, validated at startup.

Secrets never live here; remote providers name the environment variable that
holds their key.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .answering import ExtractiveAnswerer
from .core import RouteMask
from .embedding import EmbedderConfig, EmbedderMode
from .engine import MemoryEngine, MemoryMode
from .errors import StoreError, ValidationError
from .evaluation.judge import LexicalJudge
from .evaluation.runner import EngineSpec
from .extraction import ExtractorConfig, ExtractorMode
from .providers import DEFAULT_BASE_URL, DEFAULT_CHAT_MODEL, ChatCompletionProvider, CompletionProvider
from .retrieval import RetrievalConfig
from .routing import RouterConfig, RouterMode


class ProviderKind(str, enum.Enum):
    OFFLINE = "offline"
    REMOTE = "remote"


@dataclass(frozen=True)
class ProviderConfig:
    """``offline`` selects the deterministic local stand-in for that role."""

    kind: ProviderKind = ProviderKind.OFFLINE
    model_id: str = DEFAULT_CHAT_MODEL
    base_url: str = DEFAULT_BASE_URL
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 512
    timeout_s: float = 60.0
    max_in_flight: int = 8

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", ProviderKind(self.kind))
        except ValueError as exc:
            raise ValidationError(f"provider kind must be offline or remote; got {self.kind!r}", "kind") from exc

    def remote(self) -> ChatCompletionProvider:
        return ChatCompletionProvider(
            self.model_id, self.base_url, self.api_key_env, self.temperature,
            self.max_tokens, self.timeout_s, self.max_in_flight,
        )


@dataclass(frozen=True)
class AppConfig:
    store: str | None = None
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    router: RouterConfig = field(default_factory=RouterConfig)
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    llm: ProviderConfig = field(default_factory=ProviderConfig)
    answerer: ProviderConfig = field(default_factory=ProviderConfig)
    judge: ProviderConfig = field(default_factory=ProviderConfig)
    parallelism: int = 1
    test_mode: bool = False

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ValidationError("parallelism must be >= 1", "parallelism")
        needs_llm = self.router.mode is RouterMode.LLM or self.extractor.mode is ExtractorMode.LLM
        if needs_llm and self.llm.kind is ProviderKind.OFFLINE:
            raise ValidationError("llm routing/extraction needs llm.kind: remote", "llm")

    def llm_provider(self) -> CompletionProvider | None:
        return self.llm.remote() if self.llm.kind is ProviderKind.REMOTE else None

    def answer_provider(self) -> CompletionProvider:
        return self.answerer.remote() if self.answerer.kind is ProviderKind.REMOTE else ExtractiveAnswerer()

    def judge_provider(self) -> CompletionProvider:
        return self.judge.remote() if self.judge.kind is ProviderKind.REMOTE else LexicalJudge()

    def missing_keys(self) -> list[str]:
        """Names (never values) of required API-key variables that are unset."""
        needed = []
        for role in (self.llm, self.answerer, self.judge):
            if role.kind is ProviderKind.REMOTE:
                needed.append(role.api_key_env)
        if self.embedder.mode is EmbedderMode.REMOTE:
            needed.append(self.embedder.api_key_env)
        return sorted({name for name in needed if not os.environ.get(name)})


_SECTIONS = {
    "embedder": EmbedderConfig,
    "router": RouterConfig,
    "extractor": ExtractorConfig,
    "retrieval": RetrievalConfig,
    "llm": ProviderConfig,
    "answerer": ProviderConfig,
    "judge": ProviderConfig,
}


def _build(cls: type, data: Any, name: str) -> Any:
    if not isinstance(data, dict):
        raise ValidationError(f"config section {name!r} must be a mapping", name)
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValidationError(f"unknown keys in {name!r}: {', '.join(unknown)}", name)
    if cls is RouterConfig and "default_mask_on_empty" in data:
        data = {**data, "default_mask_on_empty": RouteMask(**data["default_mask_on_empty"])}
    if cls is RetrievalConfig and "stores" in data:
        data = {**data, "stores": tuple(data["stores"])}
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid {name!r} section: {exc}", name) from exc


def config_from_dict(data: dict[str, Any]) -> AppConfig:
    unknown = sorted(set(data) - {f.name for f in fields(AppConfig)})
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}", unknown[0])
    kwargs = dict(data)
    for name, cls in _SECTIONS.items():
        if name in kwargs:
            kwargs[name] = _build(cls, kwargs[name], name)
    return AppConfig(**kwargs)


def load_config(path: str | Path | None) -> AppConfig:
    if path is None:
        return AppConfig()
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ValidationError(f"cannot load config {path}: {exc}", "config") from exc
    if not isinstance(data, dict):
        raise ValidationError("config file must hold a mapping", "config")
    return config_from_dict(data)


def with_overrides(cfg: AppConfig, **overrides: Any) -> AppConfig:
    """Apply CLI flags that are not None (k, budget, store, parallelism, test_mode)."""
    k = overrides.pop("k", None)
    budget = overrides.pop("budget", None)
    if k is not None or budget is not None:
        r = cfg.retrieval
        cfg = replace(cfg, retrieval=RetrievalConfig(
            r.k_per_store if k is None else k, r.budget_K if budget is None else budget, r.stores
        ))
    changes = {key: value for key, value in overrides.items() if value is not None}
    return replace(cfg, **changes) if changes else cfg


def engine_spec(cfg: AppConfig) -> EngineSpec:
    return EngineSpec(
        cfg.embedder, cfg.router, cfg.extractor, cfg.llm_provider(), cfg.answer_provider(), cfg.test_mode
    )


def open_engine(
    cfg: AppConfig,
    store_path: str | Path | None = None,
    *,
    must_exist: bool = False,
    mode: MemoryMode = MemoryMode.TYPED,
) -> MemoryEngine:
    """The one way the CLI and the service obtain an engine."""
    path = store_path or cfg.store
    if path is None:
        raise ValidationError("no store path: pass --store or set 'store' in the config", "store")
    if must_exist and not Path(path).exists():
        raise StoreError(f"store not found: {path}")
    return engine_spec(cfg).build(Path(path), mode, cfg.retrieval)
