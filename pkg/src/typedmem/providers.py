"""Completion providers: a replaying fixture provider and an HTTP chat client."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Protocol

import httpx

from .errors import ParseError, ProviderError

logger = logging.getLogger(__name__)

DEFAULT_CHAT_MODEL = "gpt-4o-mini"
DEFAULT_BASE_URL = "https://api.openai.com/v1"


class CompletionProvider(Protocol):
    model_id: str

    def complete(self, prompt: str) -> str: ...


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def extract_json_object(text: str) -> dict[str, Any]:
    """Parse the outermost ``{...}`` span of a model response."""
    start, end = text.find("{"), text.rfind("}")
    if start < 0 or end <= start:
        raise ParseError(f"no JSON object in response: {text[:80]!r}")
    try:
        value = json.loads(text[start : end + 1])
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in response: {exc}") from exc
    if not isinstance(value, dict):
        raise ParseError("response JSON is not an object")
    return value


@dataclass
class ScriptedProvider:
    """Replays responses keyed by SHA-256 of the prompt.

    A value may be a string or a list of strings; lists are consumed one per
    call for that prompt (the last entry repeats). Prompts with no entry go to
    ``fallback`` if given, else raise ProviderError.
    """

    responses: dict[str, str | list[str]] = field(default_factory=dict)
    fallback: Callable[[str], str] | None = None
    model_id: str = "scripted"
    temperature: float = 0.0

    def __post_init__(self) -> None:
        self._calls: dict[str, int] = defaultdict(int)
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | os.PathLike[str], fallback: Callable[[str], str] | None = None) -> ScriptedProvider:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ParseError("scripted fixture must be a JSON object", path=str(path))
        return cls(data, fallback=fallback)

    def add(self, prompt: str, response: str | list[str]) -> None:
        self.responses[prompt_hash(prompt)] = response

    def complete(self, prompt: str) -> str:
        key = prompt_hash(prompt)
        entry = self.responses.get(key)
        if entry is None:
            if self.fallback is None:
                raise ProviderError(f"no scripted response for prompt {key[:12]}")
            return self.fallback(prompt)
        if isinstance(entry, str):
            return entry
        with self._lock:
            index = self._calls[key]
            self._calls[key] += 1
        return entry[min(index, len(entry) - 1)]


@dataclass
class ChatCompletionProvider:
    """OpenAI-compatible ``/chat/completions`` client."""

    model_id: str = DEFAULT_CHAT_MODEL
    base_url: str = DEFAULT_BASE_URL
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 512
    timeout_s: float = 60.0
    max_in_flight: int = 8
    transport: httpx.BaseTransport | None = None

    def __post_init__(self) -> None:
        self._gate = threading.BoundedSemaphore(self.max_in_flight)
        self._client = httpx.Client(timeout=self.timeout_s, transport=self.transport)

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env)
        return {"Authorization": f"Bearer {key}"} if key else {}

    def complete(self, prompt: str) -> str:
        body = {
            "model": self.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        started = time.perf_counter()
        with self._gate:
            try:
                resp = self._client.post(f"{self.base_url.rstrip('/')}/chat/completions", json=body, headers=self._headers())
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"] or ""
            except httpx.TimeoutException as exc:
                elapsed = time.perf_counter() - started
                raise ProviderError(f"completion timed out after {elapsed:.3f}s", elapsed_s=elapsed) from exc
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                elapsed = time.perf_counter() - started
                raise ProviderError(f"completion failed: {exc}", elapsed_s=elapsed) from exc

    def close(self) -> None:
        self._client.close()
