"""Text encoders: a remote embedding API client and a hashed bag-of-tokens embedder."""

from __future__ import annotations

import enum
import os
import re
import threading
import time
from dataclasses import dataclass

import httpx
import numpy as np

from .core import Embedding
from .errors import DimensionError, ProviderError, ValidationError

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1

DEFAULT_REMOTE_MODEL = "text-embedding-3-small"
REMOTE_DIMENSION = 1536
HASHED_DIMENSION = 64

_TOKEN = re.compile(r"[^\W_]+")


class EmbedderMode(str, enum.Enum):
    REMOTE = "remote"
    HASHED = "hashed"


@dataclass(frozen=True)
class EmbedderConfig:
    mode: EmbedderMode = EmbedderMode.HASHED
    dimension: int | None = None
    model_id: str = DEFAULT_REMOTE_MODEL
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    timeout_s: float = 30.0
    max_in_flight: int = 8

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", EmbedderMode(self.mode))
        if self.dimension is None:
            default = REMOTE_DIMENSION if self.mode is EmbedderMode.REMOTE else HASHED_DIMENSION
            object.__setattr__(self, "dimension", default)
        if not isinstance(self.dimension, int) or self.dimension < 2:
            raise ValidationError("dimension must be an integer >= 2", "dimension")


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN.findall(text.lower())


def hashed_counts(text: str, d: int) -> np.ndarray:
    counts = np.zeros(d, dtype=np.float64)
    for tok in tokenize(text):
        counts[fnv1a_64(tok.encode("utf-8")) % d] += 1.0
    return counts


def hashed_embed(text: str, d: int = HASHED_DIMENSION) -> Embedding:
    counts = hashed_counts(text, d)
    norm = float(np.sqrt(np.dot(counts, counts)))
    if norm > 0.0:
        counts = counts / norm
    return Embedding.from_array(counts)


class RemoteEmbedder:
    """Client for an OpenAI-compatible ``/embeddings`` endpoint."""

    def __init__(self, cfg: EmbedderConfig, transport: httpx.BaseTransport | None = None):
        self.cfg = cfg
        self._gate = threading.BoundedSemaphore(cfg.max_in_flight)
        self._client = httpx.Client(timeout=cfg.timeout_s, transport=transport)

    def embed(self, text: str) -> Embedding:
        key = os.environ.get(self.cfg.api_key_env)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        started = time.perf_counter()
        with self._gate:
            try:
                resp = self._client.post(
                    f"{self.cfg.base_url.rstrip('/')}/embeddings",
                    json={"model": self.cfg.model_id, "input": text},
                    headers=headers,
                )
                resp.raise_for_status()
                vector = resp.json()["data"][0]["embedding"]
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                raise ProviderError(f"embedding request failed: {exc}", elapsed_s=time.perf_counter() - started) from exc
        if len(vector) != self.cfg.dimension:
            raise DimensionError(f"provider returned d={len(vector)}, configured d={self.cfg.dimension}")
        return Embedding(tuple(float(x) for x in vector))

    def close(self) -> None:
        self._client.close()


class Embedder:
    """Callable front for either encoder; ``embed(text)`` is the encoder g."""

    def __init__(self, cfg: EmbedderConfig = EmbedderConfig(), transport: httpx.BaseTransport | None = None):
        self.cfg = cfg
        self._remote = RemoteEmbedder(cfg, transport) if cfg.mode is EmbedderMode.REMOTE else None

    @property
    def dimension(self) -> int:
        return self.cfg.dimension

    def embed(self, text: str) -> Embedding:
        if self._remote is not None:
            if not text.strip():
                raise ValidationError("cannot embed empty text", "text")
            return self._remote.embed(text)
        return hashed_embed(text, self.cfg.dimension)

    __call__ = embed


def embed(text: str, cfg: EmbedderConfig = EmbedderConfig()) -> Embedding:
    if cfg.mode is EmbedderMode.HASHED:
        return hashed_embed(text, cfg.dimension)
    return Embedder(cfg).embed(text)
