"""Text vectors under remote/local/auto modes.

The local backend is a deterministic feature-hashing embedder (FNV-1a 64-bit,
sign from the top hash bit), so stored vectors reproduce bit-for-bit across
processes and platforms. The remote backend talks the provider embeddings wire
format and is reshaped to the shared 384-dim space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Literal

import httpx
import numpy as np

from .domain import EmbeddingMode, Provider, RuntimeConfig, tokenize

logger = logging.getLogger(__name__)

DIMENSION = 384
REMOTE_EMBEDDING_MODEL = "text-embedding-3-small"
REMOTE_TIMEOUT_SECONDS = 15.0
DEFAULT_EMBEDDINGS_BASE_URL = "https://api.openai.com/v1"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class EmbeddingUnavailable(Exception):
    """The requested embedding backend cannot produce a vector right now."""


@dataclass(frozen=True)
class Embedding:
    vector: np.ndarray
    provenance: Literal["remote", "local"]

    def __post_init__(self) -> None:
        if self.vector.shape != (DIMENSION,):
            raise ValueError(f"embedding must have dimension {DIMENSION}, got {self.vector.shape}")


def _fnv1a64(token: str) -> int:
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def embed_local(text: str) -> Embedding:
    """Hash each token into one of 384 buckets with a +/-1 sign, accumulate,
    L2-normalize. Empty input maps to the zero vector."""
    vec = np.zeros(DIMENSION, dtype=np.float64)
    for token in tokenize(text):
        h = _fnv1a64(token)
        sign = 1.0 if (h >> 63) == 0 else -1.0
        vec[h % DIMENSION] += sign
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec = vec / norm
    return Embedding(vector=vec, provenance="local")


def _resize(raw: np.ndarray) -> np.ndarray:
    """Truncate or zero-pad a foreign-sized vector to 384, then renormalize.
    Vectors that already fit are passed through untouched."""
    if raw.shape == (DIMENSION,):
        return raw
    if raw.shape[0] > DIMENSION:
        out = raw[:DIMENSION].copy()
    else:
        out = np.zeros(DIMENSION, dtype=np.float64)
        out[: raw.shape[0]] = raw
    norm = float(np.linalg.norm(out))
    if norm > 0.0:
        out = out / norm
    return out


def embed_remote(text: str, config: RuntimeConfig) -> Embedding:
    """POST to the provider embeddings endpoint. Any transport or protocol
    failure becomes EmbeddingUnavailable so callers can fall back by mode."""
    base = (config.base_url or DEFAULT_EMBEDDINGS_BASE_URL).rstrip("/")
    headers = {}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    try:
        resp = httpx.post(
            f"{base}/embeddings",
            json={"model": REMOTE_EMBEDDING_MODEL, "input": text},
            headers=headers,
            timeout=REMOTE_TIMEOUT_SECONDS,
        )
    except httpx.HTTPError as exc:
        raise EmbeddingUnavailable(f"embeddings request failed: {type(exc).__name__}") from exc
    if resp.status_code != 200:
        raise EmbeddingUnavailable(f"embeddings endpoint returned HTTP {resp.status_code}")
    try:
        raw = np.asarray(resp.json()["data"][0]["embedding"], dtype=np.float64)
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise EmbeddingUnavailable("embeddings response had unexpected shape") from exc
    if raw.ndim != 1 or raw.shape[0] == 0:
        raise EmbeddingUnavailable("embeddings response had unexpected shape")
    return Embedding(vector=_resize(raw), provenance="remote")


def remote_embedding_configured(config: RuntimeConfig) -> bool:
    """Remote vectors need an OpenAI-compatible endpoint and a credential;
    the anthropic wire format has no embeddings route and mock has no remote."""
    return config.provider is Provider.OPENAI_COMPATIBLE and bool(config.api_key)


def select_mode(config: RuntimeConfig, remote_available: bool) -> EmbeddingMode:
    """Resolve the configured mode to a concrete backend: remote and local are
    literal, auto prefers remote when it is available."""
    if config.embedding_mode is EmbeddingMode.REMOTE:
        if not remote_available:
            raise EmbeddingUnavailable("remote embeddings not configured")
        return EmbeddingMode.REMOTE
    if config.embedding_mode is EmbeddingMode.LOCAL:
        return EmbeddingMode.LOCAL
    return EmbeddingMode.REMOTE if remote_available else EmbeddingMode.LOCAL


class Embedder:
    """Mode-aware embedding capability handed to the store.

    In auto mode a remote failure at call time degrades to the local backend;
    in explicit remote mode it propagates so the caller can surface it.
    """

    def __init__(self, config: RuntimeConfig):
        self.config = config

    def embed(self, text: str) -> Embedding:
        mode = select_mode(self.config, remote_embedding_configured(self.config))
        if mode is EmbeddingMode.REMOTE:
            try:
                return embed_remote(text, self.config)
            except EmbeddingUnavailable:
                if self.config.embedding_mode is EmbeddingMode.AUTO:
                    logger.debug("remote embedding failed, falling back to local")
                    return embed_local(text)
                raise
        return embed_local(text)


EmbedFn = Callable[[str], Embedding]
