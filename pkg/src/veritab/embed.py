"""Embedding providers: a deterministic local fallback and an HTTP client
for an external embedding service, plus an exactly-once vector cache.

Wire protocol: POST /embed {"texts": [...]} ->
{"model_id": str, "dimension": int, "vectors": [[...], ...]};
GET /health -> {"model_id", "dimension"}. Vectors are unit-normalized.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
import requests

from .errors import ProtocolError, ProviderError

FALLBACK_DIMENSION = 384


def _trigram_vector(text: str, dim: int) -> np.ndarray:
    # signed feature hashing of character 3-grams, stable across platforms
    normalized = " " + " ".join(text.lower().split()) + " "
    v = np.zeros(dim, dtype=np.float64)
    for i in range(len(normalized) - 2):
        digest = hashlib.blake2b(normalized[i : i + 3].encode("utf-8"), digest_size=8).digest()
        h = int.from_bytes(digest, "big")
        v[h % dim] += 1.0 if h & (1 << 63) == 0 else -1.0
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        v[0] = 1.0
        norm = 1.0
    return v / norm


@dataclass
class FallbackEmbedder:
    kind: str = "fallback"
    dimension: int = FALLBACK_DIMENSION
    model_id: str = "fallback-trigram-384"
    batch_limit: int = 1024
    warnings: list = field(default_factory=list)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) > self.batch_limit:
            raise ValueError(f"batch of {len(texts)} exceeds limit {self.batch_limit}")
        return np.array([_trigram_vector(t, self.dimension) for t in texts]).reshape(
            len(texts), self.dimension
        )


@dataclass
class ServiceEmbedder:
    endpoint: str
    dimension: int
    model_id: str
    kind: str = "service"
    batch_limit: int = 64
    timeout: float = 30.0
    max_inflight: int = 8
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self._inflight = threading.BoundedSemaphore(self.max_inflight)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) > self.batch_limit:
            raise ValueError(f"batch of {len(texts)} exceeds limit {self.batch_limit}")
        if not texts:
            return np.zeros((0, self.dimension))
        try:
            with self._inflight:
                resp = requests.post(
                    f"{self.endpoint.rstrip('/')}/embed",
                    json={"texts": list(texts)},
                    timeout=self.timeout,
                )
        except requests.RequestException as exc:
            raise ProviderError(f"embedding service unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(f"embedding service returned HTTP {resp.status_code}")
        try:
            payload = resp.json()
            vectors = np.array(payload["vectors"], dtype=np.float64)
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed embedding response: {exc}") from exc
        if vectors.shape != (len(texts), self.dimension):
            raise ProtocolError(
                f"expected {len(texts)}x{self.dimension} vectors, got {vectors.shape}"
            )
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-3):
            raise ProtocolError("service returned non-unit vectors")
        return vectors / norms[:, None]


EmbeddingProvider = Union[FallbackEmbedder, ServiceEmbedder]


def embed_batch(provider: EmbeddingProvider, texts: Sequence[str]) -> np.ndarray:
    """Embed texts (|texts| <= provider.batch_limit), one unit vector per text."""
    return provider.embed_batch(texts)


class EmbeddingCache:
    """Thread-safe text -> vector cache; each key is computed exactly once."""

    def __init__(self):
        self._vectors: dict[str, np.ndarray] = {}
        self._key_locks: dict[str, threading.Lock] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get_or_compute(self, text: str, compute: Callable[[str], np.ndarray]) -> np.ndarray:
        with self._lock:
            if text in self._vectors:
                self.hits += 1
                return self._vectors[text]
            key_lock = self._key_locks.setdefault(text, threading.Lock())
        with key_lock:
            with self._lock:
                if text in self._vectors:
                    self.hits += 1
                    return self._vectors[text]
            vector = compute(text)  # failures propagate and are not cached
            with self._lock:
                self._vectors[text] = vector
                self.misses += 1
            return vector


def _handshake(endpoint: str, timeout: float) -> tuple[str, int]:
    try:
        resp = requests.get(f"{endpoint.rstrip('/')}/health", timeout=timeout)
    except requests.RequestException as exc:
        raise ProviderError(f"embedding service handshake failed: {exc}") from exc
    if resp.status_code != 200:
        raise ProviderError(f"embedding service handshake returned HTTP {resp.status_code}")
    try:
        payload = resp.json()
        model_id = str(payload["model_id"])
        dimension = int(payload["dimension"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ProtocolError(f"malformed handshake response: {exc}") from exc
    if dimension <= 0:
        raise ProtocolError(f"handshake advertised invalid dimension {dimension}")
    return model_id, dimension


def configure_provider(spec: Union[str, dict, None]) -> EmbeddingProvider:
    """Build a provider from a spec: 'fallback', 'service:URL', or a dict.

    Dict keys: kind, endpoint, batch_limit, timeout, degrade_to_fallback.
    A service spec performs a handshake; with degrade_to_fallback set, a
    failed handshake downgrades to the fallback with a recorded warning.
    """
    if spec is None or spec == "fallback":
        return FallbackEmbedder()
    if isinstance(spec, str):
        if spec.startswith("service:"):
            spec = {"kind": "service", "endpoint": spec[len("service:") :]}
        else:
            raise ProviderError(f"unknown embedder spec {spec!r}")
    kind = spec.get("kind", "fallback")
    if kind == "fallback":
        return FallbackEmbedder()
    if kind != "service":
        raise ProviderError(f"unknown provider kind {kind!r}")
    endpoint = spec.get("endpoint", "")
    timeout = float(spec.get("timeout", 10.0))
    try:
        model_id, dimension = _handshake(endpoint, timeout)
    except ProviderError:
        if spec.get("degrade_to_fallback"):
            provider = FallbackEmbedder()
            provider.warnings.append(
                f"embedding service at {endpoint!r} unavailable; degraded to fallback"
            )
            return provider
        raise
    return ServiceEmbedder(
        endpoint=endpoint,
        dimension=dimension,
        model_id=model_id,
        batch_limit=int(spec.get("batch_limit", 64)),
        timeout=timeout,
    )
