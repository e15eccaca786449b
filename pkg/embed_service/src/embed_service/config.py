"""Service configuration."""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_MODEL = "sentence-transformers/paraphrase-multilingual-MiniLM-L12-v2"


@dataclass(frozen=True)
class ServiceConfig:
    model: str = DEFAULT_MODEL
    host: str = "127.0.0.1"
    port: int = 8876
    batch_limit: int = 64
    device: str = "cpu"
