"""Sentence-encoder loading and the offline miniature model builder.

`load_encoder` accepts any sentence-transformers model id or a local model
directory. `build_test_model` constructs a small randomly-initialized
encoder through the same pipeline (wordpiece tokenizer, transformer, mean
pooling, L2 normalization) so the service and its tests run fully offline.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np


class EncoderLoadError(RuntimeError):
    """The configured model could not be loaded."""


@dataclass
class Encoder:
    model: object
    model_id: str
    dimension: int

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dimension), dtype=np.float64)
        vectors = self.model.encode(
            list(texts),
            convert_to_numpy=True,
            normalize_embeddings=True,
            batch_size=32,
            show_progress_bar=False,
        )
        return np.asarray(vectors, dtype=np.float64)


def load_encoder(model_ref: str, device: str = "cpu") -> Encoder:
    """Load a sentence-transformers model by id or local path."""
    from sentence_transformers import SentenceTransformer

    try:
        model = SentenceTransformer(model_ref, device=device)
        probe = getattr(model, "get_embedding_dimension", None)
        dimension = int(probe() if probe else model.get_sentence_embedding_dimension())
    except Exception as exc:
        raise EncoderLoadError(f"cannot load encoder {model_ref!r}: {exc}") from exc
    if dimension <= 0:
        raise EncoderLoadError(f"encoder {model_ref!r} reports invalid dimension")
    return Encoder(model=model, model_id=model_ref, dimension=dimension)


def bundled_paraphrases() -> list[dict]:
    data = resources.files("embed_service.data").joinpath("paraphrases.json")
    return json.loads(data.read_text("utf-8"))


def _test_vocab() -> list[str]:
    words: set[str] = set()
    for pair in bundled_paraphrases():
        for text in (pair["a"], pair["b"]):
            words.update(token.strip(string.punctuation).lower() for token in text.split())
    words.discard("")
    chars = list("abcdefghijklmnopqrstuvwxyzäöüß0123456789")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab += sorted(words)
    vocab += chars + [f"##{c}" for c in chars]
    return vocab


def build_test_model(directory, hidden: int = 64, layers: int = 1, seed: int = 0) -> Path:
    """Create a miniature local encoder; returns the loadable model path."""
    import torch
    from sentence_transformers import SentenceTransformer
    from transformers import BertConfig, BertModel, BertTokenizer

    try:  # module path renamed in newer sentence-transformers releases
        from sentence_transformers.sentence_transformer import modules as models
    except ImportError:
        from sentence_transformers import models

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    vocab = _test_vocab()
    vocab_path = directory / "vocab.txt"
    vocab_path.write_text("\n".join(vocab), encoding="utf-8")
    tokenizer = BertTokenizer(str(vocab_path), do_lower_case=True)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden,
        num_hidden_layers=layers,
        num_attention_heads=2,
        intermediate_size=hidden * 2,
        max_position_embeddings=64,
    )
    torch.manual_seed(seed)
    backbone = BertModel(config)
    hf_dir = directory / "hf"
    backbone.save_pretrained(hf_dir)
    tokenizer.save_pretrained(hf_dir)

    model = SentenceTransformer(
        modules=[
            models.Transformer(str(hf_dir), max_seq_length=64),
            models.Pooling(hidden, pooling_mode="mean"),
            models.Normalize(),
        ],
        device="cpu",
    )
    model_dir = directory / "model"
    model.save(str(model_dir))
    return model_dir
