"""Unicode word tokenization and corpus-level document frequencies."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

_WORD_RE = re.compile(r"\w+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return [m.group(0).lower() for m in _WORD_RE.finditer(text)]


def token_spans(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(0).lower(), m.start(), m.end()) for m in _WORD_RE.finditer(text)]


@dataclass(frozen=True)
class CorpusStats:
    """Document counts used for smoothed inverse document frequencies."""

    doc_count: int
    df: Mapping[str, int]

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "CorpusStats":
        df: Counter = Counter()
        n = 0
        for text in texts:
            n += 1
            df.update(set(tokenize(text)))
        return cls(doc_count=n, df=dict(df))

    def idf(self, token: str) -> float:
        # smoothed: ln((1+N)/(1+df)) + 1, never zero or negative
        return math.log((1 + self.doc_count) / (1 + self.df.get(token, 0))) + 1.0

    def tfidf_vector(self, text: str) -> dict[str, float]:
        counts = Counter(tokenize(text))
        return {tok: tf * self.idf(tok) for tok, tf in counts.items()}
