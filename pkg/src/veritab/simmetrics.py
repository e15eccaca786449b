"""Five-metric statement similarity: TF-IDF cosine, domain embedding cosine,
normalized Euclidean similarity, token overlap and keyword overlap, with
weighted aggregation, dispersion-based confidence, and graded classification.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .embed import EmbeddingProvider
from .errors import RulesetError
from .tokens import CorpusStats, tokenize

METRICS = ("tfidf", "domain", "euclidean", "token_overlap", "keyword_overlap")
GRADES = ("exact", "strong", "moderate", "weak", "no_match")

EUCLIDEAN_D_MAX = 2.0  # conservative bound for unit-normalized embeddings
MANHATTAN_D_MAX = 10.0

_METRIC_ALIASES = {
    "overlap": "token_overlap",
    "keyword": "keyword_overlap",
    "score": "combined",
}

_DEFAULT_STOPWORDS: Optional[frozenset] = None


def _default_stopwords() -> frozenset:
    global _DEFAULT_STOPWORDS
    if _DEFAULT_STOPWORDS is None:
        data = resources.files("veritab.data").joinpath("extraction_default.json")
        _DEFAULT_STOPWORDS = frozenset(
            w.lower() for w in json.loads(data.read_text("utf-8"))["stopwords"]
        )
    return _DEFAULT_STOPWORDS


@dataclass(frozen=True)
class SimilarityVector:
    tfidf: float
    domain: float
    euclidean: float
    token_overlap: float
    keyword_overlap: float
    combined: float
    confidence: float

    def metric(self, name: str) -> float:
        return getattr(self, _METRIC_ALIASES.get(name, name))

    def metric_values(self) -> tuple[float, ...]:
        return (self.tfidf, self.domain, self.euclidean, self.token_overlap, self.keyword_overlap)

    def to_dict(self) -> dict:
        return {
            "tfidf": round(self.tfidf, 4),
            "domain": round(self.domain, 4),
            "euclidean": round(self.euclidean, 4),
            "token_overlap": round(self.token_overlap, 4),
            "keyword_overlap": round(self.keyword_overlap, 4),
            "combined": round(self.combined, 4),
            "confidence": round(self.confidence, 4),
        }


@dataclass(frozen=True)
class MatchGrade:
    grade: str
    satisfied_condition: Optional[str] = None


@dataclass(frozen=True)
class Clause:
    metric: str
    op: str
    threshold: float

    def holds(self, v: SimilarityVector) -> bool:
        value = v.metric(self.metric)
        if self.op == ">=":
            return value >= self.threshold
        if self.op == "<=":
            return value <= self.threshold
        if self.op == ">":
            return value > self.threshold
        if self.op == "<":
            return value < self.threshold
        return value == self.threshold

    def describe(self) -> str:
        return f"{self.metric} {self.op} {self.threshold:g}"


@dataclass(frozen=True)
class GradeRule:
    grade: str
    score_min: float
    conf_min: float
    key_conditions: tuple[tuple[Clause, ...], ...]


@dataclass(frozen=True)
class GradeRuleset:
    rules: tuple[GradeRule, ...]

    @classmethod
    def from_dict(cls, data: dict) -> "GradeRuleset":
        rules = []
        for i, row in enumerate(data.get("grades", [])):
            loc = f"grades[{i}]"
            grade = row.get("grade")
            if grade not in GRADES:
                raise RulesetError(f"unknown grade {grade!r}", loc)
            conditions = tuple(
                tuple(
                    Clause(
                        metric=str(c["metric"]),
                        op=str(c.get("op", ">=")),
                        threshold=float(c["threshold"]),
                    )
                    for c in conj
                )
                for conj in row.get("key_conditions", [])
            )
            rules.append(
                GradeRule(
                    grade=grade,
                    score_min=float(row.get("score_min", 0)),
                    conf_min=float(row.get("conf_min", 0)),
                    key_conditions=conditions,
                )
            )
        rs = cls(rules=tuple(rules))
        rs._validate()
        return rs

    def _validate(self) -> None:
        order = [r.grade for r in self.rules]
        expected = [g for g in GRADES if g in order]
        if order != expected:
            raise RulesetError(f"grades out of order: {order}")
        mins = [r.score_min for r in self.rules]
        if any(a < b for a, b in zip(mins, mins[1:])):
            raise RulesetError("score_min must be nonincreasing down the grade order")

    @classmethod
    def load(cls, path) -> "GradeRuleset":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_grade_ruleset() -> GradeRuleset:
    data = resources.files("veritab.data").joinpath("grades_default.json").read_text("utf-8")
    return GradeRuleset.from_dict(json.loads(data))


def load_weights(path=None) -> dict[str, float]:
    if path is None:
        data = resources.files("veritab.data").joinpath("weights_default.json").read_text("utf-8")
        return {str(k): float(v) for k, v in json.loads(data).items()}
    with open(path, encoding="utf-8") as fh:
        return {str(k): float(v) for k, v in json.load(fh).items()}


# --- metrics -------------------------------------------------------------------


def _clamp(value: float) -> float:
    if value >= 100.0 - 1e-9:  # snap float-rounding residue so m(a,a) == 100
        return 100.0
    return max(0.0, min(100.0, value))


def tfidf_similarity(a: str, b: str, stats: CorpusStats) -> float:
    """Cosine similarity of smoothed TF-IDF vectors, as a percentage."""
    va = stats.tfidf_vector(a)
    vb = stats.tfidf_vector(b)
    if not va or not vb:
        return 0.0
    dot = sum(w * vb[t] for t, w in va.items() if t in vb)
    norm_a = math.sqrt(sum(w * w for w in va.values()))
    norm_b = math.sqrt(sum(w * w for w in vb.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return _clamp(dot / (norm_a * norm_b) * 100.0)


def euclidean_similarity(distance: float) -> float:
    """Bounded normalization of an L2 distance, d_max = 2.0."""
    return (1.0 - min(distance / EUCLIDEAN_D_MAX, 1.0)) * 100.0


def manhattan_similarity(distance: float) -> float:
    """Bounded normalization of an L1 distance, d_max = 10.0."""
    return (1.0 - min(distance / MANHATTAN_D_MAX, 1.0)) * 100.0


def vector_similarities(e_a: np.ndarray, e_b: np.ndarray) -> dict[str, float]:
    """Domain cosine and normalized Euclidean similarity for unit vectors."""
    if np.array_equal(e_a, e_b):
        return {"domain": 100.0, "euclidean": 100.0}
    cos = float(np.dot(e_a, e_b))
    distance = float(np.linalg.norm(e_a - e_b))
    return {
        "domain": _clamp(max(0.0, cos) * 100.0),
        "euclidean": euclidean_similarity(distance),
    }


def embedding_similarities(a: str, b: str, provider: EmbeddingProvider) -> dict[str, float]:
    vectors = provider.embed_batch([a, b])
    return vector_similarities(vectors[0], vectors[1])


def overlap_scores(a: str, b: str, stopwords=None) -> dict[str, float]:
    """Jaccard token overlap and stopword-filtered keyword overlap."""
    stopwords = _default_stopwords() if stopwords is None else stopwords
    tokens_a, tokens_b = set(tokenize(a)), set(tokenize(b))

    def jaccard(x: set, y: set) -> float:
        union = x | y
        if not union:
            return 0.0
        return len(x & y) / len(union) * 100.0

    keywords_a = {t for t in tokens_a if t not in stopwords}
    keywords_b = {t for t in tokens_b if t not in stopwords}
    return {
        "token_overlap": jaccard(tokens_a, tokens_b),
        "keyword_overlap": jaccard(keywords_a, keywords_b),
    }


def combine(
    metrics: Sequence[float], weights: Optional[Sequence[float]] = None
) -> tuple[float, float]:
    """Weighted mean of the five metrics plus dispersion-based confidence."""
    values = [float(m) for m in metrics]
    if len(values) != len(METRICS):
        raise ValueError(f"expected {len(METRICS)} metric scores, got {len(values)}")
    if weights is None:
        weights = [1.0] * len(values)
    weights = [float(w) for w in weights]
    if len(weights) != len(values) or any(w < 0 for w in weights) or sum(weights) <= 0:
        raise ValueError("weights must be nonnegative with a positive sum")
    combined = sum(w * v for w, v in zip(weights, values)) / sum(weights)
    mean = sum(values) / len(values)
    sigma = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
    confidence = 100.0 * max(0.0, 1.0 - sigma / 50.0)
    return combined, confidence


def score_pair(
    a: str,
    b: str,
    stats: CorpusStats,
    e_a: np.ndarray,
    e_b: np.ndarray,
    stopwords=None,
    weights: Optional[Sequence[float]] = None,
) -> SimilarityVector:
    """Assemble the full similarity vector for a statement pair."""
    overlaps = overlap_scores(a, b, stopwords)
    vector_sims = vector_similarities(e_a, e_b)
    scores = {
        "tfidf": tfidf_similarity(a, b, stats),
        "domain": vector_sims["domain"],
        "euclidean": vector_sims["euclidean"],
        "token_overlap": overlaps["token_overlap"],
        "keyword_overlap": overlaps["keyword_overlap"],
    }
    combined, confidence = combine([scores[m] for m in METRICS], weights)
    return SimilarityVector(combined=combined, confidence=confidence, **scores)


def classify(v: SimilarityVector, gr: GradeRuleset) -> MatchGrade:
    """Apply the grade matrix top-down; the first row that fires wins."""
    for rule in gr.rules:
        if rule.grade == "no_match":
            continue
        if v.combined < rule.score_min or v.confidence < rule.conf_min:
            continue
        if not rule.key_conditions:
            return MatchGrade(rule.grade, "score and confidence minimums")
        for conjunction in rule.key_conditions:
            if all(clause.holds(v) for clause in conjunction):
                return MatchGrade(
                    rule.grade, " and ".join(c.describe() for c in conjunction)
                )
    return MatchGrade("no_match", None)


def grade_rank(grade: str) -> int:
    """Higher is better; no_match is 0."""
    return len(GRADES) - 1 - GRADES.index(grade)


def meets_minimum(grade: str, minimum: str) -> bool:
    return grade_rank(grade) >= grade_rank(minimum)
