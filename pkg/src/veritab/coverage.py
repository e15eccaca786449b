"""Bidirectional entity comparison between source and generated output.

Structured kinds (dates, numerics, identifiers) match symbolically on
canonical/variant equality; statements and phrases match by best graded
similarity. Records aggregate into coverage percentages, the type-weighted
content score, discrepancy flags, and correction suggestions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .embed import EmbeddingCache, EmbeddingProvider
from .errors import ProviderError
from .extract import Entity, EntitySet, KINDS, STRUCTURED_KINDS
from .simmetrics import (
    GradeRuleset,
    MatchGrade,
    SimilarityVector,
    classify,
    meets_minimum,
    score_pair,
)
from .tokens import CorpusStats

GRADED_KINDS = ("phrase", "statement")

# score table: (input index, output index) -> vector, or None when unverifiable
ScoreTable = dict[tuple[int, int], Optional[SimilarityVector]]
PairScorer = Callable[[str, list[str], list[str]], ScoreTable]


@dataclass(frozen=True)
class MatchRecord:
    kind: str
    method: str  # "symbolic" | "graded"
    verdict: str  # "matched" | "missing" | "hallucinated" | "unverified"
    input_entity: Optional[Entity] = None
    output_entity: Optional[Entity] = None
    grade: Optional[MatchGrade] = None
    similarity: Optional[SimilarityVector] = None

    def sort_key(self) -> tuple:
        return (
            self.kind,
            self.input_entity.canonical if self.input_entity else "",
            self.output_entity.canonical if self.output_entity else "",
            self.verdict,
        )

    def to_dict(self, include_content: bool = False) -> dict:
        record: dict = {"kind": self.kind, "method": self.method, "verdict": self.verdict}
        if self.grade is not None:
            record["grade"] = self.grade.grade
            if self.grade.satisfied_condition:
                record["grade_condition"] = self.grade.satisfied_condition
        if self.similarity is not None:
            record["similarity"] = self.similarity.to_dict()
        if include_content:
            if self.input_entity is not None:
                record["input"] = {
                    "canonical": self.input_entity.canonical,
                    "surface": self.input_entity.surface,
                    "span": list(self.input_entity.span),
                }
            if self.output_entity is not None:
                record["output"] = {
                    "canonical": self.output_entity.canonical,
                    "surface": self.output_entity.surface,
                    "span": list(self.output_entity.span),
                }
        return record


@dataclass(frozen=True)
class Suggestion:
    span: Optional[tuple[int, int]]
    replacement: Optional[str]
    reason: str
    kind: str

    def to_dict(self, include_content: bool = False) -> dict:
        record: dict = {"kind": self.kind, "reason": self.reason}
        if include_content:
            record["span"] = list(self.span) if self.span else None
            record["replacement"] = self.replacement
        return record


@dataclass
class CoverageReport:
    input_coverage: float
    output_coverage: float
    weighted_score: float
    kind_counts: dict[str, tuple[int, int]]  # kind -> (verified c_t, total n_t)
    records: list[MatchRecord]
    flags: list[MatchRecord]
    suggestions: list[Suggestion] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self, include_content: bool = False) -> dict:
        return {
            "input_coverage": round(self.input_coverage, 4),
            "output_coverage": round(self.output_coverage, 4),
            "weighted_score": round(self.weighted_score, 6),
            "kind_counts": {
                kind: {"verified": c, "total": n}
                for kind, (c, n) in sorted(self.kind_counts.items())
            },
            "flags": [r.to_dict(include_content) for r in self.flags],
            "suggestions": [s.to_dict(include_content) for s in self.suggestions],
            "warnings": list(self.warnings),
        }


class SequentialScorer:
    """Scores all statement pairs in-process; one embed per distinct text."""

    def __init__(
        self,
        provider: EmbeddingProvider,
        stats: Optional[CorpusStats] = None,
        stopwords=None,
        weights=None,
    ):
        self.provider = provider
        self.stats = stats
        self.stopwords = stopwords
        self.weights = weights
        self.cache = EmbeddingCache()

    def _embed(self, text: str):
        return self.cache.get_or_compute(text, lambda t: self.provider.embed_batch([t])[0])

    def score_pairs(self, kind: str, a_texts: list[str], b_texts: list[str]) -> ScoreTable:
        stats = self.stats or CorpusStats.from_texts(a_texts + b_texts)
        vectors: dict[str, Optional[object]] = {}
        for text in dict.fromkeys(a_texts + b_texts):
            try:
                vectors[text] = self._embed(text)
            except ProviderError:
                vectors[text] = None
        table: ScoreTable = {}
        for i, a in enumerate(a_texts):
            for j, b in enumerate(b_texts):
                if vectors[a] is None or vectors[b] is None:
                    table[(i, j)] = None
                else:
                    table[(i, j)] = score_pair(
                        a, b, stats, vectors[a], vectors[b], self.stopwords, self.weights
                    )
        return table


def match_structured(
    kind: str, inputs: tuple[Entity, ...], outputs: tuple[Entity, ...]
) -> list[MatchRecord]:
    records = []
    used: set[int] = set()
    for inp in inputs:
        match_idx = None
        for j, out in enumerate(outputs):
            if j in used:
                continue
            if inp.canonical == out.canonical or inp.variants & out.variants:
                match_idx = j
                break
        if match_idx is None:
            records.append(MatchRecord(kind=kind, method="symbolic", verdict="missing",
                                       input_entity=inp))
        else:
            used.add(match_idx)
            records.append(
                MatchRecord(kind=kind, method="symbolic", verdict="matched",
                            input_entity=inp, output_entity=outputs[match_idx])
            )
    for j, out in enumerate(outputs):
        if j not in used:
            records.append(MatchRecord(kind=kind, method="symbolic", verdict="hallucinated",
                                       output_entity=out))
    return records


def _match_graded(
    kind: str,
    inputs: tuple[Entity, ...],
    outputs: tuple[Entity, ...],
    gr: GradeRuleset,
    scorer: PairScorer,
    min_grade: str,
) -> list[MatchRecord]:
    if not inputs and not outputs:
        return []
    a_texts = [e.canonical for e in inputs]
    b_texts = [e.canonical for e in outputs]
    table = scorer(kind, a_texts, b_texts) if a_texts and b_texts else {}
    return graded_records_from_table(kind, inputs, outputs, gr, table, min_grade)


def graded_records_from_table(
    kind: str,
    inputs: tuple[Entity, ...],
    outputs: tuple[Entity, ...],
    gr: GradeRuleset,
    table: ScoreTable,
    min_grade: str,
) -> list[MatchRecord]:
    """Assemble graded records from a precomputed pair-score table."""
    graded: dict[tuple[int, int], tuple[SimilarityVector, MatchGrade]] = {}
    failed_inputs: set[int] = set()
    failed_outputs: set[int] = set()
    for (i, j), vector in table.items():
        if vector is None:
            failed_inputs.add(i)
            failed_outputs.add(j)
            continue
        graded[(i, j)] = (vector, classify(vector, gr))

    candidates = sorted(
        (
            (-vector.combined, i, j)
            for (i, j), (vector, grade) in graded.items()
            if meets_minimum(grade.grade, min_grade)
        ),
    )
    records = []
    used_inputs: set[int] = set()
    used_outputs: set[int] = set()
    for _, i, j in candidates:
        if i in used_inputs or j in used_outputs:
            continue
        used_inputs.add(i)
        used_outputs.add(j)
        vector, grade = graded[(i, j)]
        records.append(
            MatchRecord(kind=kind, method="graded", verdict="matched",
                        input_entity=inputs[i], output_entity=outputs[j],
                        grade=grade, similarity=vector)
        )

    def best_for_output(j: int):
        scored = [(vector.combined, i) for (i, jj), (vector, _) in graded.items() if jj == j]
        if not scored:
            return None, None
        _, i = max(scored)
        return graded[(i, j)]

    for i, inp in enumerate(inputs):
        if i in used_inputs:
            continue
        verdict = "unverified" if i in failed_inputs else "missing"
        records.append(MatchRecord(kind=kind, method="graded", verdict=verdict,
                                   input_entity=inp))
    for j, out in enumerate(outputs):
        if j in used_outputs:
            continue
        if j in failed_outputs:
            records.append(MatchRecord(kind=kind, method="graded", verdict="unverified",
                                       output_entity=out))
            continue
        vector, grade = best_for_output(j)
        records.append(
            MatchRecord(kind=kind, method="graded", verdict="hallucinated",
                        output_entity=out, grade=grade, similarity=vector)
        )
    return records


def match_entities(
    inputs: EntitySet,
    outputs: EntitySet,
    gr: GradeRuleset,
    provider: Optional[EmbeddingProvider] = None,
    scorer: Optional[PairScorer] = None,
    min_grade: str = "moderate",
    stats: Optional[CorpusStats] = None,
) -> list[MatchRecord]:
    """Match every input and output entity into exactly one record."""
    if scorer is None:
        if provider is None:
            raise ValueError("match_entities needs a provider or a scorer")
        scorer = SequentialScorer(provider, stats).score_pairs
    records: list[MatchRecord] = []
    for kind in KINDS:
        ins = inputs.of_kind(kind)
        outs = outputs.of_kind(kind)
        if kind in STRUCTURED_KINDS:
            records.extend(match_structured(kind, ins, outs))
        else:
            records.extend(_match_graded(kind, ins, outs, gr, scorer, min_grade))
    records.sort(key=MatchRecord.sort_key)
    return records


def coverage_scores(
    records: list[MatchRecord],
    weights: dict[str, float],
    suggestions: Optional[list[Suggestion]] = None,
    warnings: Optional[list[str]] = None,
) -> CoverageReport:
    """Aggregate records into coverage percentages and the weighted score."""
    total_inputs = sum(1 for r in records if r.input_entity is not None)
    matched_inputs = sum(
        1 for r in records if r.input_entity is not None and r.verdict == "matched"
    )
    total_outputs = sum(1 for r in records if r.output_entity is not None)
    matched_outputs = sum(
        1 for r in records if r.output_entity is not None and r.verdict == "matched"
    )
    kind_counts: dict[str, tuple[int, int]] = {}
    for kind in KINDS:
        kind_records = [r for r in records if r.kind == kind]
        if kind_records:
            kind_counts[kind] = (
                sum(1 for r in kind_records if r.verdict == "matched"),
                len(kind_records),
            )
    numerator = sum(weights.get(kind, 0.2) * c for kind, (c, _) in kind_counts.items())
    denominator = sum(weights.get(kind, 0.2) * n for kind, (_, n) in kind_counts.items())
    return CoverageReport(
        input_coverage=(matched_inputs / total_inputs * 100.0) if total_inputs else 100.0,
        output_coverage=(matched_outputs / total_outputs * 100.0) if total_outputs else 100.0,
        weighted_score=(numerator / denominator) if denominator > 0 else 1.0,
        kind_counts=kind_counts,
        records=list(records),
        flags=[r for r in records if r.verdict != "matched"],
        suggestions=suggestions or [],
        warnings=warnings or [],
    )


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance (insert/delete/substitute, unit costs)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def suggest_corrections(
    records: list[MatchRecord],
    inputs: EntitySet,
    near_miss_distance: int = 2,
) -> list[Suggestion]:
    """Replacement suggestions for near-miss hallucinations, insertion
    prompts for missing entities. Suggestions are never auto-applied."""
    suggestions = []
    for record in records:
        if record.verdict == "hallucinated" and record.kind in STRUCTURED_KINDS:
            out = record.output_entity
            best: Optional[tuple[int, Entity]] = None
            for candidate in inputs.of_kind(record.kind):
                distance = edit_distance(out.canonical, candidate.canonical)
                if distance <= near_miss_distance and (best is None or distance < best[0]):
                    best = (distance, candidate)
            if best is not None:
                distance, candidate = best
                suggestions.append(
                    Suggestion(
                        span=out.span,
                        replacement=candidate.surface,
                        reason=f"{record.kind} mismatch: source value within "
                        f"edit distance {distance}",
                        kind=record.kind,
                    )
                )
        elif record.verdict == "missing":
            inp = record.input_entity
            suggestions.append(
                Suggestion(
                    span=None,
                    replacement=inp.surface,
                    reason=f"{record.kind} from the source is absent in the output",
                    kind=record.kind,
                )
            )
    return suggestions
