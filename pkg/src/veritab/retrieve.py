"""Hybrid-narrowing retrieval: symbolic query decomposition and scope
filtering over a chunked, section-typed corpus, then exact embedding-cosine
ranking under a token budget.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .coverage import edit_distance
from .embed import EmbeddingProvider, embed_batch
from .errors import CorpusError
from .extract import ExtractionConfig, segment_statements
from .tokens import tokenize

SECTION_TYPES = ("narrative", "technical", "legal", "evidence")

DEFAULT_MAX_CHUNK_TOKENS = 256


@dataclass
class Chunk:
    id: str
    report_id: str
    section_type: str
    text: str
    token_count: int
    vector: Optional[np.ndarray] = None

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "report_id": self.report_id,
            "section_type": self.section_type,
            "text": self.text,
            "token_count": self.token_count,
        }


@dataclass(frozen=True)
class TermHit:
    term: str
    schema_association: str
    confidence: str  # "direct" | "tentative"


@dataclass(frozen=True)
class StructuredQuery:
    report_ids: tuple[tuple[str, str], ...]  # (report id, confidence)
    section_types: tuple[str, ...]
    terms: tuple[TermHit, ...]
    free_text: str

    @property
    def direct_report_ids(self) -> tuple[str, ...]:
        return tuple(rid for rid, conf in self.report_ids if conf == "direct")

    def has_constraints(self) -> bool:
        return bool(self.report_ids or self.section_types or self.terms)


@dataclass(frozen=True)
class QuerySchema:
    case_id_patterns: tuple[str, ...]
    terms: tuple[tuple[str, str], ...]  # (literal term, association)
    section_keywords: dict

    @classmethod
    def from_dict(cls, data: dict) -> "QuerySchema":
        return cls(
            case_id_patterns=tuple(data.get("case_id_patterns", ())),
            terms=tuple(
                (t["pattern"], t["association"]) for t in data.get("terms", ())
            ),
            section_keywords={
                section: tuple(words)
                for section, words in data.get("section_keywords", {}).items()
            },
        )

    @classmethod
    def load(cls, path) -> "QuerySchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_schema() -> QuerySchema:
    data = resources.files("veritab.data").joinpath("retrieval_schema_default.json")
    return QuerySchema.from_dict(json.loads(data.read_text("utf-8")))


def decompose_query(q: str, schema: Optional[QuerySchema] = None) -> StructuredQuery:
    """Extract report ids, section types, and schema terms from a query."""
    schema = schema or default_schema()
    matched_spans: list[tuple[int, int]] = []

    report_ids: list[tuple[str, str]] = []
    for pattern in schema.case_id_patterns:
        for m in re.finditer(pattern, q):
            report_ids.append((m.group(0), "direct"))
            matched_spans.append(m.span())

    section_types: list[str] = []
    for section, keywords in schema.section_keywords.items():
        for kw in keywords:
            m = re.search(rf"\b{re.escape(kw)}\b", q, re.IGNORECASE)
            if m:
                if section not in section_types:
                    section_types.append(section)
                matched_spans.append(m.span())

    terms: list[TermHit] = []
    query_words = tokenize(q)
    for literal, association in schema.terms:
        m = re.search(rf"\b{re.escape(literal)}\b", q, re.IGNORECASE)
        if m:
            terms.append(TermHit(literal, association, "direct"))
            matched_spans.append(m.span())
            continue
        if len(literal) >= 4:
            for word in query_words:
                if edit_distance(word, literal.lower()) == 1:
                    terms.append(TermHit(literal, association, "tentative"))
                    break

    residual = list(q)
    for start, end in matched_spans:
        for k in range(start, end):
            residual[k] = " "
    free_text = " ".join("".join(residual).split())
    if not (report_ids or section_types or terms):
        free_text = q
    return StructuredQuery(
        report_ids=tuple(report_ids),
        section_types=tuple(section_types),
        terms=tuple(terms),
        free_text=free_text,
    )


@dataclass
class CorpusIndex:
    chunks: list[Chunk]
    term_map: dict[str, frozenset[int]]
    dimension: int
    model_id: str
    tokenizer_id: str = "whitespace"

    @classmethod
    def build(cls, chunks: list[Chunk], dimension: int, model_id: str) -> "CorpusIndex":
        term_map: dict[str, set[int]] = {}
        for pos, chunk in enumerate(chunks):
            for token in set(tokenize(chunk.text)):
                term_map.setdefault(token, set()).add(pos)
        return cls(
            chunks=chunks,
            term_map={t: frozenset(v) for t, v in term_map.items()},
            dimension=dimension,
            model_id=model_id,
        )

    def term_hit_positions(self, term: str) -> frozenset[int]:
        tokens = tokenize(term)
        if not tokens:
            return frozenset()
        hits = self.term_map.get(tokens[0], frozenset())
        for token in tokens[1:]:
            hits = hits & self.term_map.get(token, frozenset())
        return hits

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "chunks.jsonl", "w", encoding="utf-8") as fh:
            for chunk in self.chunks:
                fh.write(json.dumps(chunk.to_record(), ensure_ascii=False) + "\n")
        matrix = np.zeros((len(self.chunks), self.dimension), dtype="<f4")
        for i, chunk in enumerate(self.chunks):
            matrix[i] = chunk.vector
        with open(directory / "vectors.f32", "wb") as fh:
            fh.write(matrix.tobytes(order="C"))
        meta = {
            "schema_version": 1,
            "dimension": self.dimension,
            "model_id": self.model_id,
            "tokenizer": self.tokenizer_id,
            "chunk_count": len(self.chunks),
        }
        with open(directory / "meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, ensure_ascii=False, indent=2)

    @classmethod
    def load(cls, directory) -> "CorpusIndex":
        directory = Path(directory)
        for name in ("chunks.jsonl", "vectors.f32", "meta.json"):
            if not (directory / name).exists():
                raise CorpusError(f"missing index file {name!r} in {directory}")
        with open(directory / "meta.json", encoding="utf-8") as fh:
            meta = json.load(fh)
        dimension = int(meta["dimension"])
        chunks: list[Chunk] = []
        with open(directory / "chunks.jsonl", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                chunks.append(Chunk(**record))
        raw = (directory / "vectors.f32").read_bytes()
        matrix = np.frombuffer(raw, dtype="<f4").reshape(len(chunks), dimension)
        for i, chunk in enumerate(chunks):
            chunk.vector = matrix[i].astype(np.float64)
        return cls.build(chunks, dimension=dimension, model_id=str(meta["model_id"]))


def index_corpus(
    docs: Sequence[dict],
    provider: EmbeddingProvider,
    max_chunk_tokens: int = DEFAULT_MAX_CHUNK_TOKENS,
    extraction_cfg: Optional[ExtractionConfig] = None,
    persist_dir=None,
) -> CorpusIndex:
    """Chunk docs on statement boundaries under the token cap and embed them;
    optionally persist the built index to `persist_dir`."""
    chunks: list[Chunk] = []
    counters: dict[tuple[str, str], int] = {}
    for doc in docs:
        report_id = str(doc["report_id"])
        section_type = str(doc["section_type"])
        if section_type not in SECTION_TYPES:
            raise CorpusError(f"unknown section_type {section_type!r} for {report_id!r}")
        text = str(doc.get("text", ""))
        statements = segment_statements(text, extraction_cfg)
        group: list = []
        group_tokens = 0

        def flush():
            nonlocal group, group_tokens
            if not group:
                return
            start, end = group[0].span[0], group[-1].span[1]
            chunk_text = text[start:end]
            key = (report_id, section_type)
            counters[key] = counters.get(key, 0) + 1
            chunks.append(
                Chunk(
                    id=f"{report_id}:{section_type}:{counters[key]:04d}",
                    report_id=report_id,
                    section_type=section_type,
                    text=chunk_text,
                    token_count=len(chunk_text.split()),
                )
            )
            group = []
            group_tokens = 0

        for statement in statements:
            tokens = len(statement.surface.split())
            if group and group_tokens + tokens > max_chunk_tokens:
                flush()
            group.append(statement)
            group_tokens += tokens
        flush()

    for start in range(0, len(chunks), max(1, provider.batch_limit)):
        batch = chunks[start : start + provider.batch_limit]
        vectors = embed_batch(provider, [c.text for c in batch])
        for chunk, vector in zip(batch, vectors):
            chunk.vector = vector
    index = CorpusIndex.build(
        chunks, dimension=provider.dimension, model_id=provider.model_id
    )
    if persist_dir is not None:
        index.save(persist_dir)
    return index


def narrow(idx: CorpusIndex, sq: StructuredQuery) -> list[Chunk]:
    """Symbolic scope filtering; tentative-only constraints widen with priority."""
    positions = list(range(len(idx.chunks)))
    direct_ids = set(sq.direct_report_ids)
    if direct_ids:
        positions = [p for p in positions if idx.chunks[p].report_id in direct_ids]
    if sq.section_types:
        wanted = set(sq.section_types)
        positions = [p for p in positions if idx.chunks[p].section_type in wanted]

    # term hits (and tentative report ids) reorder with priority, never exclude
    priority: set[int] = set()
    for hit in sq.terms:
        priority |= idx.term_hit_positions(hit.term)
    tentative_ids = {rid for rid, conf in sq.report_ids if conf == "tentative"}
    if tentative_ids:
        priority |= {
            p for p in range(len(idx.chunks)) if idx.chunks[p].report_id in tentative_ids
        }
    if priority:
        positions = [p for p in positions if p in priority] + [
            p for p in positions if p not in priority
        ]
    return [idx.chunks[p] for p in positions]


@dataclass(frozen=True)
class RankedChunk:
    chunk: Chunk
    similarity: float
    cumulative_tokens: int

    def to_dict(self, include_text: bool = True) -> dict:
        record = {
            "id": self.chunk.id,
            "report_id": self.chunk.report_id,
            "section_type": self.chunk.section_type,
            "similarity": round(self.similarity, 6),
            "token_count": self.chunk.token_count,
            "cumulative_tokens": self.cumulative_tokens,
        }
        if include_text:
            record["text"] = self.chunk.text
        return record


def rank(
    candidates: Sequence[Chunk],
    q: str,
    provider: EmbeddingProvider,
    budget: int,
) -> list[RankedChunk]:
    """Order candidates by exact cosine to the query; greedy fit under budget."""
    if budget < 0:
        raise ValueError("budget must be >= 0")
    if not candidates or budget == 0:
        return []
    query_vector = embed_batch(provider, [q])[0]
    # one stacked product: bit-stable per row regardless of candidate count
    sims = np.array([c.vector for c in candidates]) @ query_vector
    scored = sorted(
        (-float(sims[k]), candidates[k].id, candidates[k]) for k in range(len(candidates))
    )
    context: list[RankedChunk] = []
    used = 0
    for negative_sim, _, chunk in scored:
        if used + chunk.token_count > budget:
            continue
        used += chunk.token_count
        context.append(RankedChunk(chunk=chunk, similarity=-negative_sim, cumulative_tokens=used))
    return context
