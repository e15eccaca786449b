"""Deterministic typed-entity extraction with multi-variant normalization.

Structured kinds (dates, numerics, identifiers) are pattern-based with
calendar/shape validation; statements come from terminal-punctuation
segmentation with an abbreviation guard; key phrases are top-k n-grams
ranked by summed token TF-IDF.
"""

from __future__ import annotations

import datetime
import json
import re
from dataclasses import dataclass, replace
from importlib import resources
from typing import Iterable, Optional

from .errors import NormalizationError
from .tokens import CorpusStats, token_spans

KINDS = ("date", "numeric", "identifier", "phrase", "statement")
STRUCTURED_KINDS = ("date", "numeric", "identifier")

_TERMINALS = ".!?"


@dataclass(frozen=True)
class Entity:
    kind: str
    canonical: str
    variants: frozenset[str]
    span: tuple[int, int]
    source: str  # "input" | "output"
    surface: str

    def to_dict(self, include_content: bool = True) -> dict:
        record = {"kind": self.kind, "source": self.source}
        if include_content:
            record["canonical"] = self.canonical
            record["span"] = list(self.span)
        return record


@dataclass(frozen=True)
class ExtractionConfig:
    identifier_patterns: tuple[str, ...] = ()
    units: tuple[str, ...] = ()
    stopwords: frozenset[str] = frozenset()
    abbreviations: tuple[str, ...] = ()
    phrase_top_k: int = 5
    decimal_locales: tuple[str, ...] = ("point", "comma")

    @classmethod
    def from_dict(cls, data: dict) -> "ExtractionConfig":
        return cls(
            identifier_patterns=tuple(data.get("identifier_patterns", ())),
            units=tuple(data.get("units", ())),
            stopwords=frozenset(w.lower() for w in data.get("stopwords", ())),
            abbreviations=tuple(data.get("abbreviations", ())),
            phrase_top_k=int(data.get("phrase_top_k", 5)),
            decimal_locales=tuple(data.get("decimal_locales", ("point", "comma"))),
        )

    @classmethod
    def load(cls, path) -> "ExtractionConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_config() -> ExtractionConfig:
    data = resources.files("veritab.data").joinpath("extraction_default.json").read_text("utf-8")
    return ExtractionConfig.from_dict(json.loads(data))


@dataclass
class EntitySet:
    by_kind: dict[str, tuple[Entity, ...]]

    @classmethod
    def from_entities(cls, entities: Iterable[Entity]) -> "EntitySet":
        groups: dict[str, list[Entity]] = {}
        seen: set[tuple[str, str]] = set()
        for e in entities:
            key = (e.kind, e.canonical)
            if key in seen:
                continue
            seen.add(key)
            groups.setdefault(e.kind, []).append(e)
        return cls(by_kind={k: tuple(v) for k, v in groups.items()})

    def of_kind(self, kind: str) -> tuple[Entity, ...]:
        return self.by_kind.get(kind, ())

    def counts(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.by_kind.items()}

    def all_entities(self) -> list[Entity]:
        return [e for k in sorted(self.by_kind) for e in self.by_kind[k]]


# --- structured-kind patterns -------------------------------------------------

_DATE_ISO = re.compile(r"\b(\d{4})-(\d{2})-(\d{2})\b")
_DATE_DOTTED = re.compile(r"\b(\d{1,2})\.(\d{1,2})\.(\d{4})\b")
_DATE_SLASHED = re.compile(r"\b(\d{1,2})/(\d{1,2})/(\d{4})\b")
_DEFAULT_IDENTIFIER = re.compile(r"\b[A-Za-z]{2,4}-?[A-Za-z0-9]{3,}\b")

_KIND_PRIORITY = {"date": 0, "identifier": 1, "numeric": 2}


def _numeric_pattern(cfg: ExtractionConfig) -> re.Pattern:
    seps = ""
    if "point" in cfg.decimal_locales:
        seps += "."
    if "comma" in cfg.decimal_locales:
        seps += ","
    decimal = rf"(?:[{re.escape(seps)}]\d+)?" if seps else ""
    unit = ""
    if cfg.units:
        alts = "|".join(re.escape(u) for u in sorted(cfg.units, key=len, reverse=True))
        unit = rf"(?:[  ]?(?:{alts})(?!\w))?"
    return re.compile(rf"(?<![\w.,-])[+-]?\d+{decimal}{unit}")


def _valid_date(year: int, month: int, day: int) -> Optional[datetime.date]:
    try:
        return datetime.date(year, month, day)
    except ValueError:
        return None


def _date_variants(day: datetime.date) -> frozenset[str]:
    return frozenset(
        {
            day.isoformat(),
            f"{day.day:02d}.{day.month:02d}.{day.year:04d}",
            f"{day.day:02d}/{day.month:02d}/{day.year:04d}",
        }
    )


def _numeric_parts(surface: str, cfg: ExtractionConfig) -> tuple[str, str]:
    """Split a numeric surface form into (number, unit); unit may be empty."""
    unit = ""
    body = surface
    if cfg.units:
        for u in sorted(cfg.units, key=len, reverse=True):
            if body.endswith(u):
                unit = u
                body = body[: -len(u)].rstrip("  ")
                break
    return body, unit


def _numeric_variants(surface: str, cfg: ExtractionConfig) -> tuple[str, frozenset[str]]:
    body, unit = _numeric_parts(surface, cfg)
    number = body.lstrip("+")
    point_form = number.replace(",", ".")
    comma_form = number.replace(".", ",")
    suffix = f" {unit}" if unit else ""
    canonical = f"{point_form}{suffix}"
    variants = {canonical, f"{comma_form}{suffix}", surface}
    return canonical, frozenset(variants)


def _identifier_variants(surface: str) -> tuple[str, frozenset[str]]:
    canonical = surface.upper().replace("-", "")
    variants = {canonical, surface.upper(), surface, surface.lower()}
    return canonical, frozenset(variants)


def _date_candidates(text: str):
    for pattern, order in ((_DATE_ISO, "ymd"), (_DATE_DOTTED, "dmy"), (_DATE_SLASHED, "dmy")):
        for m in pattern.finditer(text):
            a, b, c = (int(g) for g in m.groups())
            day = _valid_date(a, b, c) if order == "ymd" else _valid_date(c, b, a)
            if day is None:
                continue
            yield m.start(), m.end(), day.isoformat(), _date_variants(day)


def extract_entities(
    text: str, cfg: Optional[ExtractionConfig] = None, source: str = "input"
) -> EntitySet:
    """Extract structured entities (dates, numerics, identifiers) with spans.

    Overlapping matches are resolved longest-match-first, then leftmost,
    then by kind priority (date, identifier, numeric).
    """
    cfg = cfg or default_config()
    candidates: list[tuple[int, int, int, str, str, frozenset[str]]] = []

    for start, end, canonical, variants in _date_candidates(text):
        candidates.append((end - start, start, _KIND_PRIORITY["date"], "date", canonical, variants))

    identifier_patterns = [_DEFAULT_IDENTIFIER]
    identifier_patterns += [re.compile(p) for p in cfg.identifier_patterns]
    for i, pattern in enumerate(identifier_patterns):
        for m in pattern.finditer(text):
            surface = m.group(0)
            if i == 0 and not any(ch.isdigit() for ch in surface):
                continue  # stock pattern would otherwise flag ordinary words
            canonical, variants = _identifier_variants(surface)
            candidates.append(
                (m.end() - m.start(), m.start(), _KIND_PRIORITY["identifier"], "identifier",
                 canonical, variants)
            )

    for m in _numeric_pattern(cfg).finditer(text):
        canonical, variants = _numeric_variants(m.group(0), cfg)
        candidates.append(
            (m.end() - m.start(), m.start(), _KIND_PRIORITY["numeric"], "numeric",
             canonical, variants)
        )

    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    taken: list[tuple[int, int]] = []
    entities: list[Entity] = []
    for length, start, _, kind, canonical, variants in candidates:
        end = start + length
        if any(s < end and start < e for s, e in taken):
            continue
        taken.append((start, end))
        entities.append(
            Entity(
                kind=kind,
                canonical=canonical,
                variants=variants,
                span=(start, end),
                source=source,
                surface=text[start:end],
            )
        )
    entities.sort(key=lambda e: e.span)
    return EntitySet.from_entities(entities)


def normalize_variants(e: Entity) -> Entity:
    """Return the entity with its full equivalence-variant set populated."""
    if e.kind == "date":
        m = re.fullmatch(r"(\d{4})-(\d{2})-(\d{2})", e.canonical)
        day = _valid_date(int(m.group(1)), int(m.group(2)), int(m.group(3))) if m else None
        if day is None:
            raise NormalizationError(f"invalid calendar date {e.canonical!r}")
        return replace(e, variants=_date_variants(day) | {e.surface})
    if e.kind == "numeric":
        canonical, variants = _numeric_variants(e.surface or e.canonical, default_config())
        return replace(e, canonical=canonical, variants=variants)
    if e.kind == "identifier":
        canonical, variants = _identifier_variants(e.surface or e.canonical)
        return replace(e, canonical=canonical, variants=variants)
    return replace(e, variants=frozenset({e.canonical, e.surface}))


def _abbreviation_guarded(text: str, i: int, abbreviations: tuple[str, ...]) -> bool:
    for abbr in abbreviations:
        for k, ch in enumerate(abbr):
            if ch != ".":
                continue
            start = i - k
            if start >= 0 and text[start : start + len(abbr)] == abbr:
                return True
    return False


def segment_statements(
    text: str, cfg: Optional[ExtractionConfig] = None, source: str = "input"
) -> list[Entity]:
    """Split text into statement entities on terminal punctuation."""
    cfg = cfg or default_config()
    bounds: list[tuple[int, int]] = []
    n = len(text)
    start = 0
    i = 0
    while i < n:
        if text[i] in _TERMINALS:
            j = i
            while j + 1 < n and text[j + 1] in _TERMINALS:
                j += 1
            at_break = j + 1 >= n or text[j + 1].isspace()
            guarded = (
                text[i] == "." and i == j and _abbreviation_guarded(text, i, cfg.abbreviations)
            )
            if at_break and not guarded:
                bounds.append((start, j + 1))
                start = j + 1
            i = j + 1
        else:
            i += 1
    if start < n:
        bounds.append((start, n))

    statements = []
    for s, e in bounds:
        while s < e and text[s].isspace():
            s += 1
        while e > s and text[e - 1].isspace():
            e -= 1
        if s == e:
            continue
        surface = text[s:e]
        statements.append(
            Entity(
                kind="statement",
                canonical=" ".join(surface.split()),
                variants=frozenset({" ".join(surface.split()), surface}),
                span=(s, e),
                source=source,
                surface=surface,
            )
        )
    return statements


def extract_key_phrases(
    text: str,
    cfg: Optional[ExtractionConfig] = None,
    corpus_stats: Optional[CorpusStats] = None,
    source: str = "input",
) -> list[Entity]:
    """Top-k multi-word phrases ranked by summed token TF-IDF."""
    cfg = cfg or default_config()
    if cfg.phrase_top_k <= 0:
        return []
    if corpus_stats is None:
        corpus_stats = CorpusStats.from_texts([text])
    spans = token_spans(text)
    tf: dict[str, int] = {}
    for tok, _, _ in spans:
        tf[tok] = tf.get(tok, 0) + 1

    def usable(tok: str) -> bool:
        return tok not in cfg.stopwords and any(ch.isalpha() for ch in tok)

    # phrase score depends only on its tokens, so the first occurrence wins
    best: dict[str, tuple[float, int, int]] = {}
    for size in (2, 3):
        for k in range(len(spans) - size + 1):
            window = spans[k : k + size]
            if not all(usable(tok) for tok, _, _ in window):
                continue
            # tokens must be adjacent: only spaces/hyphens between them
            contiguous = all(
                set(text[window[w][2] : window[w + 1][1]]) <= {" ", "-"}
                for w in range(size - 1)
            )
            if not contiguous:
                continue
            phrase = " ".join(tok for tok, _, _ in window)
            if phrase in best:
                continue
            score = sum(tf[tok] * corpus_stats.idf(tok) for tok, _, _ in window)
            best[phrase] = (score, window[0][1], window[-1][2])

    ranked = sorted(
        ((score, s, e, phrase) for phrase, (score, s, e) in best.items()),
        key=lambda r: (-r[0], r[1], r[3]),
    )
    entities = []
    for score, s, e, phrase in ranked[: cfg.phrase_top_k]:
        surface = text[s:e]
        entities.append(
            Entity(
                kind="phrase",
                canonical=phrase,
                variants=frozenset({phrase, surface}),
                span=(s, e),
                source=source,
                surface=surface,
            )
        )
    return entities


def build_entity_set(
    text: str,
    cfg: Optional[ExtractionConfig] = None,
    corpus_stats: Optional[CorpusStats] = None,
    source: str = "input",
) -> EntitySet:
    """Full typed extraction: structured kinds, statements, and key phrases."""
    cfg = cfg or default_config()
    structured = extract_entities(text, cfg, source=source)
    entities = [e for kind in STRUCTURED_KINDS for e in structured.of_kind(kind)]
    entities += segment_statements(text, cfg, source=source)
    entities += extract_key_phrases(text, cfg, corpus_stats, source=source)
    return EntitySet.from_entities(entities)
