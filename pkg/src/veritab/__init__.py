"""Verification engine for generated documents: tableaux-gated input
validation, type-aware entity auditing against source material, and
hybrid symbolic+embedding retrieval."""

from .coverage import (
    CoverageReport,
    MatchRecord,
    Suggestion,
    coverage_scores,
    match_entities,
    suggest_corrections,
)
from .embed import EmbeddingCache, FallbackEmbedder, ServiceEmbedder, configure_provider
from .errors import (
    CorpusError,
    EvaluationError,
    FormulaError,
    NormalizationError,
    ProtocolError,
    ProviderError,
    RulesetError,
    VeritabError,
)
from .extract import (
    Entity,
    EntitySet,
    ExtractionConfig,
    build_entity_set,
    extract_entities,
    extract_key_phrases,
    normalize_variants,
    segment_statements,
)
from .formula import SetFormula, parse_formula, pretty_print
from .pipeline import (
    JobOptions,
    PipelineResult,
    VerificationJob,
    dedup_statements,
    plan_pool,
    run_verification,
    supervise,
)
from .retrieve import (
    CorpusIndex,
    StructuredQuery,
    decompose_query,
    index_corpus,
    narrow,
    rank,
)
from .rulekit import Ruleset, lint_ruleset, load_ruleset, parse_ruleset
from .simmetrics import (
    GradeRuleset,
    MatchGrade,
    SimilarityVector,
    classify,
    combine,
    default_grade_ruleset,
    embedding_similarities,
    euclidean_similarity,
    manhattan_similarity,
    overlap_scores,
    tfidf_similarity,
)
from .tableaux import ConditionUniverse, ValidationOutcome, run_validation, solve

__version__ = "0.1.0"
