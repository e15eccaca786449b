"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class VeritabError(Exception):
    """Base class for all engine errors."""


class FormulaError(VeritabError):
    """Syntax or arity error in a set-formula string."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class RulesetError(VeritabError):
    """Schema violation, bad reference or cycle in a ruleset document."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class EvaluationError(VeritabError):
    """A condition predicate or formula could not be evaluated."""

    def __init__(self, message: str, condition_id: str = ""):
        super().__init__(message)
        self.condition_id = condition_id


class NormalizationError(VeritabError):
    """Entity canonical form is invalid (e.g. impossible calendar date)."""


class ProviderError(VeritabError):
    """Transient embedding-provider failure (timeout, unreachable service)."""


class ProtocolError(VeritabError):
    """Embedding service violated the wire protocol (bad handshake/shape)."""


class CorpusError(VeritabError):
    """Invalid corpus document or unreadable/missing index files."""
