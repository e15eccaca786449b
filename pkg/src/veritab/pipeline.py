"""Fault-isolated concurrent orchestration of a verification job.

Phase A gates the input through tableaux validation; Phase B extracts
entities from both documents, dispatches symbolic matching and statement
scoring to a supervised worker pool, and merges results deterministically.
Failed tasks are retried on transient errors and flagged unverified on
exhaustion; symbolic results never depend on neural-path failures.
"""

from __future__ import annotations

import datetime
import json
import math
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Union

from .coverage import (
    CoverageReport,
    MatchRecord,
    ScoreTable,
    coverage_scores,
    graded_records_from_table,
    match_structured,
    suggest_corrections,
)
from .embed import EmbeddingCache, EmbeddingProvider, configure_provider
from .errors import ProviderError
from .extract import (
    ExtractionConfig,
    STRUCTURED_KINDS,
    build_entity_set,
    default_config,
)
from .rulekit import Ruleset, load_ruleset, parse_ruleset
from .simmetrics import GradeRuleset, default_grade_ruleset, load_weights, score_pair
from .tableaux import ValidationOutcome, run_validation
from .tokens import CorpusStats

GRADED_KINDS = ("phrase", "statement")

FaultInjector = Callable[[str, int], Optional[Exception]]


@dataclass(frozen=True)
class PoolPlan:
    worker_count: int
    per_worker_budget: float
    total_budget: float


def plan_pool(total_budget: float, per_worker_budget: float, max_workers: int) -> PoolPlan:
    """Size the pool from abstract resource budgets, at least one worker."""
    if total_budget <= 0 or per_worker_budget <= 0:
        raise ValueError("budgets must be positive")
    worker_count = min(int(max_workers), math.floor(total_budget / per_worker_budget))
    return PoolPlan(
        worker_count=max(1, worker_count),
        per_worker_budget=per_worker_budget,
        total_budget=total_budget,
    )


@dataclass(frozen=True)
class DedupPlan:
    unique_texts: tuple[str, ...]
    pair_indexes: tuple[tuple[int, int], ...]

    def expand(self, values: list) -> list[tuple[Any, Any]]:
        return [(values[a], values[b]) for a, b in self.pair_indexes]


def dedup_statements(pairs: list[tuple[str, str]]) -> DedupPlan:
    """Collapse statement pairs onto distinct texts plus an expansion map."""
    positions: dict[str, int] = {}
    indexes = []
    for a, b in pairs:
        for text in (a, b):
            if text not in positions:
                positions[text] = len(positions)
        indexes.append((positions[a], positions[b]))
    return DedupPlan(unique_texts=tuple(positions), pair_indexes=tuple(indexes))


@dataclass
class TaskEnvelope:
    task_id: str
    payload: Any
    attempt: int = 1
    state: str = "pending"  # pending -> done | failed
    value: Any = None
    failure: Optional[Exception] = None

    def finish(self, value: Any) -> None:
        assert self.state == "pending"
        self.state = "done"
        self.value = value

    def fail(self, failure: Exception) -> None:
        assert self.state == "pending"
        self.state = "failed"
        self.failure = failure


TRANSIENT_FAILURES = (ProviderError, TimeoutError)


def supervise(task: TaskEnvelope, failure: Exception, max_retries: int = 1) -> str:
    """Disposition for a failed task: 'retry' on a fresh worker, or 'fail'."""
    if isinstance(failure, TRANSIENT_FAILURES) and task.attempt <= max_retries:
        return "retry"
    return "fail"


class AuditLog:
    """Append-only JSON-lines log of task events; never records content."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()

    def write(self, event: str, **fields) -> None:
        if self.path is None:
            return
        record = {
            "ts": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "event": event,
            **fields,
        }
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


class PoolRunner:
    """Executes task envelopes on a bounded pool with supervised retries."""

    def __init__(
        self,
        plan: PoolPlan,
        max_retries: int = 1,
        fault_injector: Optional[FaultInjector] = None,
        audit: Optional[AuditLog] = None,
        job_id: str = "",
    ):
        self.plan = plan
        self.max_retries = max_retries
        self.fault_injector = fault_injector
        self.audit = audit or AuditLog()
        self.job_id = job_id

    def run(self, tasks: list[TaskEnvelope], fn: Callable[[Any], Any]) -> dict[str, TaskEnvelope]:
        if not tasks:
            return {}

        def execute(task: TaskEnvelope):
            if self.fault_injector is not None:
                injected = self.fault_injector(task.task_id, task.attempt)
                if injected is not None:
                    raise injected
            return fn(task.payload)

        results: dict[str, TaskEnvelope] = {}
        with ThreadPoolExecutor(max_workers=self.plan.worker_count) as executor:
            in_flight = {}
            for task in tasks:
                self.audit.write("task_dispatched", job=self.job_id, task=task.task_id,
                                 attempt=task.attempt)
                in_flight[executor.submit(execute, task)] = task
            while in_flight:
                done, _ = wait(in_flight, return_when=FIRST_COMPLETED)
                for future in done:
                    task = in_flight.pop(future)
                    error = future.exception()
                    if error is None:
                        task.finish(future.result())
                        results[task.task_id] = task
                        self.audit.write("task_completed", job=self.job_id,
                                         task=task.task_id, attempt=task.attempt)
                        continue
                    if supervise(task, error, self.max_retries) == "retry":
                        retry = TaskEnvelope(
                            task_id=task.task_id, payload=task.payload,
                            attempt=task.attempt + 1,
                        )
                        self.audit.write("task_retried", job=self.job_id,
                                         task=task.task_id, attempt=retry.attempt)
                        in_flight[executor.submit(execute, retry)] = retry
                    else:
                        task.fail(error)
                        results[task.task_id] = task
                        self.audit.write("task_failed", job=self.job_id, task=task.task_id,
                                         attempt=task.attempt, reason=type(error).__name__)
        return results


@dataclass
class JobOptions:
    min_grade: str = "moderate"
    max_retries: int = 1
    max_workers: int = 8
    per_worker_budget: float = 200.0
    total_budget: float = 1600.0
    audit_path: Optional[str] = None
    fault_injector: Optional[FaultInjector] = None  # test/chaos hook


@dataclass
class VerificationJob:
    job_id: str
    input_doc: dict
    output_text: str
    ruleset: Union[Ruleset, dict, str, Path]
    grade_ruleset: Union[GradeRuleset, str, Path, None] = None
    weights: Union[dict, str, Path, None] = None
    provider: Union[EmbeddingProvider, str, dict, None] = "fallback"
    extraction_cfg: Union[ExtractionConfig, str, Path, None] = None
    options: JobOptions = field(default_factory=JobOptions)


@dataclass
class PipelineResult:
    job_id: str
    validation: ValidationOutcome
    coverage: Optional[CoverageReport]
    provider_kind: str
    provider_model: str
    warnings: list[str] = field(default_factory=list)
    # wall-clock phase timings; intentionally excluded from serialization so
    # reports stay byte-identical across runs and pool sizes
    timings_ms: dict = field(default_factory=dict)

    def to_dict(self, include_content: bool = False) -> dict:
        return {
            "job_id": self.job_id,
            "validation": self.validation.to_dict(),
            "coverage": self.coverage.to_dict(include_content) if self.coverage else None,
            "provider": {"kind": self.provider_kind, "model_id": self.provider_model},
            "warnings": list(self.warnings),
        }

    def canonical_json(self, include_content: bool = False) -> str:
        return json.dumps(
            self.to_dict(include_content), sort_keys=True, separators=(",", ":"),
            ensure_ascii=False,
        )


def _resolve_ruleset(ref) -> Ruleset:
    if isinstance(ref, Ruleset):
        return ref
    if isinstance(ref, dict):
        return parse_ruleset(ref)
    return load_ruleset(ref)


def _resolve_grades(ref) -> GradeRuleset:
    if ref is None:
        return default_grade_ruleset()
    if isinstance(ref, GradeRuleset):
        return ref
    return GradeRuleset.load(ref)


def _resolve_weights(ref) -> dict:
    if ref is None:
        return load_weights()
    if isinstance(ref, dict):
        return {str(k): float(v) for k, v in ref.items()}
    return load_weights(ref)


def _resolve_extraction(ref) -> ExtractionConfig:
    if ref is None:
        return default_config()
    if isinstance(ref, ExtractionConfig):
        return ref
    return ExtractionConfig.load(ref)


def _resolve_provider(ref) -> EmbeddingProvider:
    if hasattr(ref, "embed_batch"):
        return ref
    return configure_provider(ref)


def input_document_text(doc: dict) -> str:
    """Concatenated text fields of an input document, in field order."""
    return "\n".join(v for v in doc.values() if isinstance(v, str))


class PoolScorer:
    """Dispatches one scoring task per statement pair to the worker pool.

    Embeddings go through an exactly-once cache, so each distinct text hits
    the provider a single time regardless of how many pairs share it.
    """

    def __init__(
        self,
        provider: EmbeddingProvider,
        stats: CorpusStats,
        runner: PoolRunner,
        stopwords=None,
    ):
        self.provider = provider
        self.stats = stats
        self.runner = runner
        self.stopwords = stopwords
        self.cache = EmbeddingCache()
        self.failed_tasks = 0

    def _embed(self, text: str):
        return self.cache.get_or_compute(text, lambda t: self.provider.embed_batch([t])[0])

    def score_pairs(self, kind: str, a_texts: list[str], b_texts: list[str]) -> ScoreTable:
        tasks = [
            TaskEnvelope(task_id=f"{kind}:{i}:{j}", payload=(i, j))
            for i in range(len(a_texts))
            for j in range(len(b_texts))
        ]

        def score_one(payload):
            i, j = payload
            if not isinstance(i, int) or not isinstance(j, int):
                raise ValueError("malformed task payload")
            a, b = a_texts[i], b_texts[j]
            return score_pair(a, b, self.stats, self._embed(a), self._embed(b), self.stopwords)

        results = self.runner.run(tasks, score_one)
        table: ScoreTable = {}
        for i in range(len(a_texts)):
            for j in range(len(b_texts)):
                envelope = results[f"{kind}:{i}:{j}"]
                if envelope.state == "done":
                    table[(i, j)] = envelope.value
                else:
                    table[(i, j)] = None
                    self.failed_tasks += 1
        return table


def run_verification(job: VerificationJob) -> PipelineResult:
    """Validate the input, then audit the output against it."""
    rs = _resolve_ruleset(job.ruleset)
    grades = _resolve_grades(job.grade_ruleset)
    weights = _resolve_weights(job.weights)
    extraction_cfg = _resolve_extraction(job.extraction_cfg)
    provider = _resolve_provider(job.provider)
    audit = AuditLog(job.options.audit_path)
    audit.write("job_started", job=job.job_id)

    warnings = list(getattr(provider, "warnings", []))
    phase_start = time.perf_counter()
    validation = run_validation(rs, job.input_doc)
    validation_ms = (time.perf_counter() - phase_start) * 1000.0
    audit.write("validation_done", job=job.job_id, status=validation.status)
    if validation.status == "blocked":
        audit.write("job_done", job=job.job_id, status="blocked", scored_statements=0)
        return PipelineResult(
            job_id=job.job_id,
            validation=validation,
            coverage=None,
            provider_kind=provider.kind,
            provider_model=provider.model_id,
            warnings=warnings,
            timings_ms={"validation": validation_ms, "verification": 0.0},
        )

    phase_start = time.perf_counter()
    input_text = input_document_text(job.input_doc)
    stats = CorpusStats.from_texts([input_text, job.output_text])
    inputs = build_entity_set(input_text, extraction_cfg, stats, source="input")
    outputs = build_entity_set(job.output_text, extraction_cfg, stats, source="output")

    plan = plan_pool(
        job.options.total_budget, job.options.per_worker_budget, job.options.max_workers
    )
    runner = PoolRunner(
        plan,
        max_retries=job.options.max_retries,
        fault_injector=job.options.fault_injector,
        audit=audit,
        job_id=job.job_id,
    )
    scorer = PoolScorer(provider, stats, runner)

    records: list[MatchRecord] = []
    symbolic_task = TaskEnvelope(task_id="symbolic", payload=(inputs, outputs))

    def run_symbolic(payload):
        ins, outs = payload
        matched = []
        for kind in STRUCTURED_KINDS:
            matched.extend(match_structured(kind, ins.of_kind(kind), outs.of_kind(kind)))
        return matched

    symbolic_results = runner.run([symbolic_task], run_symbolic)
    records.extend(symbolic_results["symbolic"].value)

    for kind in GRADED_KINDS:
        ins, outs = inputs.of_kind(kind), outputs.of_kind(kind)
        if not ins and not outs:
            continue
        table: ScoreTable = {}
        if ins and outs:
            table = scorer.score_pairs(kind, [e.canonical for e in ins],
                                       [e.canonical for e in outs])
        records.extend(
            graded_records_from_table(kind, ins, outs, grades, table, job.options.min_grade)
        )

    records.sort(key=MatchRecord.sort_key)
    if scorer.failed_tasks:
        warnings.append(
            f"{scorer.failed_tasks} statement-pair scorings failed after retries; "
            "affected records are unverified"
        )
    suggestions = suggest_corrections(records, inputs)
    report = coverage_scores(records, weights, suggestions=suggestions, warnings=warnings)
    audit.write(
        "job_done",
        job=job.job_id,
        status=validation.status,
        records=len(records),
        flags=len(report.flags),
        unverified=sum(1 for r in records if r.verdict == "unverified"),
    )
    return PipelineResult(
        job_id=job.job_id,
        validation=validation,
        coverage=report,
        provider_kind=provider.kind,
        provider_model=provider.model_id,
        warnings=warnings,
        timings_ms={
            "validation": validation_ms,
            "verification": (time.perf_counter() - phase_start) * 1000.0,
        },
    )
