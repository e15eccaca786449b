"""Command-line entry points: input validation, output verification,
corpus indexing/retrieval, and the interactive review loop.

Exit codes: 0 clean/pass, 1 internal error, 2 blocked, 3 discrepancies,
4 warnings only.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from .coverage import edit_distance
from .embed import configure_provider
from .errors import VeritabError
from .extract import ExtractionConfig
from .pipeline import (
    AuditLog,
    JobOptions,
    VerificationJob,
    run_verification,
)
from .retrieve import (
    CorpusIndex,
    QuerySchema,
    decompose_query,
    default_schema,
    index_corpus,
    narrow,
    rank,
)
from .rulekit import lint_ruleset, load_ruleset
from .tableaux import run_validation

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BLOCKED = 2
EXIT_DISCREPANCIES = 3
EXIT_WARNINGS = 4

_STATUS_EXIT = {
    "clean": EXIT_OK,
    "blocked": EXIT_BLOCKED,
    "discrepancies": EXIT_DISCREPANCIES,
    "warnings": EXIT_WARNINGS,
}


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _read_text(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write_report(report: dict, path) -> None:
    blob = json.dumps(report, indent=2, ensure_ascii=False, sort_keys=True)
    if path:
        Path(path).write_text(blob + "\n", encoding="utf-8")
    else:
        print(blob)


def _derive_status(validation_status: str, flag_count: int, warning_count: int) -> str:
    if validation_status == "blocked":
        return "blocked"
    if flag_count > 0:
        return "discrepancies"
    if warning_count > 0 or validation_status == "pass_with_warnings":
        return "warnings"
    return "clean"


def _job_id(*parts: str) -> str:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()
    return f"job-{digest[:12]}"


def _embedder_spec(args) -> str:
    return os.environ.get("VERITAB_EMBEDDER") or args.embedder


def cmd_validate(args) -> int:
    rs = load_ruleset(args.ruleset)
    if args.profile and rs.profile != args.profile:
        print(
            f"error: ruleset profile {rs.profile!r} does not match requested "
            f"{args.profile!r}",
            file=sys.stderr,
        )
        return EXIT_ERROR
    errors = [d for d in lint_ruleset(rs) if d.severity == "error"]
    if errors:
        for d in errors:
            print(f"error: {d.location}: {d.message}", file=sys.stderr)
        return EXIT_ERROR
    doc = _read_json(args.input)
    started = time.perf_counter()
    outcome = run_validation(rs, doc)
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    report = {
        "schema_version": SCHEMA_VERSION,
        "job_id": _job_id("validate", str(args.ruleset), str(args.input)),
        "status": {"pass": "clean", "pass_with_warnings": "warnings", "blocked": "blocked"}[
            outcome.status
        ],
        "validation": outcome.to_dict(),
        "coverage": None,
        "timing": {"validation_ms": round(elapsed_ms, 3), "verification_ms": 0.0},
        "provider": None,
    }
    if args.report:
        _write_report(report, args.report)
    for f in outcome.feedback:
        print(f"{f.severity}: {f.condition}: {f.message}")
    print(f"validation: {outcome.status}")
    return {"pass": EXIT_OK, "blocked": EXIT_BLOCKED, "pass_with_warnings": EXIT_WARNINGS}[
        outcome.status
    ]


def cmd_verify(args) -> int:
    input_doc = _read_json(args.input)
    output_text = _read_text(args.output)
    provider = configure_provider(_embedder_spec(args))
    extraction_cfg = ExtractionConfig.load(args.extraction) if args.extraction else None
    job = VerificationJob(
        job_id=_job_id("verify", str(args.input), str(args.output)),
        input_doc=input_doc,
        output_text=output_text,
        ruleset=args.ruleset,
        grade_ruleset=args.grades,
        weights=args.weights,
        provider=provider,
        extraction_cfg=extraction_cfg,
        options=JobOptions(min_grade=args.min_grade, audit_path=args.audit),
    )
    result = run_verification(job)

    flag_count = len(result.coverage.flags) if result.coverage else 0
    warning_count = len(result.warnings)
    status = _derive_status(result.validation.status, flag_count, warning_count)
    body = result.to_dict(include_content=args.include_spans)
    report = {
        "schema_version": SCHEMA_VERSION,
        "job_id": result.job_id,
        "status": status,
        "validation": body["validation"],
        "coverage": body["coverage"],
        "timing": {
            "validation_ms": round(result.timings_ms.get("validation", 0.0), 3),
            "verification_ms": round(result.timings_ms.get("verification", 0.0), 3),
        },
        "provider": body["provider"],
    }
    _write_report(report, args.report)
    return _STATUS_EXIT[status]


def _apply_edits(text: str, edits: list[tuple[tuple[int, int], str]]) -> str:
    for (start, end), replacement in sorted(edits, key=lambda e: -e[0][0]):
        text = text[:start] + replacement + text[end:]
    return text


def cmd_review(args) -> int:
    report = _read_json(args.report)
    output_text = _read_text(args.output)
    coverage = report.get("coverage") or {}
    all_suggestions = coverage.get("suggestions", [])
    # redacted reports carry suggestions without span/replacement data
    if all_suggestions and not any("span" in s for s in all_suggestions):
        print("error: report lacks span data; re-run verify with --include-spans",
              file=sys.stderr)
        return EXIT_ERROR
    suggestions = [s for s in all_suggestions if s.get("span")]
    for s in suggestions:
        start, end = s["span"]
        if not (0 <= start <= end <= len(output_text)):
            print(f"error: suggestion span {s['span']} out of range", file=sys.stderr)
            return EXIT_ERROR

    audit = AuditLog(args.audit)
    edits: list[tuple[tuple[int, int], str]] = []
    for s in suggestions:
        start, end = s["span"]
        current = output_text[start:end]
        replacement = s.get("replacement")
        if replacement is None:
            continue
        if args.accept_all_safe:
            decision = "accept" if edit_distance(current, replacement) == 1 else "skip"
        else:
            prompt = (
                f"{s['kind']}: replace {current!r} with {replacement!r}? "
                "[a]ccept / [r]eject / [e]dit: "
            )
            try:
                answer = input(prompt).strip().lower()
            except EOFError:
                answer = "r"
            if answer.startswith("a"):
                decision = "accept"
            elif answer.startswith("e"):
                replacement = input("replacement text: ")
                decision = "accept"
            else:
                decision = "reject"
        if decision == "accept":
            edits.append(((start, end), replacement))
        audit.write("review_decision", report=str(args.report), kind=s["kind"],
                    decision=decision)

    corrected = _apply_edits(output_text, edits)
    out_path = args.out or f"{args.output}.corrected"
    Path(out_path).write_text(corrected, encoding="utf-8")
    print(f"applied {len(edits)} of {len(suggestions)} suggestions -> {out_path}")
    return EXIT_OK


def _load_corpus_docs(corpus_dir) -> list[dict]:
    corpus = Path(corpus_dir)
    if not corpus.is_dir():
        raise VeritabError(f"corpus directory {corpus_dir!r} not found")
    docs: list[dict] = []
    for path in sorted(corpus.glob("*.jsonl")):
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                docs.append(json.loads(line))
    for path in sorted(corpus.glob("*.json")):
        payload = json.loads(path.read_text(encoding="utf-8"))
        docs.extend(payload if isinstance(payload, list) else [payload])
    return docs


def cmd_index(args) -> int:
    provider = configure_provider(_embedder_spec(args))
    docs = _load_corpus_docs(args.corpus)
    idx = index_corpus(
        docs, provider, max_chunk_tokens=args.max_chunk_tokens, persist_dir=args.out
    )
    print(f"indexed {len(idx.chunks)} chunks from {len(docs)} docs -> {args.out}")
    return EXIT_OK


def cmd_retrieve(args) -> int:
    idx = CorpusIndex.load(args.index)
    provider = configure_provider(_embedder_spec(args))
    if provider.model_id != idx.model_id:
        print(
            f"error: index built with {idx.model_id!r} but embedder is "
            f"{provider.model_id!r}",
            file=sys.stderr,
        )
        return EXIT_ERROR
    schema = QuerySchema.load(args.schema) if args.schema else default_schema()
    sq = decompose_query(args.query, schema)
    candidates = narrow(idx, sq)
    context = rank(candidates, args.query, provider, args.budget)
    print(
        json.dumps(
            {
                "query": {
                    "report_ids": [list(r) for r in sq.report_ids],
                    "section_types": list(sq.section_types),
                    "terms": [
                        {"term": t.term, "association": t.schema_association,
                         "confidence": t.confidence}
                        for t in sq.terms
                    ],
                    "free_text": sq.free_text,
                },
                "context": [r.to_dict() for r in context],
            },
            indent=2,
            ensure_ascii=False,
        )
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veritab",
        description="Tableaux-gated input validation and output verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="gate an input document through the ruleset")
    p.add_argument("--ruleset", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--profile")
    p.add_argument("--report")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("verify", help="audit generated output against its input")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--ruleset", required=True)
    p.add_argument("--grades")
    p.add_argument("--weights")
    p.add_argument("--extraction")
    p.add_argument("--embedder", default="fallback")
    p.add_argument("--min-grade", default="moderate",
                   choices=["exact", "strong", "moderate", "weak"])
    p.add_argument("--report")
    p.add_argument("--audit")
    p.add_argument("--include-spans", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("review", help="apply reviewed corrections to a new file")
    p.add_argument("--report", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--out")
    p.add_argument("--audit")
    p.add_argument("--accept-all-safe", action="store_true")
    p.set_defaults(func=cmd_review)

    p = sub.add_parser("index", help="build a retrieval index from a corpus directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embedder", default="fallback")
    p.add_argument("--max-chunk-tokens", type=int, default=256)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("retrieve", help="query an index with hybrid narrowing")
    p.add_argument("--index", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--schema")
    p.add_argument("--embedder", default="fallback")
    p.set_defaults(func=cmd_retrieve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (VeritabError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
