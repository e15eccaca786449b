"""Set-theoretic tableaux evaluation of rulesets over an input document.

Runs in three phases: programmatic core-condition evaluation, tableaux
solving of higher-order conditions over the condition-set universe
(prerequisite-ordered, repeated to a fixpoint), and trigger-action firing.
The mandatory-consistency gate (C_req ∩ C_eval) ⊆ C_pos decides blocking.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import EvaluationError
from .formula import And, Atom, Not, Or, SetFormula, SetRef, Subset, pretty_print
from .rulekit import AggregateSpec, CoreCondition, HigherOrderCondition, Ruleset

InputDocument = dict


@dataclass(frozen=True)
class ConditionUniverse:
    C: frozenset[str]
    C_all: frozenset[str]
    C_sat: frozenset[str]
    C_req: frozenset[str]
    C_eval: frozenset[str]
    C_pos: frozenset[str]

    @property
    def C_neg(self) -> frozenset[str]:
        return self.C_all - self.C_pos

    def validate(self) -> None:
        assert self.C <= self.C_all
        assert self.C_pos <= self.C_all
        assert self.C_req <= self.C
        assert self.C_eval <= self.C_all
        assert self.C_sat <= self.C_all

    def named_set(self, name: str) -> frozenset[str]:
        if name == "C_neg":
            return self.C_neg
        return getattr(self, name)


@dataclass(frozen=True)
class TraceRecord:
    fragment: str
    rule: str  # alpha | beta | complement | subset | atom | set | aggregate
    nonempty: bool


BranchTrace = tuple[TraceRecord, ...]


@dataclass(frozen=True)
class Feedback:
    condition: str
    severity: str  # "block" | "warn" | "info"
    message: str


@dataclass(frozen=True)
class ValidationOutcome:
    status: str  # "pass" | "pass_with_warnings" | "blocked"
    gate_result: bool
    satisfied: frozenset[str]
    feedback: tuple[Feedback, ...]
    traces: dict[str, BranchTrace] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "gate_result": self.gate_result,
            "satisfied": sorted(self.satisfied),
            "feedback": [
                {"condition": f.condition, "severity": f.severity, "message": f.message}
                for f in self.feedback
            ],
            "traces": {
                cid: [
                    {"fragment": r.fragment, "rule": r.rule, "nonempty": r.nonempty}
                    for r in trace
                ]
                for cid, trace in sorted(self.traces.items())
            },
        }


def _text_field(doc: InputDocument, name: str, cond_id: str):
    value = doc.get(name)
    if value is None:
        return None
    if not isinstance(value, str):
        raise EvaluationError(
            f"condition {cond_id!r}: field {name!r} is not text", condition_id=cond_id
        )
    return value


def _eval_predicate(cond: CoreCondition, doc: InputDocument) -> bool:
    args = cond.args
    if cond.predicate == "field_present":
        return args["field"] in doc and doc[args["field"]] is not None
    if cond.predicate == "nonempty":
        value = _text_field(doc, args["field"], cond.id)
        return value is not None and value.strip() != ""
    if cond.predicate == "min_length":
        value = _text_field(doc, args["field"], cond.id)
        return value is not None and len(value) >= args["n"]
    if cond.predicate == "field_matches":
        value = _text_field(doc, args["field"], cond.id)
        return value is not None and re.search(args["pattern"], value) is not None
    if cond.predicate == "keyword_present":
        if "field" in args:
            texts = [_text_field(doc, args["field"], cond.id) or ""]
        else:
            texts = [v for v in doc.values() if isinstance(v, str)]
        for kw in args["keywords"]:
            pattern = re.compile(rf"\b{re.escape(kw)}\b", re.IGNORECASE)
            if any(pattern.search(t) for t in texts):
                return True
        return False
    raise EvaluationError(f"unknown predicate {cond.predicate!r}", condition_id=cond.id)


def eval_core(rs: Ruleset, doc: InputDocument) -> frozenset[str]:
    """Phase 1: return the satisfied subset of the core conditions."""
    return frozenset(c.id for c in rs.core if _eval_predicate(c, doc))


def build_positive_set(c_sat: frozenset[str], rs: Ruleset) -> frozenset[str]:
    """Conditions whose observed satisfaction matches their expected polarity."""
    return frozenset(
        cid for cid in rs.all_ids if (cid in c_sat) == rs.expected_of(cid)
    )


@dataclass(frozen=True)
class SolveResult:
    denotation: frozenset[str]
    trace: BranchTrace

    @property
    def satisfied(self) -> bool:
        return bool(self.denotation)


def solve(f: SetFormula, u: ConditionUniverse) -> SolveResult:
    """Evaluate a set formula over the universe; satisfied iff nonempty."""
    records: list[TraceRecord] = []
    denotation = _solve(f, u, records)
    return SolveResult(denotation=denotation, trace=tuple(records))


def _solve(f: SetFormula, u: ConditionUniverse, records: list[TraceRecord]) -> frozenset[str]:
    if isinstance(f, Atom):
        if f.name not in u.C_all:
            raise EvaluationError(f"unresolved atom {f.name!r}")
        denotation = u.C_all if f.name in u.C_sat else frozenset()
        records.append(TraceRecord(f.name, "atom", bool(denotation)))
        return denotation
    if isinstance(f, SetRef):
        denotation = u.named_set(f.name)
        records.append(TraceRecord(f.name, "set", bool(denotation)))
        return denotation
    if isinstance(f, And):
        # α-expansion: both obligations hold together, denotation intersects
        marker = len(records)
        records.append(TraceRecord(pretty_print(f), "alpha", False))
        denotation = _solve(f.left, u, records) & _solve(f.right, u, records)
        records[marker] = TraceRecord(pretty_print(f), "alpha", bool(denotation))
        return denotation
    if isinstance(f, Or):
        # β-expansion: one branch per disjunct, denotations union
        marker = len(records)
        records.append(TraceRecord(pretty_print(f), "beta", False))
        denotation = _solve(f.left, u, records) | _solve(f.right, u, records)
        records[marker] = TraceRecord(pretty_print(f), "beta", bool(denotation))
        return denotation
    if isinstance(f, Not):
        marker = len(records)
        records.append(TraceRecord(pretty_print(f), "complement", False))
        denotation = u.C_all - _solve(f.child, u, records)
        records[marker] = TraceRecord(pretty_print(f), "complement", bool(denotation))
        return denotation
    if isinstance(f, Subset):
        marker = len(records)
        records.append(TraceRecord(pretty_print(f), "subset", False))
        holds = _solve(f.left, u, records) <= _solve(f.right, u, records)
        denotation = u.C_all if holds else frozenset()
        records[marker] = TraceRecord(pretty_print(f), "subset", bool(denotation))
        return denotation
    raise EvaluationError(f"unknown formula node {type(f).__name__}")


def _aggregate_fragment(spec: AggregateSpec, count: int) -> str:
    return f"count({pretty_print(spec.over)}) = {count} {spec.comparator} {spec.tau}"


def _solve_aggregate(spec: AggregateSpec, u: ConditionUniverse) -> tuple[bool, BranchTrace, int]:
    records: list[TraceRecord] = []
    denotation = _solve(spec.over, u, records)
    count = len(denotation)
    if spec.comparator == "<=":
        holds = count <= spec.tau
    elif spec.comparator == ">=":
        holds = count >= spec.tau
    else:
        holds = count == spec.tau
    records.append(TraceRecord(_aggregate_fragment(spec, count), "aggregate", holds))
    return holds, tuple(records), count


def _universe(rs: Ruleset, c_sat: frozenset[str], c_eval: frozenset[str]) -> ConditionUniverse:
    c_all = rs.all_ids
    return ConditionUniverse(
        C=rs.core_ids,
        C_all=frozenset(c_all),
        C_sat=c_sat,
        C_req=frozenset(c.id for c in rs.core if c.required),
        C_eval=c_eval,
        C_pos=build_positive_set(c_sat, rs),
    )


def run_validation(rs: Ruleset, doc: InputDocument) -> ValidationOutcome:
    """Execute all three phases and apply the mandatory-consistency gate."""
    c_sat = eval_core(rs, doc)
    c_eval = frozenset(rs.core_ids)  # all core conditions evaluated in Phase 1
    feedback: list[Feedback] = []
    traces: dict[str, BranchTrace] = {}

    # Phase 2: prerequisite-ordered evaluation, repeated until fixpoint
    pending = list(rs.higher)
    while pending:
        progressed = False
        remaining: list[HigherOrderCondition] = []
        for h in pending:
            if not set(h.prerequisites) <= c_eval:
                remaining.append(h)
                continue
            u = _universe(rs, c_sat, c_eval)
            if isinstance(h.formula, AggregateSpec):
                satisfied, trace, count = _solve_aggregate(h.formula, u)
                if satisfied != h.expected:
                    # aggregate polarity mismatch warns instead of blocking
                    feedback.append(
                        Feedback(
                            h.id,
                            "warn",
                            f"aggregate condition {h.id!r} not in expected state: "
                            f"{_aggregate_fragment(h.formula, count)} is "
                            f"{str(satisfied).lower()}, expected {str(h.expected).lower()}",
                        )
                    )
            else:
                result = solve(h.formula, u)
                satisfied, trace = result.satisfied, result.trace
            traces[h.id] = trace
            if satisfied:
                c_sat = c_sat | {h.id}
            c_eval = c_eval | {h.id}
            progressed = True
        pending = remaining
        if not progressed:
            break
    for h in pending:
        feedback.append(
            Feedback(
                h.id,
                "info",
                f"condition {h.id!r} not evaluated: prerequisites "
                f"{sorted(set(h.prerequisites) - c_eval)} never became evaluable",
            )
        )
    unevaluated = {h.id for h in pending}

    # Phase 3: trigger actions on the final satisfaction state
    blocked = False
    for a in rs.actions:
        if a.trigger in unevaluated:
            feedback.append(
                Feedback(
                    a.trigger,
                    "info",
                    f"action on {a.trigger!r} skipped: condition never evaluated",
                )
            )
            continue
        if (a.trigger in c_sat) == (a.event == "sat"):
            feedback.append(Feedback(a.trigger, a.kind, a.message))
            if a.kind == "block":
                blocked = True

    u = _universe(rs, c_sat, c_eval)
    gate_result = (u.C_req & u.C_eval) <= u.C_pos
    if not gate_result:
        for cid in sorted((u.C_req & u.C_eval) - u.C_pos):
            feedback.append(
                Feedback(
                    cid,
                    "block",
                    f"required condition {cid!r} is not in its expected state",
                )
            )

    if blocked or not gate_result:
        status = "blocked"
    elif any(f.severity == "warn" for f in feedback):
        status = "pass_with_warnings"
    else:
        status = "pass"
    return ValidationOutcome(
        status=status,
        gate_result=gate_result,
        satisfied=c_sat,
        feedback=tuple(feedback),
        traces=traces,
    )
