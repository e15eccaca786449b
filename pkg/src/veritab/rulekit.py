"""Declarative ruleset format: core conditions, higher-order conditions,
trigger actions, plus the parser and linter for the JSON document schema.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Union

from .errors import RulesetError
from .formula import (
    SetFormula,
    iter_atoms,
    parse_formula,
    pretty_print,
)

__all__ = [
    "PREDICATES",
    "CoreCondition",
    "AggregateSpec",
    "HigherOrderCondition",
    "TriggerAction",
    "Ruleset",
    "Diagnostic",
    "parse_ruleset",
    "load_ruleset",
    "lint_ruleset",
    "parse_formula",
    "pretty_print",
]

PREDICATES = ("field_present", "field_matches", "keyword_present", "min_length", "nonempty")

_COMPARATORS = {"<=": "<=", "≤": "<=", ">=": ">=", "≥": ">=", "=": "=", "==": "="}


@dataclass(frozen=True)
class CoreCondition:
    id: str
    predicate: str
    args: dict
    required: bool = False
    expected: bool = True


@dataclass(frozen=True)
class AggregateSpec:
    statistic: str
    over: SetFormula
    comparator: str
    tau: int


@dataclass(frozen=True)
class HigherOrderCondition:
    id: str
    kind: str  # "meta" | "aggregate"
    formula: Union[SetFormula, AggregateSpec]
    prerequisites: tuple[str, ...]
    expected: bool = True
    prerequisites_inferred: bool = False

    def formula_atoms(self) -> tuple[str, ...]:
        node = self.formula.over if isinstance(self.formula, AggregateSpec) else self.formula
        seen: list[str] = []
        for name in iter_atoms(node):
            if name not in seen:
                seen.append(name)
        return tuple(seen)


@dataclass(frozen=True)
class TriggerAction:
    trigger: str
    event: str  # "sat" | "unsat"
    kind: str  # "block" | "warn" | "info"
    message: str


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning" | "info"
    code: str
    message: str
    location: str


@dataclass(frozen=True)
class Ruleset:
    profile: str
    core: tuple[CoreCondition, ...]
    higher: tuple[HigherOrderCondition, ...]
    actions: tuple[TriggerAction, ...]

    @property
    def core_ids(self) -> frozenset[str]:
        return frozenset(c.id for c in self.core)

    @property
    def higher_ids(self) -> frozenset[str]:
        return frozenset(h.id for h in self.higher)

    @property
    def all_ids(self) -> frozenset[str]:
        return self.core_ids | self.higher_ids

    def expected_of(self, cond_id: str) -> bool:
        for c in self.core:
            if c.id == cond_id:
                return c.expected
        for h in self.higher:
            if h.id == cond_id:
                return h.expected
        raise KeyError(cond_id)


def _require(obj: dict, key: str, types, location: str) -> Any:
    if key not in obj:
        raise RulesetError(f"missing required key {key!r}", location)
    value = obj[key]
    if not isinstance(value, types):
        raise RulesetError(f"key {key!r} has wrong type {type(value).__name__}", location)
    return value


def _reject_unknown(obj: dict, allowed: set[str], location: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise RulesetError(f"unknown keys {sorted(unknown)}", location)


def _check_args(predicate: str, args: dict, location: str) -> None:
    def need(key, types):
        if key not in args:
            raise RulesetError(f"predicate {predicate!r} needs arg {key!r}", location)
        if not isinstance(args[key], types):
            raise RulesetError(f"arg {key!r} has wrong type", location)

    if predicate in ("field_present", "nonempty"):
        need("field", str)
    elif predicate == "field_matches":
        need("field", str)
        need("pattern", str)
        try:
            re.compile(args["pattern"])
        except re.error as exc:
            raise RulesetError(f"pattern does not compile: {exc}", location)
    elif predicate == "keyword_present":
        need("keywords", list)
        if not args["keywords"] or not all(isinstance(k, str) for k in args["keywords"]):
            raise RulesetError("arg 'keywords' must be a nonempty list of strings", location)
        if "field" in args and not isinstance(args["field"], str):
            raise RulesetError("arg 'field' has wrong type", location)
    elif predicate == "min_length":
        need("field", str)
        need("n", int)
        if args["n"] < 0:
            raise RulesetError("arg 'n' must be >= 0", location)


def _parse_core(items: list, declared: set[str]) -> list[CoreCondition]:
    out = []
    for i, item in enumerate(items):
        loc = f"core_conditions[{i}]"
        if not isinstance(item, dict):
            raise RulesetError("condition must be an object", loc)
        _reject_unknown(item, {"id", "predicate", "args", "required", "expected"}, loc)
        cid = _require(item, "id", str, loc)
        if cid in declared:
            raise RulesetError(f"duplicate condition id {cid!r}", loc)
        predicate = _require(item, "predicate", str, loc)
        if predicate not in PREDICATES:
            raise RulesetError(f"unknown predicate {predicate!r}", loc)
        args = item.get("args", {})
        if not isinstance(args, dict):
            raise RulesetError("key 'args' has wrong type", loc)
        _check_args(predicate, args, loc)
        declared.add(cid)
        out.append(
            CoreCondition(
                id=cid,
                predicate=predicate,
                args=args,
                required=bool(item.get("required", False)),
                expected=bool(item.get("expected", True)),
            )
        )
    return out


def _parse_prereqs(item: dict, atoms: tuple[str, ...], loc: str) -> tuple[tuple[str, ...], bool]:
    if "prerequisites" in item:
        prereqs = item["prerequisites"]
        if not isinstance(prereqs, list) or not all(isinstance(p, str) for p in prereqs):
            raise RulesetError("key 'prerequisites' must be a list of strings", loc)
        return tuple(prereqs), False
    # omitted prerequisites default to the condition atoms of the formula
    return atoms, True


def _parse_meta(items: list, declared: set[str]) -> list[HigherOrderCondition]:
    out = []
    for i, item in enumerate(items):
        loc = f"meta_conditions[{i}]"
        if not isinstance(item, dict):
            raise RulesetError("condition must be an object", loc)
        _reject_unknown(item, {"id", "formula", "prerequisites", "expected"}, loc)
        cid = _require(item, "id", str, loc)
        if cid in declared:
            raise RulesetError(f"duplicate condition id {cid!r}", loc)
        text = _require(item, "formula", str, loc)
        try:
            tree = parse_formula(text)
        except Exception as exc:
            raise RulesetError(f"formula does not parse: {exc}", loc)
        cond = HigherOrderCondition(id=cid, kind="meta", formula=tree, prerequisites=())
        prereqs, inferred = _parse_prereqs(item, cond.formula_atoms(), loc)
        declared.add(cid)
        out.append(
            HigherOrderCondition(
                id=cid,
                kind="meta",
                formula=tree,
                prerequisites=prereqs,
                expected=bool(item.get("expected", True)),
                prerequisites_inferred=inferred,
            )
        )
    return out


def _parse_aggregate(items: list, declared: set[str]) -> list[HigherOrderCondition]:
    out = []
    for i, item in enumerate(items):
        loc = f"aggregate_conditions[{i}]"
        if not isinstance(item, dict):
            raise RulesetError("condition must be an object", loc)
        _reject_unknown(
            item, {"id", "statistic", "over", "comparator", "tau", "prerequisites", "expected"}, loc
        )
        cid = _require(item, "id", str, loc)
        if cid in declared:
            raise RulesetError(f"duplicate condition id {cid!r}", loc)
        statistic = _require(item, "statistic", str, loc)
        if statistic != "count":
            raise RulesetError(f"unsupported statistic {statistic!r} (only 'count')", loc)
        over_text = _require(item, "over", str, loc)
        try:
            over = parse_formula(over_text)
        except Exception as exc:
            raise RulesetError(f"'over' expression does not parse: {exc}", loc)
        comparator = _require(item, "comparator", str, loc)
        if comparator not in _COMPARATORS:
            raise RulesetError(f"unknown comparator {comparator!r}", loc)
        tau = _require(item, "tau", int, loc)
        if isinstance(tau, bool) or tau < 0:
            raise RulesetError("key 'tau' must be an integer >= 0", loc)
        spec = AggregateSpec(
            statistic=statistic, over=over, comparator=_COMPARATORS[comparator], tau=tau
        )
        cond = HigherOrderCondition(id=cid, kind="aggregate", formula=spec, prerequisites=())
        prereqs, inferred = _parse_prereqs(item, cond.formula_atoms(), loc)
        declared.add(cid)
        out.append(
            HigherOrderCondition(
                id=cid,
                kind="aggregate",
                formula=spec,
                prerequisites=prereqs,
                expected=bool(item.get("expected", True)),
                prerequisites_inferred=inferred,
            )
        )
    return out


def _parse_actions(items: list) -> list[TriggerAction]:
    out = []
    for i, item in enumerate(items):
        loc = f"actions[{i}]"
        if not isinstance(item, dict):
            raise RulesetError("action must be an object", loc)
        _reject_unknown(item, {"trigger", "event", "kind", "message"}, loc)
        trigger = _require(item, "trigger", str, loc)
        event = _require(item, "event", str, loc)
        if event not in ("sat", "unsat"):
            raise RulesetError(f"unknown event {event!r}", loc)
        kind = _require(item, "kind", str, loc)
        if kind not in ("block", "warn", "info"):
            raise RulesetError(f"unknown action kind {kind!r}", loc)
        message = _require(item, "message", str, loc)
        out.append(TriggerAction(trigger=trigger, event=event, kind=kind, message=message))
    return out


def _check_references(rs: Ruleset) -> None:
    known = rs.all_ids
    for h in rs.higher:
        loc = f"condition {h.id!r}"
        for atom in h.formula_atoms():
            if atom not in known:
                raise RulesetError(f"undefined condition reference {atom!r}", loc)
        for p in h.prerequisites:
            if p not in known:
                raise RulesetError(f"undefined prerequisite {p!r}", loc)
    for i, a in enumerate(rs.actions):
        if a.trigger not in known:
            raise RulesetError(f"undefined condition reference {a.trigger!r}", f"actions[{i}]")


def topological_order(rs: Ruleset) -> list[str]:
    """Order higher-order condition ids so prerequisites precede dependents.

    Raises RulesetError when the prerequisite graph has a cycle.
    """
    higher = {h.id: h for h in rs.higher}
    indegree = {hid: 0 for hid in higher}
    dependents: dict[str, list[str]] = {hid: [] for hid in higher}
    for h in rs.higher:
        for p in h.prerequisites:
            if p in higher:
                indegree[h.id] += 1
                dependents[p].append(h.id)
    queue = sorted(hid for hid, deg in indegree.items() if deg == 0)
    order = []
    while queue:
        hid = queue.pop(0)
        order.append(hid)
        for d in dependents[hid]:
            indegree[d] -= 1
            if indegree[d] == 0:
                queue.append(d)
        queue.sort()
    if len(order) != len(higher):
        cyclic = sorted(hid for hid in higher if hid not in order)
        raise RulesetError(f"prerequisite cycle among {cyclic}", "higher-order conditions")
    return order


def parse_ruleset(document: Union[str, dict]) -> Ruleset:
    """Parse and validate a ruleset document (JSON text or parsed object)."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise RulesetError(f"document is not valid JSON: {exc}")
    if not isinstance(document, dict):
        raise RulesetError("document must be a JSON object")
    _reject_unknown(
        document,
        {
            "schema_version",
            "profile",
            "core_conditions",
            "meta_conditions",
            "aggregate_conditions",
            "actions",
        },
        "document",
    )
    version = _require(document, "schema_version", int, "document")
    if version != 1:
        raise RulesetError(f"unsupported schema_version {version}", "document")
    profile = _require(document, "profile", str, "document")

    declared: set[str] = set()
    core = _parse_core(_as_list(document, "core_conditions"), declared)
    higher = _parse_meta(_as_list(document, "meta_conditions"), declared)
    higher += _parse_aggregate(_as_list(document, "aggregate_conditions"), declared)
    actions = _parse_actions(_as_list(document, "actions"))

    rs = Ruleset(profile=profile, core=tuple(core), higher=tuple(higher), actions=tuple(actions))
    _check_references(rs)
    topological_order(rs)  # raises on prerequisite cycles
    return rs


def _as_list(document: dict, key: str) -> list:
    value = document.get(key, [])
    if not isinstance(value, list):
        raise RulesetError(f"key {key!r} has wrong type", "document")
    return value


def load_ruleset(path) -> Ruleset:
    with open(path, encoding="utf-8") as fh:
        return parse_ruleset(fh.read())


def lint_ruleset(rs: Ruleset) -> list[Diagnostic]:
    """Report structural oddities that are legal but usually unintended."""
    diags: list[Diagnostic] = []
    known = rs.all_ids

    for i, a in enumerate(rs.actions):
        if a.trigger not in known:
            diags.append(
                Diagnostic(
                    "error",
                    "dangling-action-trigger",
                    f"action triggers on undeclared condition {a.trigger!r}",
                    f"actions[{i}]",
                )
            )

    referenced: set[str] = {a.trigger for a in rs.actions}
    for h in rs.higher:
        referenced.update(h.formula_atoms())

    for c in rs.core:
        if c.id not in referenced and not c.required:
            diags.append(
                Diagnostic(
                    "info",
                    "unreferenced-condition",
                    f"condition {c.id!r} is never referenced by a formula or action",
                    f"condition {c.id!r}",
                )
            )
    for h in rs.higher:
        if h.kind == "meta" and h.id not in referenced:
            diags.append(
                Diagnostic(
                    "info",
                    "unreferenced-condition",
                    f"condition {h.id!r} is never referenced by a formula or action",
                    f"condition {h.id!r}",
                )
            )
        if h.prerequisites_inferred and h.prerequisites:
            diags.append(
                Diagnostic(
                    "info",
                    "implicit-prerequisites",
                    f"implicit prerequisites inferred from formula atoms: {list(h.prerequisites)}",
                    f"condition {h.id!r}",
                )
            )
        if not h.prerequisites:
            diags.append(
                Diagnostic(
                    "info",
                    "no-prerequisites",
                    f"condition {h.id!r} has empty prerequisite coverage",
                    f"condition {h.id!r}",
                )
            )
    return diags
