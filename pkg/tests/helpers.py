"""Shared ruleset builders and document fixtures."""

from __future__ import annotations

from veritab.rulekit import parse_ruleset

EXAMPLE1_DOC = {
    "schema_version": 1,
    "profile": "damage-narrative",
    "core_conditions": [
        {"id": "c_dev_type", "predicate": "field_present", "args": {"field": "device_type"}},
        {"id": "c_serial", "predicate": "field_present", "args": {"field": "serial_number"}},
        {"id": "c_category", "predicate": "field_present", "args": {"field": "device_category"}},
        {
            "id": "c_damage_desc",
            "predicate": "min_length",
            "args": {"field": "damage_description", "n": 10},
        },
        {"id": "c_party", "predicate": "field_present", "args": {"field": "affected_party"}},
    ],
    "meta_conditions": [
        {
            "id": "c_ready",
            "formula": "(c_dev_type & c_serial & c_category)"
            " | (c_category & c_damage_desc & c_party)",
        }
    ],
    "aggregate_conditions": [],
    "actions": [
        {
            "trigger": "c_ready",
            "event": "unsat",
            "kind": "block",
            "message": "input lacks sufficient grounding for narrative generation",
        }
    ],
}

EXAMPLE2_DOC = {
    "schema_version": 1,
    "profile": "safety-review",
    "core_conditions": [
        {
            "id": "c_crit_kw",
            "predicate": "keyword_present",
            "args": {"keywords": ["overheating", "fire", "electric shock"]},
        },
        {"id": "c_failure_mode", "predicate": "field_present", "args": {"field": "failure_mode"}},
        {"id": "c_risk_class", "predicate": "field_present", "args": {"field": "risk_class"}},
    ],
    "meta_conditions": [
        {"id": "c_safety", "formula": "!c_crit_kw | (c_failure_mode & c_risk_class)"}
    ],
    "aggregate_conditions": [],
    "actions": [
        {
            "trigger": "c_safety",
            "event": "unsat",
            "kind": "block",
            "message": "safety-critical input requires failure mode and risk classification",
        }
    ],
}


def example1_ruleset():
    return parse_ruleset(dict(EXAMPLE1_DOC))


def example2_ruleset():
    return parse_ruleset(dict(EXAMPLE2_DOC))


def metadata_ruleset(n_required: int = 10, n_optional: int = 0):
    """Ruleset with n_required required field_present conditions."""
    core = [
        {
            "id": f"c_req_{i}",
            "predicate": "field_present",
            "args": {"field": f"field_{i}"},
            "required": True,
        }
        for i in range(n_required)
    ]
    core += [
        {
            "id": f"c_opt_{i}",
            "predicate": "nonempty",
            "args": {"field": f"opt_{i}"},
        }
        for i in range(n_optional)
    ]
    return parse_ruleset(
        {
            "schema_version": 1,
            "profile": "metadata-gate",
            "core_conditions": core,
            "meta_conditions": [],
            "aggregate_conditions": [],
            "actions": [],
        }
    )


def full_metadata_input(n_required: int = 10, n_optional: int = 0) -> dict:
    doc = {f"field_{i}": f"value {i}" for i in range(n_required)}
    doc.update({f"opt_{i}": f"opt value {i}" for i in range(n_optional)})
    return doc
