import json

import pytest

from helpers import EXAMPLE1_DOC, example1_ruleset
from veritab.errors import RulesetError
from veritab.formula import And, Or
from veritab.rulekit import (
    Ruleset,
    TriggerAction,
    lint_ruleset,
    parse_ruleset,
    topological_order,
)


def minimal_doc():
    return {
        "schema_version": 1,
        "profile": "minimal",
        "core_conditions": [
            {
                "id": "c_title",
                "predicate": "field_present",
                "args": {"field": "title"},
                "required": True,
            }
        ],
        "meta_conditions": [],
        "aggregate_conditions": [],
        "actions": [],
    }


def test_minimal_document_one_core_condition():
    rs = parse_ruleset(minimal_doc())
    assert len(rs.core) == 1
    assert len(rs.higher) == 0
    assert rs.core[0].required is True
    assert rs.core[0].expected is True


def test_example1_formula_is_disjunction_of_two_conjunctions():
    rs = example1_ruleset()
    (meta,) = rs.higher
    assert meta.kind == "meta"
    tree = meta.formula
    assert isinstance(tree, Or)
    assert isinstance(tree.left, And)
    assert isinstance(tree.right, And)


def test_undefined_reference_names_the_ghost():
    doc = minimal_doc()
    doc["meta_conditions"] = [{"id": "m1", "formula": "c_title & c_ghost"}]
    with pytest.raises(RulesetError) as err:
        parse_ruleset(doc)
    assert "c_ghost" in str(err.value)


def test_accepts_json_text_input():
    rs = parse_ruleset(json.dumps(EXAMPLE1_DOC))
    assert rs.profile == "damage-narrative"


def test_duplicate_ids_rejected():
    doc = minimal_doc()
    doc["core_conditions"].append(dict(doc["core_conditions"][0]))
    with pytest.raises(RulesetError) as err:
        parse_ruleset(doc)
    assert "duplicate" in str(err.value)


def test_unknown_predicate_rejected_with_location():
    doc = minimal_doc()
    doc["core_conditions"][0]["predicate"] = "has_vibes"
    with pytest.raises(RulesetError) as err:
        parse_ruleset(doc)
    assert "has_vibes" in str(err.value)
    assert err.value.location == "core_conditions[0]"


def test_bad_pattern_rejected():
    doc = minimal_doc()
    doc["core_conditions"][0] = {
        "id": "c_bad",
        "predicate": "field_matches",
        "args": {"field": "title", "pattern": "("},
    }
    with pytest.raises(RulesetError):
        parse_ruleset(doc)


def test_prerequisite_cycle_rejected():
    doc = minimal_doc()
    doc["meta_conditions"] = [
        {"id": "m1", "formula": "c_title", "prerequisites": ["m2"]},
        {"id": "m2", "formula": "c_title", "prerequisites": ["m1"]},
    ]
    with pytest.raises(RulesetError) as err:
        parse_ruleset(doc)
    assert "cycle" in str(err.value)


def test_negative_tau_rejected():
    doc = minimal_doc()
    doc["aggregate_conditions"] = [
        {"id": "a1", "statistic": "count", "over": "C_neg", "comparator": "<=", "tau": -1}
    ]
    with pytest.raises(RulesetError):
        parse_ruleset(doc)


def test_unicode_comparators_normalized():
    doc = minimal_doc()
    doc["aggregate_conditions"] = [
        {"id": "a1", "statistic": "count", "over": "C_neg", "comparator": "≤", "tau": 2}
    ]
    rs = parse_ruleset(doc)
    assert rs.higher[0].formula.comparator == "<="


def test_implicit_prerequisites_default_to_formula_atoms():
    doc = minimal_doc()
    doc["meta_conditions"] = [{"id": "m1", "formula": "c_title & !c_title"}]
    rs = parse_ruleset(doc)
    assert rs.higher[0].prerequisites == ("c_title",)
    assert rs.higher[0].prerequisites_inferred is True


def test_schema_violation_unknown_key():
    doc = minimal_doc()
    doc["extra"] = 1
    with pytest.raises(RulesetError):
        parse_ruleset(doc)


def test_rejection_is_deterministic():
    doc = minimal_doc()
    doc["meta_conditions"] = [{"id": "m1", "formula": "c_ghost"}]
    messages = set()
    for _ in range(3):
        with pytest.raises(RulesetError) as err:
            parse_ruleset(doc)
        messages.add(str(err.value))
    assert len(messages) == 1


def test_topological_sort_succeeds_on_parsed_rulesets():
    doc = minimal_doc()
    doc["meta_conditions"] = [
        {"id": "m1", "formula": "c_title"},
        {"id": "m2", "formula": "m1 | c_title"},
        {"id": "m3", "formula": "m2 & m1"},
    ]
    rs = parse_ruleset(doc)
    order = topological_order(rs)
    assert order.index("m1") < order.index("m2") < order.index("m3")


def test_lint_clean_ruleset_is_empty():
    doc = minimal_doc()
    doc["actions"] = [
        {"trigger": "c_title", "event": "unsat", "kind": "warn", "message": "title missing"}
    ]
    rs = parse_ruleset(doc)
    assert lint_ruleset(rs) == []


def test_lint_reports_inferred_prerequisites():
    doc = minimal_doc()
    doc["meta_conditions"] = [{"id": "m1", "formula": "c_title"}]
    rs = parse_ruleset(doc)
    codes = [d.code for d in lint_ruleset(rs)]
    assert "implicit-prerequisites" in codes


def test_lint_reports_dangling_action_on_handbuilt_ruleset():
    rs = example1_ruleset()
    bad = Ruleset(
        profile=rs.profile,
        core=rs.core,
        higher=rs.higher,
        actions=rs.actions
        + (TriggerAction(trigger="c_nowhere", event="sat", kind="info", message="x"),),
    )
    diags = lint_ruleset(bad)
    assert any(d.code == "dangling-action-trigger" and d.severity == "error" for d in diags)


def test_lint_reports_empty_prerequisite_coverage():
    doc = minimal_doc()
    doc["meta_conditions"] = [{"id": "m1", "formula": "subset(C_req, C_pos)"}]
    rs = parse_ruleset(doc)
    codes = [d.code for d in lint_ruleset(rs)]
    assert "no-prerequisites" in codes
