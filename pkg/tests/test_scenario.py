"""Scenario loading, cross-reference validation, and test-case generation."""

from __future__ import annotations

import copy

import pytest

from agentassess.errors import BadPath, CyclicOrderConstraint, DanglingReference, SchemaViolation
from agentassess.scenario import (
    ObjectiveAssertion,
    bundled_scenario_path,
    generate_test_cases,
    scenario_from_dict,
    ships_scenarios,
)
from agentassess.world import WorldState


def minimal_doc() -> dict:
    return {
        "scenario_id": "mini",
        "title": "Minimal",
        "runs": 1,
        "world_init": {
            "instances": {"i-1": {"env": "production", "monthly_cost_usd": 100, "state": "running"}},
        },
        "tools": [
            {"name": "list_instances", "category": "diagnostic"},
            {"name": "describe_instance", "category": "diagnostic",
             "param_schema": [{"key": "instance_id", "required": True}], "resource_param": "instance_id"},
            {"name": "terminate_instance", "category": "action",
             "param_schema": [{"key": "instance_id", "required": True}], "resource_param": "instance_id"},
        ],
        "policies": [
            {"policy_id": "prod-freeze", "effect": "deny", "action_patterns": ["terminate_*"],
             "resource": "env:production"},
        ],
        "objective": {"assertions": [{"path": "instances.i-1.state", "op": "eq", "value": "running"}]},
        "contract": {
            "required_tools": ["list_instances"],
            "mandatory_calls": [{"tool": "list_instances"}],
            "order_constraints": [{"before": "list_instances", "after": "describe_instance"}],
        },
        "memory_seed": [{"id": "m-1", "tags": ["policy"], "content": "policy note", "t_ms": 1}],
    }


def test_minimal_document_loads():
    spec = scenario_from_dict(minimal_doc())
    assert spec.scenario_id == "mini"
    assert spec.runs == 1
    assert set(spec.tool_registry) == {"list_instances", "describe_instance", "terminate_instance"}
    assert spec.categories()["terminate_instance"] == "action"


@pytest.mark.parametrize(
    "mutate, exc",
    [
        (lambda d: d.update(surprise=1), SchemaViolation),
        (lambda d: d.pop("objective"), SchemaViolation),
        (lambda d: d.update(runs=0), SchemaViolation),
        (lambda d: d["tools"].append({"name": "list_instances"}), SchemaViolation),
        (lambda d: d["tools"].append({"name": "weird", "behavior": "no_such_behavior"}), DanglingReference),
        (lambda d: d["contract"]["required_tools"].append("ghost_tool"), DanglingReference),
        (lambda d: d["contract"]["mandatory_calls"].append({"tool": "ghost_tool"}), DanglingReference),
        (lambda d: d["contract"]["order_constraints"].append({"before": "ghost", "after": "list_instances"}), DanglingReference),
        (lambda d: d["memory_seed"].append({"id": "m-1", "tags": [], "content": "x", "t_ms": 2}), SchemaViolation),
        (lambda d: d["memory_seed"].append({"tags": [], "content": "x", "t_ms": 2}), SchemaViolation),
        (lambda d: d.update(faults=[{"target_tool": "ghost", "mode": "latency_spike", "trigger": {"nth": 1}}]), DanglingReference),
        (lambda d: d["objective"]["assertions"].append({"path": "instances.ghost.state", "op": "eq", "value": 1}), BadPath),
    ],
)
def test_validation_failures(mutate, exc):
    doc = minimal_doc()
    mutate(doc)
    with pytest.raises(exc):
        scenario_from_dict(doc)


def test_order_constraint_cycle_is_reported_with_path():
    doc = minimal_doc()
    doc["contract"]["order_constraints"] = [
        {"before": "list_instances", "after": "describe_instance"},
        {"before": "describe_instance", "after": "terminate_instance"},
        {"before": "terminate_instance", "after": "list_instances"},
    ]
    with pytest.raises(CyclicOrderConstraint) as exc:
        scenario_from_dict(doc)
    assert "list_instances" in str(exc.value)


def test_gated_action_requires_lookup_pattern():
    doc = minimal_doc()
    doc["contract"]["policy_gated_actions"] = [{"action_tool": "terminate_instance", "lookup_pattern": []}]
    with pytest.raises(SchemaViolation):
        scenario_from_dict(doc)


def test_memory_gold_validation():
    doc = minimal_doc()
    doc["contract"]["memory_gold"] = [
        {"mechanism": "psychic", "query_keywords": ["policy"], "gold_items": ["m-1"]},
    ]
    with pytest.raises(SchemaViolation):
        scenario_from_dict(doc)
    doc = minimal_doc()
    doc["contract"]["memory_gold"] = [
        {"mechanism": "single_hop", "query_keywords": ["policy"], "gold_items": ["m-ghost"]},
    ]
    with pytest.raises(DanglingReference):
        scenario_from_dict(doc)


def test_alias_map_must_be_one_level():
    doc = minimal_doc()
    doc["contract"]["alias_map"] = {"a": "b", "b": "c"}
    with pytest.raises(SchemaViolation):
        scenario_from_dict(doc)
    doc["contract"]["alias_map"] = {"prod": "production", "production": "production"}
    scenario_from_dict(doc)  # self-mapping terminal is fine


def test_objective_ops():
    world = WorldState.from_dict({"buckets": {"b": {"tags": ["a", "b"], "name": "data-public"}}})
    assert ObjectiveAssertion("buckets.b.name", "contains", "public").holds(world)
    assert ObjectiveAssertion("buckets.b.tags", "contains", "a").holds(world)
    assert ObjectiveAssertion("buckets.b.name", "neq", "x").holds(world)
    assert ObjectiveAssertion("buckets.ghost", "absent").holds(world)
    assert not ObjectiveAssertion("buckets.b", "absent").holds(world)
    with pytest.raises(SchemaViolation):
        ObjectiveAssertion("p", "between", 1)


def test_generated_case_counts_per_pillar(specs):
    expected = {
        "s1_cost": {"tools": 6, "environment": 3, "memory": 2, "llm": 1},
        "s2_security": {"tools": 5, "memory": 2, "environment": 2, "llm": 1},
        "s3_rca": {"tools": 7, "memory": 4, "llm": 2, "environment": 2},
    }
    for sid, spec in specs.items():
        cases = generate_test_cases(spec)
        got: dict[str, int] = {}
        for case in cases:
            got[case.pillar] = got.get(case.pillar, 0) + 1
        assert got == expected[sid], sid


def test_generated_case_ids_and_payloads(specs):
    cases = generate_test_cases(specs["s1_cost"])
    ids = [c.case_id for c in cases]
    assert ids[0] == "s1_cost-llm-01"
    assert len(ids) == len(set(ids))
    # regenerating yields identical documents
    again = [c.to_dict() for c in generate_test_cases(specs["s1_cost"])]
    assert [c.to_dict() for c in cases] == again
    by_pillar = {}
    for c in cases:
        by_pillar.setdefault(c.pillar, []).append(c)
    assert by_pillar["llm"][0].success[0].kind == "memory_query_matches"
    assert by_pillar["environment"][0].success[0].kind == "span_absent"


def test_bundled_paths():
    assert bundled_scenario_path("s1_cost").name == "s1_cost.yaml"
    assert bundled_scenario_path("s1_cost.yaml").name == "s1_cost.yaml"
    assert bundled_scenario_path("s1_golden").parent.name == "scripts"
    with pytest.raises(FileNotFoundError):
        bundled_scenario_path("s9_ghost")


def test_ships_scenarios_keys():
    specs = ships_scenarios()
    assert sorted(specs) == ["s1_cost", "s2_security", "s3_rca"]
    assert all(sid == spec.scenario_id for sid, spec in specs.items())


def test_loading_is_side_effect_free():
    doc = minimal_doc()
    frozen = copy.deepcopy(doc)
    scenario_from_dict(doc)
    assert doc == frozen
