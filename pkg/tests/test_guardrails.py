"""Guardrail decision table."""

from __future__ import annotations

import pytest

from agentassess.guardrails import Policy, check_guardrail


def policy(pid="p1", effect="deny", action="terminate_*", **kw):
    return Policy(policy_id=pid, effect=effect, action_pattern=action, **kw)


def test_effect_is_validated():
    with pytest.raises(ValueError):
        Policy("p", "maybe", "*")


def test_explicit_deny_matches_action_glob():
    d = check_guardrail([policy()], "terminate_instance", "action")
    assert (d.allowed, d.reason, d.policy_id) == (False, "explicit_deny", "p1")
    # non-matching action falls through to the category default
    d2 = check_guardrail([policy()], "describe_instance", "diagnostic")
    assert (d2.allowed, d2.reason) == (True, "default_allow")


def test_resource_pattern_matches_id_or_env_tag():
    pol = policy(resource_pattern="env:production")
    hit = check_guardrail([pol], "terminate_instance", "action", "prod-api-1", "production")
    assert not hit.allowed and hit.policy_id == "p1"
    miss = check_guardrail([pol], "terminate_instance", "action", "dev-old-1", "dev")
    assert miss.reason == "default_deny"  # deny policy skipped, no allow matched
    by_id = check_guardrail([policy(resource_pattern="prod-*")], "terminate_instance", "action", "prod-db-1", None)
    assert not by_id.allowed and by_id.reason == "explicit_deny"


def test_requires_approval_gates_either_effect():
    gate = policy(effect="deny", condition={"requires_approval": True})
    denied = check_guardrail([gate], "terminate_instance", "action", approved=False)
    assert (denied.allowed, denied.reason, denied.policy_id) == (False, "requires_approval", "p1")
    approved = check_guardrail([gate], "terminate_instance", "action", approved=True)
    assert (approved.allowed, approved.reason, approved.policy_id) == (True, "allow", "p1")

    allow_gate = policy(effect="allow", condition={"requires_approval": True})
    assert not check_guardrail([allow_gate], "terminate_instance", "action").allowed


def test_deny_wins_over_allow_and_first_deny_reports():
    pols = [
        policy("allow-all", effect="allow", action="*"),
        policy("deny-a", effect="deny"),
        policy("deny-b", effect="deny"),
    ]
    d = check_guardrail(pols, "terminate_instance", "action")
    assert not d.allowed and d.policy_id == "deny-a"


def test_env_not_condition_skips_policy():
    pol = policy(effect="allow", action="*", condition={"env_not": "production"})
    skipped = check_guardrail([pol], "stop_instance", "action", "prod-1", "production")
    assert skipped.reason == "default_deny"
    applied = check_guardrail([pol], "stop_instance", "action", "dev-1", "dev")
    assert applied.allowed and applied.reason == "allow"


def test_principal_mismatch_on_allow_policy_changes_default_reason():
    pol = policy(effect="allow", action="*", principal_pattern="ops-*")
    blocked = check_guardrail([pol], "stop_instance", "action", principal="intern")
    assert (blocked.allowed, blocked.reason) == (False, "principal_mismatch")
    ok = check_guardrail([pol], "stop_instance", "action", principal="ops-1")
    assert ok.allowed and ok.policy_id == "p1"
    # a deny policy missed on principal leaves the plain default reason
    deny = policy(effect="deny", action="*", principal_pattern="ops-*")
    assert check_guardrail([deny], "stop_instance", "action", principal="intern").reason == "default_deny"


def test_category_defaults():
    assert check_guardrail([], "get_cost_report", "diagnostic").reason == "default_allow"
    assert check_guardrail([], "request_cab_approval", "audit").reason == "default_allow"
    assert check_guardrail([], "terminate_instance", "action").reason == "default_deny"


def test_action_pattern_accepts_glob_lists():
    pol = policy(action=["terminate_*", "stop_*"])
    assert not check_guardrail([pol], "stop_instance", "action").allowed
    assert check_guardrail([pol], "reboot_instance", "diagnostic").allowed
