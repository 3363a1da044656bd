"""Shared fixtures: bundled scenarios, scripts, and cached golden runs."""

from __future__ import annotations

import pytest

from agentassess.agents import ScriptedAgent, run_scripted
from agentassess.harness import evaluate_run
from agentassess.scenario import bundled_scenario_path, load_scenario

GOLDEN_SCRIPTS = {
    "s1_cost": "s1_golden",
    "s2_security": "s2_golden",
    "s3_rca": "s3_golden",
}

# Injection target per scenario, chosen so each kind degrades exactly one pillar.
INJECTION_TARGETS = {
    "s1_cost": {
        "skip_policy_lookup": "policy-lookup",
        "skip_memory_lookup": "util-memory",
        "wrong_param": "describe_instance",
        "reorder_tools": "list_instances",
        "omit_mandatory_call": "describe_instance",
        "duplicate_memory_write": "decision-note",
        "attempt_guarded_action": "maintenance-reboot",
    },
    "s2_security": {
        "skip_policy_lookup": "policy-lookup",
        "skip_memory_lookup": "exposure-memory",
        "wrong_param": "check_bucket_access",
        "reorder_tools": "enable_logging",
        "omit_mandatory_call": "check_bucket_access",
        "duplicate_memory_write": "remediation-note",
        "attempt_guarded_action": "maintenance-reboot",
    },
    "s3_rca": {
        "skip_policy_lookup": "policy-lookup",
        "skip_memory_lookup": "baseline-memory",
        "wrong_param": "perf-check",
        "reorder_tools": "describe_security_group",
        "omit_mandatory_call": "get_change_log",
        "duplicate_memory_write": "rca-note",
        "attempt_guarded_action": "maintenance-reboot",
    },
}

# Which pillar each injection kind is expected to hit.
KIND_PILLAR = {
    "skip_policy_lookup": "llm",
    "wrong_param": "tools",
    "reorder_tools": "tools",
    "omit_mandatory_call": "tools",
    "duplicate_memory_write": "memory",
    "skip_memory_lookup": "memory",
    "attempt_guarded_action": "environment",
}


@pytest.fixture(scope="session")
def specs():
    return {
        sid: load_scenario(bundled_scenario_path(sid))
        for sid in ("s1_cost", "s2_security", "s3_rca")
    }


@pytest.fixture(scope="session")
def golden_agents():
    return {
        sid: ScriptedAgent.from_file(bundled_scenario_path(script))
        for sid, script in GOLDEN_SCRIPTS.items()
    }


@pytest.fixture(scope="session")
def golden_runs(specs, golden_agents):
    """One executed golden run per scenario (seed 42, variant 0)."""
    out = {}
    for sid, spec in specs.items():
        steps = golden_agents[sid].script.steps_for_run(0)
        out[sid] = run_scripted(steps, spec, seed=42)
    return out


@pytest.fixture(scope="session")
def golden_evals(specs, golden_runs):
    return {
        sid: evaluate_run(rr.trace, rr.env.world, specs[sid], rr.store)
        for sid, rr in golden_runs.items()
    }


@pytest.fixture()
def s1(specs):
    return specs["s1_cost"]


@pytest.fixture()
def s2(specs):
    return specs["s2_security"]


@pytest.fixture()
def s3(specs):
    return specs["s3_rca"]
