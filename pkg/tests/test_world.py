"""World-state invariants: versioning, transitions, path resolution."""

from __future__ import annotations

import pytest

from agentassess.errors import BadPath, SchemaViolation, ToolError
from agentassess.world import WorldState


@pytest.fixture()
def world():
    return WorldState.from_dict(
        {
            "instances": {
                "prod-api-1": {"env": "production", "state": "running", "utilization_pct": 70, "monthly_cost_usd": 900},
                "dev-old-1": {"env": "dev", "state": "stopped", "utilization_pct": 2, "monthly_cost_usd": 150},
            },
            "buckets": {"b1": {"public": True, "logging": False, "sensitive": True}},
            "security_groups": {"sg-1": {"rules": [{"port": 443, "cidr": "0.0.0.0/0", "action": "allow"}]}},
            "metrics": {"svc": {"response_time_ms": 480, "baseline_ms": 300}},
        }
    )


def test_validation_rejects_bad_shapes():
    with pytest.raises(SchemaViolation):
        WorldState.from_dict({"instances": {"x": {"env": "moon", "state": "running"}}})
    with pytest.raises(SchemaViolation):
        WorldState.from_dict({"instances": {"x": {"env": "dev", "state": "gone"}}})
    with pytest.raises(SchemaViolation):
        WorldState.from_dict({"buckets": {"b": {"public": "yes"}}})
    with pytest.raises(SchemaViolation):
        WorldState.from_dict({"metrics": {"svc": {"response_time_ms": 10}}})
    with pytest.raises(SchemaViolation):
        WorldState.from_dict({"security_groups": {"sg": {"rules": [{"port": 1}]}}})


def test_record_change_appends_and_bumps_version(world):
    assert world.version == 0
    world.record_change(5, "b1", "tightened")
    assert world.version == 1
    assert world.change_log[-1] == {"t_ms": 5, "resource": "b1", "description": "tightened"}


def test_set_instance_state_transitions(world):
    world.set_instance_state("dev-old-1", "running", 10)
    assert world.instances["dev-old-1"]["state"] == "running"
    assert world.version == 1
    world.set_instance_state("dev-old-1", "terminated", 11)
    with pytest.raises(ToolError) as exc:
        world.set_instance_state("dev-old-1", "running", 12)
    assert exc.value.code == "invalid_transition"
    with pytest.raises(ToolError) as exc:
        world.set_instance_state("ghost", "running", 13)
    assert exc.value.code == "unknown_resource"
    with pytest.raises(ToolError):
        world.set_instance_state("prod-api-1", "hibernating", 14)


def test_total_cost_counts_running_only(world):
    assert world.total_monthly_cost() == 900.0
    world.set_instance_state("dev-old-1", "running", 1)
    assert world.total_monthly_cost() == 1050.0


def test_resource_env_is_instance_scoped(world):
    assert world.resource_env("prod-api-1") == "production"
    assert world.resource_env("b1") is None
    assert world.resource_env("") is None


def test_resolve_path(world):
    assert world.resolve_path("buckets.b1.public") is True
    assert world.resolve_path("instances.prod-api-1.monthly_cost_usd") == 900
    assert world.resolve_path("totals.monthly_cost_usd") == 900.0
    assert world.resolve_path("version") == 0
    world.record_change(1, "b1", "x")
    assert world.resolve_path("change_log.0.resource") == "b1"
    for bad in ("buckets.nope.public", "metrics.svc.response_time_ms.deeper", "change_log.9", "change_log.x"):
        with pytest.raises(BadPath):
            world.resolve_path(bad)
    assert world.path_exists("metrics.svc.baseline_ms")
    assert not world.path_exists("metrics.ghost")


def test_clone_and_to_dict_are_detached(world):
    twin = world.clone()
    twin.instances["prod-api-1"]["state"] = "stopped"
    assert world.instances["prod-api-1"]["state"] == "running"
    raw = world.to_dict()
    raw["buckets"]["b1"]["public"] = False
    assert world.buckets["b1"]["public"] is True
    assert WorldState.from_dict(world.to_dict()).to_dict() == world.to_dict()
