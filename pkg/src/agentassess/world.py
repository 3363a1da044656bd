"""Simulated CloudOps world state.

The world is a plain value object: instances, buckets, security groups,
service metrics, and an append-only change log guarded by a strictly
increasing version counter. All mutation goes through ``record_change`` so
the version/log invariants cannot be bypassed by tool behaviors.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .errors import BadPath, SchemaViolation, ToolError

ENVS = ("production", "staging", "dev")
INSTANCE_STATES = ("running", "stopped", "terminated")


@dataclass
class WorldState:
    instances: dict = field(default_factory=dict)
    buckets: dict = field(default_factory=dict)
    security_groups: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    change_log: list = field(default_factory=list)
    version: int = 0

    # --- lifecycle -----------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "WorldState":
        world = cls(
            instances=copy.deepcopy(raw.get("instances", {})),
            buckets=copy.deepcopy(raw.get("buckets", {})),
            security_groups=copy.deepcopy(raw.get("security_groups", {})),
            metrics=copy.deepcopy(raw.get("metrics", {})),
            change_log=copy.deepcopy(raw.get("change_log", [])),
            version=int(raw.get("version", 0)),
        )
        world.validate()
        return world

    def to_dict(self) -> dict:
        return {
            "instances": copy.deepcopy(self.instances),
            "buckets": copy.deepcopy(self.buckets),
            "security_groups": copy.deepcopy(self.security_groups),
            "metrics": copy.deepcopy(self.metrics),
            "change_log": copy.deepcopy(self.change_log),
            "version": self.version,
        }

    def clone(self) -> "WorldState":
        return copy.deepcopy(self)

    def validate(self):
        for iid, inst in self.instances.items():
            if inst.get("env") not in ENVS:
                raise SchemaViolation(f"instance {iid}: env must be one of {ENVS}")
            if inst.get("state") not in INSTANCE_STATES:
                raise SchemaViolation(f"instance {iid}: state must be one of {INSTANCE_STATES}")
            util = inst.get("utilization_pct", 0)
            if not 0 <= util <= 100:
                raise SchemaViolation(f"instance {iid}: utilization_pct out of range")
            if inst.get("monthly_cost_usd", 0) < 0:
                raise SchemaViolation(f"instance {iid}: negative monthly_cost_usd")
        for bid, bucket in self.buckets.items():
            for key in ("public", "logging", "sensitive"):
                if not isinstance(bucket.get(key, False), bool):
                    raise SchemaViolation(f"bucket {bid}: {key} must be boolean")
        for sid, group in self.security_groups.items():
            for rule in group.get("rules", []):
                if not {"port", "cidr", "action"} <= set(rule):
                    raise SchemaViolation(f"security group {sid}: rule needs port/cidr/action")
        for svc, m in self.metrics.items():
            if "response_time_ms" not in m or "baseline_ms" not in m:
                raise SchemaViolation(f"metrics {svc}: need response_time_ms and baseline_ms")
        for entry in self.change_log:
            if not {"t_ms", "resource", "description"} <= set(entry):
                raise SchemaViolation("change_log entries need t_ms/resource/description")
        if self.version < 0:
            raise SchemaViolation("version must be non-negative")

    # --- mutation ------------------------------------------------------------

    def record_change(self, t_ms: int, resource: str, description: str):
        """Append one change entry and bump the version. The only mutation door."""
        self.change_log.append({"t_ms": t_ms, "resource": resource, "description": description})
        self.version += 1

    def set_instance_state(self, instance_id: str, state: str, t_ms: int):
        inst = self.instances.get(instance_id)
        if inst is None:
            raise ToolError("unknown_resource", f"Unknown instance: {instance_id}")
        if inst["state"] == "terminated":
            raise ToolError(
                "invalid_transition",
                f"Invalid transition: {instance_id} is terminated (terminal state)",
            )
        if state not in INSTANCE_STATES:
            raise ToolError("invalid_transition", f"Invalid state: {state}")
        old = inst["state"]
        inst["state"] = state
        self.record_change(t_ms, instance_id, f"state {old} -> {state}")

    # --- queries -------------------------------------------------------------

    def resource_env(self, resource_id: str) -> str | None:
        inst = self.instances.get(resource_id)
        return inst["env"] if inst else None

    def total_monthly_cost(self) -> float:
        return float(
            sum(i.get("monthly_cost_usd", 0) for i in self.instances.values() if i.get("state") == "running")
        )

    def resolve_path(self, path: str):
        """Resolve a dotted path; ``totals.monthly_cost_usd`` is derived."""
        if path == "totals.monthly_cost_usd":
            return self.total_monthly_cost()
        node = {
            "instances": self.instances,
            "buckets": self.buckets,
            "security_groups": self.security_groups,
            "metrics": self.metrics,
            "change_log": self.change_log,
            "version": self.version,
        }
        for part in str(path).split("."):
            if isinstance(node, dict):
                if part not in node:
                    raise BadPath(path)
                node = node[part]
            elif isinstance(node, list):
                try:
                    node = node[int(part)]
                except (ValueError, IndexError) as exc:
                    raise BadPath(path) from exc
            else:
                raise BadPath(path)
        return node

    def path_exists(self, path: str) -> bool:
        try:
            self.resolve_path(path)
            return True
        except BadPath:
            return False
