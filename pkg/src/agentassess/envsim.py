"""Deterministic CloudOps simulator: tools, faults, clock, and guardrails.

The environment owns a world, a tool registry, a policy set, a simulated
monotonic millisecond clock, and a seeded RNG. ``execute_tool`` is the single
entry point for agent actions; the guardrail check always runs first, denied
attempts never touch the world, and every attempt produces exactly one span.
Spans are appended by the live recorder under a per-run serialization
guarantee (runs are single-threaded).
"""

from __future__ import annotations

import copy
import random
from dataclasses import dataclass, field

from .errors import BadPath, SchemaError, SchemaViolation, ToolError, UnknownSnapshot, UnknownTool
from .guardrails import GuardrailDecision, Policy, check_guardrail
from .trace import Span, SpanKind
from .util import glob_match
from .world import WorldState

CATEGORIES = ("diagnostic", "action", "audit")
FAULT_MODES = ("error", "latency_spike", "inconsistent_result")

# Spare, fixed cost for attempts that never reach a behavior (denied / invalid).
REJECT_LATENCY_MS = 1

DEFAULT_EPOCH_MS = 1_700_000_000_000


@dataclass(frozen=True)
class ToolDef:
    """Registry entry: schema, category, behavior binding, latency/failure model."""

    name: str
    description: str = ""
    category: str = "diagnostic"
    param_schema: tuple = ()
    behavior: str = ""
    latency_model: object = 10  # fixed ms, or {"min": a, "max": b} drawn per call
    failure_rate: float = 0.0
    resource_param: str | None = None
    equiv_tag: str | None = None
    cost_usd: float = 0.0

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise SchemaViolation(f"tool {self.name}: category must be one of {CATEGORIES}")
        if not 0.0 <= self.failure_rate <= 1.0:
            raise SchemaViolation(f"tool {self.name}: failure_rate out of [0, 1]")

    @property
    def behavior_name(self) -> str:
        return self.behavior or self.name

    @classmethod
    def from_dict(cls, raw: dict) -> "ToolDef":
        schema = tuple(
            (str(p["key"]), str(p.get("type", "string")), bool(p.get("required", False)))
            for p in raw.get("param_schema", [])
        )
        return cls(
            name=str(raw["name"]),
            description=str(raw.get("description", "")),
            category=str(raw.get("category", "diagnostic")),
            param_schema=schema,
            behavior=str(raw.get("behavior", "")),
            latency_model=raw.get("latency_model", 10),
            failure_rate=float(raw.get("failure_rate", 0.0)),
            resource_param=raw.get("resource_param"),
            equiv_tag=raw.get("equiv_tag"),
            cost_usd=float(raw.get("cost_usd", 0.0)),
        )


@dataclass(frozen=True)
class FaultSpec:
    """Declarative fault: fires on the nth call of a tool, or per-call by probability."""

    target_tool: str
    mode: str
    trigger: dict = field(default_factory=dict)
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in FAULT_MODES:
            raise SchemaViolation(f"fault on {self.target_tool}: mode must be one of {FAULT_MODES}")
        if "nth" not in self.trigger and "probability" not in self.trigger:
            raise SchemaViolation(f"fault on {self.target_tool}: trigger needs nth or probability")
        prob = self.trigger.get("probability")
        if prob is not None and not 0.0 <= float(prob) <= 1.0:
            raise SchemaViolation(f"fault on {self.target_tool}: probability out of [0, 1]")

    @classmethod
    def from_dict(cls, raw: dict) -> "FaultSpec":
        return cls(
            target_tool=str(raw["target_tool"]),
            mode=str(raw["mode"]),
            trigger=dict(raw.get("trigger", {})),
            payload=dict(raw.get("payload", {})),
        )


def _error_message(cause: str, action: str, resource: str, tag: str) -> str:
    return f"{cause}: {action} on {resource or '-'} ({tag})"


def _check_schema(tool: ToolDef, params: dict):
    type_ok = {
        "string": lambda v: isinstance(v, str),
        "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
        "boolean": lambda v: isinstance(v, bool),
    }
    for key, typ, required in tool.param_schema:
        if key not in params:
            if required:
                raise SchemaError(f"missing required parameter {key}")
            continue
        checker = type_ok.get(typ)
        if checker is not None and not checker(params[key]):
            raise SchemaError(f"parameter {key} must be of type {typ}")


# --- builtin behaviors --------------------------------------------------------
# Signature: behavior(world, params, ctx) -> result. Behaviors for diagnostic and
# audit tools must not mutate; the environment verifies the version afterwards.


def _need_instance(world: WorldState, iid: str) -> dict:
    inst = world.instances.get(iid)
    if inst is None:
        raise ToolError("unknown_resource", f"Unknown instance: {iid}")
    return inst


def _need_bucket(world: WorldState, bid: str) -> dict:
    bucket = world.buckets.get(bid)
    if bucket is None:
        raise ToolError("unknown_resource", f"Unknown bucket: {bid}")
    return bucket


def _bhv_list_instances(world, params, ctx):
    return [
        {"instance_id": iid, **{k: inst[k] for k in ("env", "state", "utilization_pct", "monthly_cost_usd")}}
        for iid, inst in sorted(world.instances.items())
    ]


def _bhv_describe_instance(world, params, ctx):
    iid = params["instance_id"]
    return {"instance_id": iid, **_need_instance(world, iid)}


def _bhv_get_cost_report(world, params, ctx):
    by_instance = {
        iid: inst["monthly_cost_usd"]
        for iid, inst in sorted(world.instances.items())
        if inst["state"] == "running"
    }
    return {"total_monthly_cost_usd": world.total_monthly_cost(), "by_instance": by_instance}


def _bhv_terminate_instance(world, params, ctx):
    world.set_instance_state(params["instance_id"], "terminated", ctx["t_ms"])
    return {"instance_id": params["instance_id"], "state": "terminated"}


def _bhv_stop_instance(world, params, ctx):
    world.set_instance_state(params["instance_id"], "stopped", ctx["t_ms"])
    return {"instance_id": params["instance_id"], "state": "stopped"}


def _bhv_start_instance(world, params, ctx):
    world.set_instance_state(params["instance_id"], "running", ctx["t_ms"])
    return {"instance_id": params["instance_id"], "state": "running"}


def _bhv_reboot_instance(world, params, ctx):
    iid = params["instance_id"]
    inst = _need_instance(world, iid)
    if inst["state"] == "terminated":
        raise ToolError("invalid_transition", f"Invalid transition: {iid} is terminated (terminal state)")
    world.record_change(ctx["t_ms"], iid, "instance rebooted")
    return {"instance_id": iid, "state": inst["state"]}


def _bhv_request_cab_approval(world, params, ctx):
    ticket = f"CAB-{ctx['call_index']:03d}"
    return {"ticket": ticket, "status": "approved", "summary": params.get("change_summary", "")}


def _bhv_list_buckets(world, params, ctx):
    return [
        {"bucket_id": bid, "public": b["public"], "logging": b["logging"], "sensitive": b["sensitive"]}
        for bid, b in sorted(world.buckets.items())
    ]


def _bhv_describe_bucket(world, params, ctx):
    bid = params["bucket_id"]
    return {"bucket_id": bid, **_need_bucket(world, bid)}


def _bhv_check_bucket_access(world, params, ctx):
    bid = params["bucket_id"]
    bucket = _need_bucket(world, bid)
    return {
        "bucket_id": bid,
        "public": bucket["public"],
        "sensitive": bucket["sensitive"],
        "logging": bucket["logging"],
        "exposed": bucket["public"] and bucket["sensitive"],
    }


def _bhv_enable_logging(world, params, ctx):
    bid = params["bucket_id"]
    bucket = _need_bucket(world, bid)
    bucket["logging"] = True
    world.record_change(ctx["t_ms"], bid, "access logging enabled")
    return {"bucket_id": bid, "logging": True}


def _bhv_apply_bucket_policy(world, params, ctx):
    bid = params["bucket_id"]
    bucket = _need_bucket(world, bid)
    public = bool(params.get("public", False))
    bucket["public"] = public
    bucket.setdefault("policy", {})
    bucket["policy"] = {"public_read": public}
    world.record_change(ctx["t_ms"], bid, f"bucket policy applied (public={str(public).lower()})")
    return {"bucket_id": bid, "public": public}


def _bhv_set_bucket_acl(world, params, ctx):
    bid = params["bucket_id"]
    bucket = _need_bucket(world, bid)
    bucket["public"] = bool(params.get("public", False))
    world.record_change(ctx["t_ms"], bid, f"bucket acl set (public={str(bucket['public']).lower()})")
    return {"bucket_id": bid, "public": bucket["public"]}


def _bhv_delete_bucket(world, params, ctx):
    bid = params["bucket_id"]
    _need_bucket(world, bid)
    del world.buckets[bid]
    world.record_change(ctx["t_ms"], bid, "bucket deleted")
    return {"bucket_id": bid, "deleted": True}


def _bhv_check_compliance(world, params, ctx):
    framework = params.get("framework", "general")
    return {
        "framework": framework,
        "requirements": [
            "enable access logging before policy changes",
            "public access requires explicit approval",
        ],
    }


def _bhv_check_metrics(world, params, ctx):
    svc = params["service"]
    metrics = world.metrics.get(svc)
    if metrics is None:
        raise ToolError("unknown_resource", f"Unknown service: {svc}")
    return {"service": svc, **{k: v for k, v in metrics.items() if not k.startswith("_")}}


def _bhv_get_change_log(world, params, ctx):
    since = int(params.get("since_t_ms", 0))
    return [entry for entry in world.change_log if entry["t_ms"] >= since]


def _bhv_describe_security_group(world, params, ctx):
    sid = params["sg_id"]
    group = world.security_groups.get(sid)
    if group is None:
        raise ToolError("unknown_resource", f"Unknown security group: {sid}")
    return {"sg_id": sid, **group}


def _bhv_modify_security_group(world, params, ctx):
    sid = params["sg_id"]
    group = world.security_groups.get(sid)
    if group is None:
        raise ToolError("unknown_resource", f"Unknown security group: {sid}")
    port, cidr, action = int(params["port"]), str(params["cidr"]), str(params["action"])
    rules = group.setdefault("rules", [])
    for rule in rules:
        if rule["port"] == port and rule["cidr"] == cidr:
            rule["action"] = action
            break
    else:
        rules.append({"port": port, "cidr": cidr, "action": action})
    world.record_change(ctx["t_ms"], sid, f"rule {action} {cidr} port {port}")
    if action == "allow":
        # a blocked dependency that is re-allowed heals the services it degraded
        key = f"{sid}:{port}:{cidr}"
        for svc in world.metrics.values():
            if svc.get("_degraded_by") == key:
                svc["response_time_ms"] = svc["baseline_ms"]
    return {"sg_id": sid, "rules": rules}


def _bhv_scale_service(world, params, ctx):
    svc = params["service"]
    metrics = world.metrics.get(svc)
    if metrics is None:
        raise ToolError("unknown_resource", f"Unknown service: {svc}")
    # treats the symptom: some headroom, never back to baseline
    metrics["response_time_ms"] = metrics["baseline_ms"] + 60
    world.record_change(ctx["t_ms"], svc, "service scaled out")
    return {"service": svc, "response_time_ms": metrics["response_time_ms"]}


def _bhv_lookup_runbook(world, params, ctx):
    return {
        "topic": params.get("topic", "incident"),
        "steps": ["inspect recent changes", "verify dependencies", "fix root cause before scaling"],
    }


BUILTIN_BEHAVIORS = {
    "list_instances": _bhv_list_instances,
    "describe_instance": _bhv_describe_instance,
    "get_cost_report": _bhv_get_cost_report,
    "terminate_instance": _bhv_terminate_instance,
    "stop_instance": _bhv_stop_instance,
    "start_instance": _bhv_start_instance,
    "reboot_instance": _bhv_reboot_instance,
    "request_cab_approval": _bhv_request_cab_approval,
    "list_buckets": _bhv_list_buckets,
    "describe_bucket": _bhv_describe_bucket,
    "check_bucket_access": _bhv_check_bucket_access,
    "enable_logging": _bhv_enable_logging,
    "apply_bucket_policy": _bhv_apply_bucket_policy,
    "set_bucket_acl": _bhv_set_bucket_acl,
    "delete_bucket": _bhv_delete_bucket,
    "check_compliance": _bhv_check_compliance,
    "check_metrics": _bhv_check_metrics,
    "get_change_log": _bhv_get_change_log,
    "describe_security_group": _bhv_describe_security_group,
    "modify_security_group": _bhv_modify_security_group,
    "scale_service": _bhv_scale_service,
    "lookup_runbook": _bhv_lookup_runbook,
}

# Reserved guardrail-event param keys; tool schemas must not reuse them.
GUARDRAIL_PARAM_KEYS = ("policy_id", "reason")


class Environment:
    """One run's worth of simulator state: world, registry, policies, clock, recorder."""

    def __init__(
        self,
        world: WorldState,
        registry: dict[str, ToolDef],
        policies: list[Policy] | None = None,
        faults: list[FaultSpec] | None = None,
        seed: int = 0,
        epoch_ms: int = DEFAULT_EPOCH_MS,
    ):
        self.world = world
        self.registry = dict(registry)
        self.policies = list(policies or [])
        self.faults = list(faults or [])
        self.rng = random.Random(seed)
        self.seed = seed
        self.clock_ms = epoch_ms
        self.spans: list[Span] = []
        self._seq = 0
        self._snapshots: dict[str, WorldState] = {}
        self._snap_counter = 0
        self._call_counts: dict[str, int] = {}
        self._fault_rngs: dict[int, random.Random] = {}

    # --- clock / recorder ------------------------------------------------------

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def advance(self, ms: int):
        if ms < 0:
            raise ValueError("clock only moves forward")
        self.clock_ms += ms

    def record(self, span: Span) -> Span:
        self.spans.append(span)
        return span

    def categories(self) -> dict[str, str]:
        return {name: tool.category for name, tool in self.registry.items()}

    # --- latency / fault draws ---------------------------------------------------

    def _draw_latency(self, model) -> int:
        if isinstance(model, dict):
            return self.rng.randint(int(model["min"]), int(model["max"]))
        return int(model)

    def _active_fault(self, tool_name: str, call_index: int) -> FaultSpec | None:
        for idx, fault in enumerate(self.faults):
            if fault.target_tool != tool_name:
                continue
            if "nth" in fault.trigger:
                if call_index == int(fault.trigger["nth"]):
                    return fault
            else:
                rng = self._fault_rngs.setdefault(
                    idx, random.Random(int(fault.trigger.get("seed", self.seed)))
                )
                if rng.random() < float(fault.trigger["probability"]):
                    return fault
        return None

    # --- the main entry point ----------------------------------------------------

    def execute_tool(self, name: str, params: dict, principal: str = "agent") -> Span:
        """Attempt one tool call; returns the recorded span.

        Order of checks: guardrail, parameter schema, fault layer, seeded
        failure rate, behavior. Denied or invalid attempts leave the world
        untouched; behaviors run against a working copy that is committed
        only on success, so errored calls cannot half-mutate state.
        """
        tool = self.registry.get(name)
        if tool is None:
            raise UnknownTool(name)
        params = dict(params)
        t_start = self.clock_ms
        resource_id = str(params.get(tool.resource_param, "")) if tool.resource_param else ""
        resource_env = self.world.resource_env(resource_id)
        approved = params.get("approved") is True

        decision = check_guardrail(
            self.policies, name, tool.category, resource_id, resource_env, principal, approved
        )
        if not decision.allowed:
            return self._deny_span(tool, params, principal, resource_id, decision, t_start)

        try:
            _check_schema(tool, params)
        except SchemaError as exc:
            return self._error_span(
                tool, params, principal, t_start, REJECT_LATENCY_MS,
                code="schema_error",
                message=_error_message("Invalid parameters", name, resource_id, str(exc)),
            )

        call_index = self._call_counts.get(name, 0) + 1
        self._call_counts[name] = call_index
        latency = self._draw_latency(tool.latency_model)
        fault = self._active_fault(name, call_index)

        if fault is not None and fault.mode == "latency_spike":
            latency += int(fault.payload.get("delay_ms", 100))
        if fault is not None and fault.mode == "error":
            code = str(fault.payload.get("code", "fault_injected"))
            return self._error_span(
                tool, params, principal, t_start, latency,
                code=code,
                message=_error_message(
                    str(fault.payload.get("cause", "Injected fault")), name, resource_id, code
                ),
            )
        if tool.failure_rate > 0 and self.rng.random() < tool.failure_rate:
            return self._error_span(
                tool, params, principal, t_start, latency,
                code="transient_failure",
                message=_error_message("Transient failure", name, resource_id, "transient_failure"),
            )

        working = self.world.clone()
        ctx = {"t_ms": t_start, "call_index": call_index, "env": self}
        try:
            result = BUILTIN_BEHAVIORS[tool.behavior_name](working, params, ctx)
        except KeyError as exc:
            raise UnknownTool(tool.behavior_name) from exc
        except ToolError as exc:
            return self._error_span(
                tool, params, principal, t_start, latency,
                code=exc.code,
                message=_error_message(str(exc).split(":")[0], name, resource_id, exc.code),
            )
        if tool.category != "action" and working.version != self.world.version:
            raise RuntimeError(f"{tool.category} tool {name} mutated world state")
        if fault is not None and fault.mode == "inconsistent_result":
            result = fault.payload.get("result", result)
        result = copy.deepcopy(result)  # span results must not alias live world state
        self.world = working
        self.advance(latency)
        return self.record(
            Span(
                seq=self.next_seq(),
                kind=SpanKind.TOOL_CALL,
                agent_id=principal,
                name=name,
                params=params,
                result=result,
                t_start=t_start,
                t_end=t_start + latency,
            )
        )

    def _deny_span(self, tool, params, principal, resource_id, decision: GuardrailDecision, t_start):
        causes = {
            "requires_approval": "Approval required",
            "explicit_deny": "Guardrail denied",
            "default_deny": "Guardrail denied",
            "principal_mismatch": "Principal not authorized",
        }
        tag = decision.policy_id or decision.reason
        message = _error_message(causes[decision.reason], tool.name, resource_id, tag)
        self.advance(REJECT_LATENCY_MS)
        span_params = dict(params)
        span_params["policy_id"] = decision.policy_id or ""
        span_params["reason"] = decision.reason
        return self.record(
            Span(
                seq=self.next_seq(),
                kind=SpanKind.GUARDRAIL_EVENT,
                agent_id=principal,
                name=tool.name,
                params=span_params,
                error={"code": "guardrail_denied", "message": message},
                t_start=t_start,
                t_end=t_start + REJECT_LATENCY_MS,
            )
        )

    def _error_span(self, tool, params, principal, t_start, latency, code, message):
        self.advance(latency)
        return self.record(
            Span(
                seq=self.next_seq(),
                kind=SpanKind.TOOL_CALL,
                agent_id=principal,
                name=tool.name,
                params=params,
                error={"code": code, "message": message},
                t_start=t_start,
                t_end=t_start + latency,
            )
        )

    # --- snapshots -----------------------------------------------------------------

    def snapshot(self) -> str:
        """Full deep copy keyed by a fresh id (diff-based storage rejected for fidelity)."""
        self._snap_counter += 1
        snap_id = f"snap-{self._snap_counter:03d}"
        self._snapshots[snap_id] = self.world.clone()
        return snap_id

    def reset(self, snapshot_id: str) -> WorldState:
        stored = self._snapshots.get(snapshot_id)
        if stored is None:
            raise UnknownSnapshot(snapshot_id)
        self.world = stored.clone()
        return self.world

    # --- read-only inspection --------------------------------------------------------

    def inspect(self, query: dict):
        """Read-only lens for judges: state paths, change log, or the tool log."""
        if "path" in query:
            return self.world.resolve_path(query["path"])
        if "change_log_since" in query:
            since = int(query["change_log_since"])
            return [e for e in self.world.change_log if e["t_ms"] >= since]
        if "tool_log_filter" in query:
            spec = query["tool_log_filter"] or {}
            out = []
            for span in self.spans:
                if span.kind is not SpanKind.TOOL_CALL:
                    continue
                if spec.get("name") and not glob_match(spec["name"], span.name):
                    continue
                if spec.get("agent_id") and span.agent_id != spec["agent_id"]:
                    continue
                out.append(
                    {
                        "seq": span.seq,
                        "name": span.name,
                        "params": dict(span.params),
                        "error_code": span.error["code"] if span.error else None,
                    }
                )
            return out
        raise BadPath(str(query))
