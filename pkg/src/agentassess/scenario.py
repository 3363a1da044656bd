"""Scenario documents: world, tools, policies, objective, and golden contract.

A scenario is one YAML document. ``load_scenario`` validates shape and
cross-references (every contract name must resolve, order constraints must be
acyclic, gold memory ids must exist in the seeded corpus) so downstream
metric engines can trust the loaded ScenarioSpec blindly.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .checks import CheckSpec
from .envsim import BUILTIN_BEHAVIORS, FaultSpec, ToolDef, DEFAULT_EPOCH_MS
from .errors import BadPath, CyclicOrderConstraint, DanglingReference, SchemaViolation
from .guardrails import Policy
from .trace import AgentCard
from .world import WorldState

MECHANISMS = ("single_hop", "multi_hop", "temporal", "open_domain")
OBJECTIVE_OPS = ("eq", "neq", "lte", "gte", "contains", "absent")
PILLARS = ("llm", "memory", "tools", "environment")

_TOP_LEVEL_KEYS = {
    "scenario_id", "title", "world_init", "tools", "policies", "objective",
    "contract", "faults", "runs",
    # optional extensions (see decisions ledger): seeded memory corpus,
    # store settings, and an attached agent card for capability audits
    "memory_seed", "memory", "agent_card",
}


@dataclass(frozen=True)
class ObjectiveAssertion:
    path: str
    op: str
    value: object = None

    def __post_init__(self):
        if self.op not in OBJECTIVE_OPS:
            raise SchemaViolation(f"objective op must be one of {OBJECTIVE_OPS}, got {self.op!r}")

    def holds(self, world: WorldState) -> bool:
        if self.op == "absent":
            return not world.path_exists(self.path)
        actual = world.resolve_path(self.path)  # BadPath propagates: scenario bug
        if self.op == "eq":
            return actual == self.value
        if self.op == "neq":
            return actual != self.value
        if self.op == "lte":
            return actual <= self.value
        if self.op == "gte":
            return actual >= self.value
        # contains: substring for strings, membership for collections
        if isinstance(actual, str):
            return str(self.value) in actual
        return self.value in actual


@dataclass
class ObjectivePredicate:
    description: str = ""
    assertions: list[ObjectiveAssertion] = field(default_factory=list)

    def holds(self, world: WorldState) -> bool:
        return all(a.holds(world) for a in self.assertions)

    @classmethod
    def from_dict(cls, raw: dict) -> "ObjectivePredicate":
        assertions = [
            ObjectiveAssertion(str(a["path"]), str(a["op"]), a.get("value"))
            for a in raw.get("assertions", [])
        ]
        return cls(description=str(raw.get("description", "")), assertions=assertions)


@dataclass
class GoldenContract:
    """Everything the assessed agent is expected to do, declaratively."""

    required_tools: list[str] = field(default_factory=list)
    mandatory_calls: list[dict] = field(default_factory=list)
    order_constraints: list[dict] = field(default_factory=list)
    policy_gated_actions: list[dict] = field(default_factory=list)
    dependency_gated_actions: list[dict] = field(default_factory=list)
    memory_gold: list[dict] = field(default_factory=list)
    safety_rules: list[dict] = field(default_factory=list)
    recovery_map: dict = field(default_factory=dict)
    alias_map: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    classification_cases: list[dict] = field(default_factory=list)

    @classmethod
    def from_dict(cls, raw: dict) -> "GoldenContract":
        return cls(
            required_tools=[str(t) for t in raw.get("required_tools", [])],
            mandatory_calls=list(raw.get("mandatory_calls", [])),
            order_constraints=list(raw.get("order_constraints", [])),
            policy_gated_actions=list(raw.get("policy_gated_actions", [])),
            dependency_gated_actions=list(raw.get("dependency_gated_actions", [])),
            memory_gold=list(raw.get("memory_gold", [])),
            safety_rules=list(raw.get("safety_rules", [])),
            recovery_map=dict(raw.get("recovery_map", {})),
            alias_map=dict(raw.get("alias_map", {})),
            thresholds=dict(raw.get("thresholds", {})),
            classification_cases=list(raw.get("classification_cases", [])),
        )


@dataclass
class ScenarioSpec:
    scenario_id: str
    title: str
    world_init: WorldState
    tool_registry: dict
    policies: list
    objective: ObjectivePredicate
    contract: GoldenContract
    faults: list = field(default_factory=list)
    runs: int = 3
    memory_seed: list = field(default_factory=list)
    memory_settings: dict = field(default_factory=dict)
    agent_card: AgentCard | None = None
    epoch_ms: int = DEFAULT_EPOCH_MS

    def categories(self) -> dict:
        return {name: t.category for name, t in self.tool_registry.items()}


@dataclass(frozen=True)
class TestCase:
    case_id: str
    pillar: str
    stimulus: str
    setup: dict = field(default_factory=dict)
    success: tuple = ()

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "pillar": self.pillar,
            "stimulus": self.stimulus,
            "setup": dict(self.setup),
            "success": [c.to_dict() for c in self.success],
        }


def _detect_cycle(constraints: list[dict]):
    edges: dict[str, list[str]] = {}
    for c in constraints:
        edges.setdefault(str(c["before"]), []).append(str(c["after"]))
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in edges}
    stack: list[str] = []

    def visit(node: str):
        color[node] = GRAY
        stack.append(node)
        for nxt in edges.get(node, []):
            state = color.get(nxt, WHITE)
            if state == GRAY:
                cycle = stack[stack.index(nxt):] + [nxt]
                raise CyclicOrderConstraint(cycle)
            if state == WHITE:
                color[nxt] = WHITE
                visit(nxt)
        stack.pop()
        color[node] = BLACK

    for node in list(edges):
        if color.get(node, WHITE) == WHITE:
            visit(node)


def _validate_contract(contract: GoldenContract, spec: ScenarioSpec):
    tools = set(spec.tool_registry)
    for name in contract.required_tools:
        if name not in tools:
            raise DanglingReference("tool", name)
    for call in contract.mandatory_calls:
        if str(call.get("tool")) not in tools:
            raise DanglingReference("tool", str(call.get("tool")))
    for c in contract.order_constraints:
        for side in ("before", "after"):
            if str(c.get(side)) not in tools:
                raise DanglingReference("tool", str(c.get(side)))
    _detect_cycle(contract.order_constraints)
    for gated in contract.policy_gated_actions + contract.dependency_gated_actions:
        if str(gated.get("action_tool")) not in tools:
            raise DanglingReference("tool", str(gated.get("action_tool")))
        if not gated.get("lookup_pattern"):
            raise SchemaViolation("gated actions need a non-empty lookup_pattern")
    seeded = {str(e["id"]) for e in spec.memory_seed}
    for entry in contract.memory_gold:
        if entry.get("mechanism") not in MECHANISMS:
            raise SchemaViolation(f"memory_gold mechanism must be one of {MECHANISMS}")
        if not entry.get("query_keywords"):
            raise SchemaViolation("memory_gold entries need query_keywords")
        for item_id in entry.get("gold_items", []):
            if str(item_id) not in seeded:
                raise DanglingReference("memory item", str(item_id))
    for code, nxt in contract.recovery_map.items():
        for name in nxt:
            if name not in tools:
                raise DanglingReference("tool", str(name))
    for alias, value in contract.alias_map.items():
        if value in contract.alias_map and contract.alias_map[value] != value:
            raise SchemaViolation(f"alias map must be one level deep ({alias} -> {value})")
    for rule in contract.safety_rules:
        if "rule_id" not in rule or "tool_pattern" not in rule:
            raise SchemaViolation("safety rules need rule_id and tool_pattern")


def _validate_objective(objective: ObjectivePredicate, world: WorldState):
    for a in objective.assertions:
        if a.op == "absent":
            parent = ".".join(a.path.split(".")[:-1])
            if parent and not world.path_exists(parent):
                raise BadPath(a.path)
        elif not world.path_exists(a.path):
            raise BadPath(a.path)


def scenario_from_dict(raw: dict) -> ScenarioSpec:
    if not isinstance(raw, dict):
        raise SchemaViolation("scenario document must be a mapping")
    unknown = set(raw) - _TOP_LEVEL_KEYS
    if unknown:
        raise SchemaViolation(f"unknown scenario keys: {sorted(unknown)}")
    for key in ("scenario_id", "title", "world_init", "tools", "objective", "contract"):
        if key not in raw:
            raise SchemaViolation(f"scenario document missing {key}")
    runs = int(raw.get("runs", 3))
    if runs < 1:
        raise SchemaViolation("runs must be >= 1")

    world = WorldState.from_dict(raw["world_init"])
    registry: dict[str, ToolDef] = {}
    for tool_raw in raw["tools"]:
        tool = ToolDef.from_dict(tool_raw)
        if tool.name in registry:
            raise SchemaViolation(f"duplicate tool: {tool.name}")
        if tool.behavior_name not in BUILTIN_BEHAVIORS:
            raise DanglingReference("behavior", tool.behavior_name)
        registry[tool.name] = tool
    policies = [Policy.from_dict(p) for p in raw.get("policies", [])]
    faults = [FaultSpec.from_dict(f) for f in raw.get("faults", [])]
    for fault in faults:
        if fault.target_tool not in registry:
            raise DanglingReference("tool", fault.target_tool)

    memory_seed = list(raw.get("memory_seed", []))
    seen_ids = set()
    for entry in memory_seed:
        if "id" not in entry:
            raise SchemaViolation("memory_seed entries need an id")
        if entry["id"] in seen_ids:
            raise SchemaViolation(f"duplicate memory_seed id: {entry['id']}")
        seen_ids.add(entry["id"])

    card = None
    if raw.get("agent_card"):
        card = AgentCard.from_dict(raw["agent_card"])
        for name in card.tools:
            if name not in registry:
                raise DanglingReference("tool", name)

    spec = ScenarioSpec(
        scenario_id=str(raw["scenario_id"]),
        title=str(raw["title"]),
        world_init=world,
        tool_registry=registry,
        policies=policies,
        objective=ObjectivePredicate.from_dict(raw["objective"]),
        contract=GoldenContract.from_dict(raw["contract"]),
        faults=faults,
        runs=runs,
        memory_seed=memory_seed,
        memory_settings=dict(raw.get("memory", {})),
        agent_card=card,
    )
    _validate_contract(spec.contract, spec)
    _validate_objective(spec.objective, world)
    return spec


def load_scenario(path) -> ScenarioSpec:
    """Load and validate one scenario document from disk."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaViolation(f"invalid scenario document: {exc}") from exc
    return scenario_from_dict(raw)


def generate_test_cases(spec: ScenarioSpec) -> list[TestCase]:
    """One deterministic test case per contract obligation, grouped by pillar.

    llm <- policy-gated actions, memory <- gold entries, tools <- mandatory
    calls and order constraints, environment <- deny policies. Case order
    follows contract declaration order, so output is reproducible.
    """
    contract = spec.contract
    cases: list[TestCase] = []

    def add(pillar: str, stimulus: str, success: list[CheckSpec]):
        case_id = f"{spec.scenario_id}-{pillar}-{sum(1 for c in cases if c.pillar == pillar) + 1:02d}"
        cases.append(TestCase(case_id, pillar, stimulus, {}, tuple(success)))

    for gated in contract.policy_gated_actions:
        add(
            "llm",
            f"consult policy guidance before invoking {gated['action_tool']}",
            [
                CheckSpec(
                    "memory_query_matches",
                    {
                        "keywords": list(gated["lookup_pattern"]),
                        "before_tool": gated["action_tool"],
                        "sources": list(gated.get("sources", ["memory", "audit"])),
                    },
                )
            ],
        )
    for entry in contract.memory_gold:
        add(
            "memory",
            f"recall {entry['mechanism']} knowledge for {' '.join(entry['query_keywords'])}",
            [
                CheckSpec(
                    "memory_query_matches",
                    {"keywords": list(entry["query_keywords"]), "mode": "any"},
                )
            ],
        )
    for call in contract.mandatory_calls:
        add(
            "tools",
            f"invoke {call['tool']} with the contracted parameters",
            [
                CheckSpec(
                    "tool_log_contains",
                    {"tool": call["tool"], "params": dict(call.get("required_params", {}))},
                )
            ],
        )
    for c in contract.order_constraints:
        args = {"tool": c["after"], "preceded_by": c["before"]}
        if c.get("scope"):
            args["scope"] = c["scope"]
        add("tools", f"run {c['before']} before {c['after']}", [CheckSpec("tool_log_contains", args)])
    for policy in spec.policies:
        if policy.effect == "deny":
            add(
                "environment",
                f"never trip guardrail policy {policy.policy_id}",
                [CheckSpec("span_absent", {"kind": "guardrail_event", "policy_id": policy.policy_id})],
            )
    return cases


# --- bundled fixtures -----------------------------------------------------------


def bundled_scenario_path(name: str) -> Path:
    """Resolve a bundled scenario (s1_cost, s2_security, s3_rca) or script path."""
    root = importlib.resources.files("agentassess") / "scenarios"
    candidate = root / name
    if candidate.is_file():
        return Path(str(candidate))
    candidate = root / f"{name}.yaml"
    if candidate.is_file():
        return Path(str(candidate))
    candidate = root / "scripts" / f"{name}.yaml"
    if candidate.is_file():
        return Path(str(candidate))
    raise FileNotFoundError(f"no bundled document named {name}")


def ships_scenarios() -> dict[str, ScenarioSpec]:
    """The three bundled CloudOps scenarios, keyed by scenario_id."""
    out = {}
    for name in ("s1_cost", "s2_security", "s3_rca"):
        spec = load_scenario(bundled_scenario_path(name))
        out[spec.scenario_id] = spec
    return out
