"""Scripted and live agents that drive the simulated environment.

Scripted agents replay deterministic step lists (optionally several variants
across runs, to model run-to-run spread) and are the substrate for failure
injection. The live adapter speaks an OpenAI-style chat wire protocol and is
excluded from the deterministic test surface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .envsim import Environment
from .errors import BackendUnavailable, SchemaViolation, UnknownTarget
from .memory_store import MemoryStore
from .scenario import ScenarioSpec
from .trace import ExecutionTrace, Span, SpanKind, TokenUsage

STEP_ACTIONS = ("tool", "memory_read", "memory_write", "llm_note")

INJECTION_KINDS = (
    "skip_policy_lookup",
    "wrong_param",
    "reorder_tools",
    "omit_mandatory_call",
    "duplicate_memory_write",
    "attempt_guarded_action",
    "skip_memory_lookup",
)

DEFAULT_READ_LATENCY_MS = 4
DEFAULT_WRITE_LATENCY_MS = 6
DEFAULT_NOTE_MS = 40


@dataclass(frozen=True)
class ScriptStep:
    action: str
    name: str = ""
    params: dict = field(default_factory=dict)
    query_keywords: tuple = ()
    k: int = 3
    content: str = ""
    tags: tuple = ()
    dedup: bool = True
    intent_update: bool = False
    usage: TokenUsage | None = None
    think_ms: int = 0
    agent_id: str | None = None
    label: str | None = None

    def __post_init__(self):
        if self.action not in STEP_ACTIONS:
            raise SchemaViolation(f"step action must be one of {STEP_ACTIONS}")

    @classmethod
    def from_dict(cls, raw: dict) -> "ScriptStep":
        usage = None
        if raw.get("usage"):
            usage = TokenUsage(
                int(raw["usage"].get("input_tokens", 0)),
                int(raw["usage"].get("output_tokens", 0)),
            )
        return cls(
            action=str(raw.get("action", "")),
            name=str(raw.get("name", "")),
            params=dict(raw.get("params", {})),
            query_keywords=tuple(raw.get("query", raw.get("query_keywords", []))),
            k=int(raw.get("k", 3)),
            content=str(raw.get("content", "")),
            tags=tuple(raw.get("tags", [])),
            dedup=bool(raw.get("dedup", True)),
            intent_update=bool(raw.get("intent_update", False)),
            usage=usage,
            think_ms=int(raw.get("think_ms", 0)),
            agent_id=raw.get("agent_id"),
            label=raw.get("label"),
        )


@dataclass(frozen=True)
class FailureInjection:
    """One targeted degradation of a script; each kind stresses one pillar."""

    kind: str
    target: object  # step index or step label/name

    def __post_init__(self):
        if self.kind not in INJECTION_KINDS:
            raise SchemaViolation(f"unknown injection kind: {self.kind}")


def _resolve_target(steps: list[ScriptStep], target) -> int:
    if isinstance(target, int):
        if 0 <= target < len(steps):
            return target
        raise UnknownTarget(target)
    for idx, step in enumerate(steps):
        if step.label == target or step.name == target:
            return idx
    raise UnknownTarget(target)


def _corrupt(value):
    if isinstance(value, bool):
        return not value
    if isinstance(value, (int, float)):
        return value + 1
    return f"wrong-{value}"


def inject(steps: list[ScriptStep], injection: FailureInjection) -> list[ScriptStep]:
    """Pure transform; the input step list is never modified.

    skip_policy_lookup / skip_memory_lookup / omit_mandatory_call drop the
    target step; wrong_param corrupts the target's first parameter (the
    approval flag is never the one corrupted); reorder_tools swaps the target
    with the following step; duplicate_memory_write re-issues the target write
    with dedup off; attempt_guarded_action strips the approval flag so the
    attempt runs into the guardrail.
    """
    out = list(steps)
    idx = _resolve_target(out, injection.target)
    step = out[idx]
    kind = injection.kind

    if kind in ("skip_policy_lookup", "skip_memory_lookup", "omit_mandatory_call"):
        del out[idx]
    elif kind == "wrong_param":
        keys = [k for k in step.params if k != "approved"]
        if not keys:
            raise UnknownTarget(injection.target)
        params = dict(step.params)
        params[keys[0]] = _corrupt(params[keys[0]])
        out[idx] = replace(step, params=params)
    elif kind == "reorder_tools":
        if idx + 1 >= len(out):
            raise UnknownTarget(injection.target)
        out[idx], out[idx + 1] = out[idx + 1], out[idx]
    elif kind == "duplicate_memory_write":
        if step.action != "memory_write":
            raise UnknownTarget(injection.target)
        out.insert(idx + 1, replace(step, dedup=False, label=None))
    else:  # attempt_guarded_action
        params = {k: v for k, v in step.params.items() if k != "approved"}
        out[idx] = replace(step, params=params)
    return out


# --- script documents -------------------------------------------------------------


@dataclass
class Script:
    """A script document: one or more step-list variants plus worker bindings."""

    agent_id: str = "agent"
    variants: list = field(default_factory=list)  # list[list[ScriptStep]]
    capability_steps: dict = field(default_factory=dict)

    def steps_for_run(self, run_index: int) -> list[ScriptStep]:
        if not self.variants:
            raise SchemaViolation("script has no steps")
        return self.variants[run_index % len(self.variants)]


def script_from_dict(raw: dict) -> Script:
    if not isinstance(raw, dict):
        raise SchemaViolation("script document must be a mapping")
    agent_id = str(raw.get("agent_id", "agent"))
    variants: list[list[ScriptStep]] = []
    if "steps" in raw:
        variants.append([ScriptStep.from_dict(s) for s in raw["steps"]])
    for variant in raw.get("variants", []):
        if "steps" in variant:
            variants.append([ScriptStep.from_dict(s) for s in variant["steps"]])
        elif "inject" in variant:
            base = variants[int(variant.get("base", 0))]
            steps = base
            for inj in variant["inject"]:
                steps = inject(steps, FailureInjection(str(inj["kind"]), inj["target"]))
            variants.append(steps)
        else:
            raise SchemaViolation("script variants need steps or inject")
    if not variants:
        raise SchemaViolation("script document needs steps or variants")
    capability_steps = {
        str(cap): [ScriptStep.from_dict(s) for s in steps]
        for cap, steps in raw.get("capability_steps", {}).items()
    }
    return Script(agent_id=agent_id, variants=variants, capability_steps=capability_steps)


def load_script(path) -> Script:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    return script_from_dict(raw)


# --- step execution ----------------------------------------------------------------


def _draw(env: Environment, model) -> int:
    if isinstance(model, dict):
        return env.rng.randint(int(model["min"]), int(model["max"]))
    return int(model)


def execute_steps(
    steps: list[ScriptStep],
    env: Environment,
    store: MemoryStore,
    settings: dict | None = None,
    default_agent: str = "agent",
):
    """Run steps against the environment, recording one span per step.

    Environment errors surface inside spans; a step never aborts the run.
    """
    settings = settings or {}
    read_latency = settings.get("read_latency_ms", DEFAULT_READ_LATENCY_MS)
    write_latency = settings.get("write_latency_ms", DEFAULT_WRITE_LATENCY_MS)

    for step in steps:
        agent = step.agent_id or default_agent
        if step.action == "tool":
            if step.think_ms:
                env.advance(step.think_ms)
            env.execute_tool(step.name, step.params, principal=agent)
            continue

        if step.action == "llm_note":
            duration = step.think_ms or DEFAULT_NOTE_MS
            t_start = env.clock_ms
            env.advance(duration)
            env.record(
                Span(
                    seq=env.next_seq(),
                    kind=SpanKind.LLM_CALL,
                    agent_id=agent,
                    name=step.name or "scripted-llm",
                    params={"note": step.content} if step.content else {},
                    result=None,
                    t_start=t_start,
                    t_end=env.clock_ms,
                    usage=step.usage,
                )
            )
            continue

        if step.think_ms:
            env.advance(step.think_ms)
        t_start = env.clock_ms
        if step.action == "memory_read":
            hits = store.read(step.query_keywords, step.k)
            latency = _draw(env, read_latency)
            env.advance(latency)
            env.record(
                Span(
                    seq=env.next_seq(),
                    kind=SpanKind.MEMORY_READ,
                    agent_id=agent,
                    name="memory",
                    params={"query": " ".join(step.query_keywords), "k": step.k},
                    result={
                        "item_ids": [h["item_id"] for h in hits],
                        "contents": [h["content"] for h in hits],
                    },
                    t_start=t_start,
                    t_end=env.clock_ms,
                )
            )
        else:  # memory_write
            item_id, updated, version = store.write(
                step.content, step.tags, t_ms=env.clock_ms, dedup=step.dedup
            )
            latency = _draw(env, write_latency)
            env.advance(latency)
            env.record(
                Span(
                    seq=env.next_seq(),
                    kind=SpanKind.MEMORY_WRITE,
                    agent_id=agent,
                    name="memory",
                    params={
                        "tags": " ".join(step.tags),
                        "dedup": step.dedup,
                        "intent_update": step.intent_update,
                    },
                    result={"item_id": item_id, "updated": updated, "version": version},
                    t_start=t_start,
                    t_end=env.clock_ms,
                )
            )


@dataclass
class RunResult:
    trace: ExecutionTrace
    env: Environment
    store: MemoryStore


def run_scripted(
    script: Script | list[ScriptStep],
    scenario: ScenarioSpec,
    seed: int = 0,
    run_id: str = "run-1",
    run_index: int = 0,
) -> RunResult:
    """Execute one scripted run in a fresh environment; fully deterministic."""
    if isinstance(script, Script):
        steps = script.steps_for_run(run_index)
        default_agent = script.agent_id
    else:
        steps = script
        default_agent = "agent"
    env = Environment(
        world=scenario.world_init.clone(),
        registry=scenario.tool_registry,
        policies=scenario.policies,
        faults=scenario.faults,
        seed=seed,
        epoch_ms=scenario.epoch_ms,
    )
    store = MemoryStore.seeded(
        scenario.memory_seed,
        dedup_threshold=float(scenario.memory_settings.get("dedup_threshold", 0.5)),
    )
    execute_steps(steps, env, store, scenario.memory_settings, default_agent)
    final_ref = env.snapshot()
    trace = ExecutionTrace(
        run_id=run_id,
        scenario_id=scenario.scenario_id,
        spans=list(env.spans),
        wall_time_ms=env.clock_ms - scenario.epoch_ms,
        final_state_ref=final_ref,
    )
    return RunResult(trace=trace, env=env, store=store)


class ScriptedAgent:
    """Replays a script document; variant i serves run i (mod variant count)."""

    def __init__(self, script: Script, source: str = "scripted"):
        self.script = script
        self.source = source

    @classmethod
    def from_file(cls, path) -> "ScriptedAgent":
        return cls(load_script(path), source=f"scripted:{Path(path).name}")

    def run_once(self, scenario: ScenarioSpec, seed: int, run_index: int, run_id: str) -> RunResult:
        return run_scripted(self.script, scenario, seed=seed, run_id=run_id, run_index=run_index)

    def worker(self):
        if not self.script.capability_steps:
            return None
        return ScriptedWorker(self.script.capability_steps, self.script.agent_id)


class ScriptedWorker:
    """Capability-test worker: maps capability ids (named in the instruction) to steps."""

    def __init__(self, capability_steps: dict, agent_id: str = "worker"):
        self.capability_steps = capability_steps
        self.agent_id = agent_id

    def __call__(self, instruction: str, env: Environment, store: MemoryStore):
        for cap_id, steps in self.capability_steps.items():
            if f"[{cap_id}]" in instruction:
                execute_steps(steps, env, store, {}, self.agent_id)
                return
        # unknown capability: the worker does nothing, so its checks fail


# --- live agent adapter --------------------------------------------------------------


LIVE_SYSTEM_PROMPT = """You operate tools in a simulated cloud environment.
Objective: {objective}
Tools:
{tools}
Reply with exactly one JSON object per turn, no prose:
  {{"action": "tool", "name": "<tool>", "params": {{...}}}}
  {{"action": "memory_read", "query": ["kw", ...], "k": 3}}
  {{"action": "memory_write", "content": "...", "tags": ["..."]}}
  {{"action": "done"}}
"""


def extract_action(text: str) -> dict:
    """Pull the first JSON object out of a model reply."""
    start = text.find("{")
    if start < 0:
        raise ValueError("no JSON object in reply")
    depth = 0
    for idx in range(start, len(text)):
        if text[idx] == "{":
            depth += 1
        elif text[idx] == "}":
            depth -= 1
            if depth == 0:
                return json.loads(text[start : idx + 1])
    raise ValueError("unbalanced JSON object in reply")


class LiveAgent:
    """Drives a remote chat-completions endpoint through the action protocol."""

    def __init__(self, base_url: str, api_key: str = "", model: str = "live-agent", max_turns: int = 40):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.max_turns = max_turns
        self.source = f"live:{base_url}"

    def _chat(self, messages: list[dict]) -> tuple[str, TokenUsage]:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(
                f"{self.base_url}/chat/completions",
                json={"model": self.model, "messages": messages, "temperature": 0},
                headers=headers,
                timeout=60,
            )
            resp.raise_for_status()
            body = resp.json()
        except Exception as exc:  # noqa: BLE001 - network failures collapse to one error
            raise BackendUnavailable(f"live agent endpoint failed: {exc}") from exc
        usage = body.get("usage", {})
        return (
            body["choices"][0]["message"]["content"],
            TokenUsage(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))),
        )

    def run_once(self, scenario: ScenarioSpec, seed: int, run_index: int, run_id: str) -> RunResult:
        env = Environment(
            world=scenario.world_init.clone(),
            registry=scenario.tool_registry,
            policies=scenario.policies,
            faults=scenario.faults,
            seed=seed,
            epoch_ms=scenario.epoch_ms,
        )
        store = MemoryStore.seeded(
            scenario.memory_seed,
            dedup_threshold=float(scenario.memory_settings.get("dedup_threshold", 0.5)),
        )
        tool_lines = "\n".join(
            f"- {t.name} ({t.category}): {t.description}" for t in scenario.tool_registry.values()
        )
        messages = [
            {
                "role": "system",
                "content": LIVE_SYSTEM_PROMPT.format(
                    objective=scenario.objective.description or scenario.title, tools=tool_lines
                ),
            },
            {"role": "user", "content": "Begin."},
        ]
        for _ in range(self.max_turns):
            text, usage = self._chat(messages)
            t_start = env.clock_ms
            env.advance(DEFAULT_NOTE_MS)
            env.record(
                Span(
                    seq=env.next_seq(),
                    kind=SpanKind.LLM_CALL,
                    agent_id=self.model,
                    name=self.model,
                    params={},
                    t_start=t_start,
                    t_end=env.clock_ms,
                    usage=usage,
                )
            )
            messages.append({"role": "assistant", "content": text})
            try:
                action = extract_action(text)
            except (ValueError, json.JSONDecodeError):
                messages.append({"role": "user", "content": "Reply with one JSON action object."})
                continue
            kind = action.get("action")
            if kind == "done":
                break
            if kind == "tool":
                span = env.execute_tool(str(action.get("name", "")), dict(action.get("params", {})), self.model)
                observation = {"result": span.result, "error": span.error}
            elif kind == "memory_read":
                step = ScriptStep(action="memory_read", query_keywords=tuple(action.get("query", [])), k=int(action.get("k", 3)))
                execute_steps([step], env, store, scenario.memory_settings, self.model)
                observation = env.spans[-1].result
            elif kind == "memory_write":
                step = ScriptStep(
                    action="memory_write",
                    content=str(action.get("content", "")),
                    tags=tuple(action.get("tags", [])),
                )
                execute_steps([step], env, store, scenario.memory_settings, self.model)
                observation = env.spans[-1].result
            else:
                observation = {"error": f"unknown action: {kind}"}
            messages.append({"role": "user", "content": json.dumps(observation, default=str)})
        final_ref = env.snapshot()
        trace = ExecutionTrace(
            run_id=run_id,
            scenario_id=scenario.scenario_id,
            spans=list(env.spans),
            wall_time_ms=env.clock_ms - scenario.epoch_ms,
            final_state_ref=final_ref,
        )
        return RunResult(trace=trace, env=env, store=store)

    def worker(self):
        return None
