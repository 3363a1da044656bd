"""agentassess: a desk-scale assessment harness for tool-using agents.

Runs scripted or live agents inside a deterministic CloudOps simulator,
records execution traces, scores four pillars (reasoning, memory, tools,
environment), attributes failures, and renders reproducible reports.
"""

from .agents import (
    FailureInjection,
    LiveAgent,
    Script,
    ScriptedAgent,
    ScriptedWorker,
    ScriptStep,
    inject,
    load_script,
    run_scripted,
)
from .envsim import Environment, FaultSpec, ToolDef
from .errors import AssessError
from .guardrails import Policy, check_guardrail
from .harness import FailureEvent, compare_baseline, evaluate_run, render, run_assessment
from .judges import (
    HttpChatBackend,
    JudgeVerdict,
    MockJudgeBackend,
    agent_judge,
    llm_judge,
    mock_judge_rubric,
)
from .memory_store import MemoryStore
from .scenario import (
    GoldenContract,
    ObjectivePredicate,
    ScenarioSpec,
    bundled_scenario_path,
    generate_test_cases,
    load_scenario,
    ships_scenarios,
)
from .trace import (
    AgentCard,
    ExecutionTrace,
    Span,
    SpanKind,
    TokenUsage,
    parse_trace,
    preceding,
    serialize_trace,
    slice_trace,
)
from .world import WorldState

__version__ = "0.1.0"

__all__ = [
    "AgentCard",
    "AssessError",
    "Environment",
    "ExecutionTrace",
    "FailureEvent",
    "FailureInjection",
    "FaultSpec",
    "GoldenContract",
    "HttpChatBackend",
    "JudgeVerdict",
    "LiveAgent",
    "MemoryStore",
    "MockJudgeBackend",
    "ObjectivePredicate",
    "Policy",
    "ScenarioSpec",
    "Script",
    "ScriptStep",
    "ScriptedAgent",
    "ScriptedWorker",
    "Span",
    "SpanKind",
    "TokenUsage",
    "ToolDef",
    "WorldState",
    "agent_judge",
    "bundled_scenario_path",
    "check_guardrail",
    "compare_baseline",
    "evaluate_run",
    "generate_test_cases",
    "inject",
    "llm_judge",
    "load_scenario",
    "load_script",
    "mock_judge_rubric",
    "parse_trace",
    "preceding",
    "render",
    "run_assessment",
    "run_scripted",
    "serialize_trace",
    "ships_scenarios",
    "slice_trace",
    "__version__",
]
