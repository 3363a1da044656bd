"""Assessment orchestration: run an agent N times, score, attribute, report.

Reports are plain dicts with a fixed construction order and no wall-clock
timestamps, so identical inputs serialize to identical bytes.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass

from .efficiency import (
    DEFAULT_PRICING,
    compute_cost,
    format_ratio,
    overhead_report,
    run_costs,
)
from .errors import AssessError, EmptyCard
from .judges import JudgeVerdict, MockJudgeBackend, agent_judge, llm_judge
from .metrics.environment import environment_metrics
from .metrics.llm import llm_metrics
from .metrics.memory import memory_metrics
from .metrics.tools import tools_metrics
from .scenario import ScenarioSpec, generate_test_cases
from .trace import unknown_tool_names
from .util import mean_exact

PILLAR_ORDER = ("llm", "memory", "tools", "environment")

# threshold name -> location in the framework metric block
FRAMEWORK_METRIC_PATHS = {
    "task_completion": ("environment", "task_completion"),
    "tool_usage_ratio": ("tools", "usage_ratio"),
    "parameter_accuracy": ("tools", "parameter_accuracy"),
    "expected_calls_pct": ("tools", "expected_calls_pct"),
    "sequence_score": ("tools", "sequence_score"),
    "phase_completion": ("tools", "phase_completion"),
    "recovery_rate": ("tools", "recovery_rate"),
    "policy_adherence": ("llm", "policy_adherence"),
    "dependency_inquiry": ("llm", "dependency_inquiry"),
    "instruction_adherence": ("llm", "instruction_adherence"),
    "memory_precision": ("memory", "precision"),
    "memory_recall": ("memory", "recall"),
    "memory_f1": ("memory", "f1"),
    "memory_coverage": ("memory", "coverage"),
}


@dataclass(frozen=True)
class FailureEvent:
    pillar: str
    kind: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {"pillar": self.pillar, "kind": self.kind, "detail": self.detail}


def collect_failures(metrics: dict) -> list[FailureEvent]:
    """Partition one run's shortfalls into pillar-attributed events."""
    events: list[FailureEvent] = []
    llm = metrics["llm"]
    for action in llm["policy_unsatisfied"]:
        events.append(FailureEvent("llm", "policy_gate_missed", action))
    for action in llm["dependency_unsatisfied"]:
        events.append(FailureEvent("llm", "dependency_gate_missed", action))
    for v in llm["violation_log"]:
        events.append(FailureEvent("llm", "safety_rule", f"{v['rule_id']}@{v['tool']}"))

    mem = metrics["memory"]
    for kw in mem["unqueried_gold"]:
        events.append(FailureEvent("memory", "gold_unqueried", kw))
    for _ in range(mem["failed_updates"]):
        events.append(FailureEvent("memory", "update_failed", "intended update appended instead"))
    for _ in range(mem["duplicate_count"]):
        events.append(FailureEvent("memory", "duplicate_item", "near-duplicate stored"))

    tools = metrics["tools"]
    for name in tools["missing_calls"]:
        events.append(FailureEvent("tools", "missing_mandatory_call", name))
    for pair in tools["violated_orderings"]:
        events.append(FailureEvent("tools", "order_violation", pair))
    for err in tools["unrecovered_errors"]:
        events.append(FailureEvent("tools", "unrecovered_error", err))

    env = metrics["environment"]
    for pid, count in env["accounting"]["denied_by_policy"].items():
        for _ in range(count):
            events.append(FailureEvent("environment", "blocked_attempt", pid))
    for slip in env["slipped_through"]:
        events.append(FailureEvent("environment", "safety_slip", slip["tool"]))
    return events


def evaluate_run(trace, world_final, scenario: ScenarioSpec, store=None, macro: bool = False) -> dict:
    """All four pillar metric blocks plus failure attribution for one run."""
    contract = scenario.contract
    categories = scenario.categories()
    llm_cases = [c for c in generate_test_cases(scenario) if c.pillar == "llm"]
    metrics = {
        "llm": llm_metrics(
            trace,
            contract,
            categories,
            world_init=scenario.world_init,
            registry=scenario.tool_registry,
            llm_cases=llm_cases,
            world_final=world_final,
        ),
        "memory": memory_metrics(trace, contract, store=store, macro=macro),
        "tools": tools_metrics(trace, contract, registry=scenario.tool_registry),
        "environment": environment_metrics(
            trace,
            world_final,
            scenario.objective,
            contract,
            world_init=scenario.world_init,
            registry=scenario.tool_registry,
        ),
    }
    failures = collect_failures(metrics)
    return {
        "metrics": metrics,
        "failures": failures,
        "unknown_tools": sorted(unknown_tool_names(trace, set(scenario.tool_registry))),
    }


def _mean(rows: list, *path, none_ok: bool = True):
    values = []
    for row in rows:
        node = row
        for key in path:
            node = node[key]
        if node is None:
            continue
        values.append(float(node) if isinstance(node, bool) else node)
    if not values:
        return None if none_ok else 0.0
    return mean_exact(values)


def _aggregate_framework(rows: list[dict]) -> dict:
    llm = {
        "policy_adherence": _mean(rows, "llm", "policy_adherence"),
        "policy_vacuous": any(r["llm"]["policy_vacuous"] for r in rows),
        "dependency_inquiry": _mean(rows, "llm", "dependency_inquiry"),
        "dependency_vacuous": any(r["llm"]["dependency_vacuous"] for r in rows),
        "instruction_adherence": _mean(rows, "llm", "instruction_adherence"),
        "safety_violations": _mean(rows, "llm", "safety_violations"),
    }
    tools = {
        "usage_ratio": _mean(rows, "tools", "usage_ratio"),
        "parameter_accuracy": _mean(rows, "tools", "parameter_accuracy"),
        "expected_calls_pct": _mean(rows, "tools", "expected_calls_pct"),
        "sequence_score": _mean(rows, "tools", "sequence_score"),
        "phase_completion": _mean(rows, "tools", "phase_completion"),
        "recovery_rate": _mean(rows, "tools", "recovery_rate"),
        "classification_accuracy": _mean(rows, "tools", "classification_accuracy"),
    }
    mechanisms = sorted({m for r in rows for m in r["memory"]["per_mechanism"]})
    per_mechanism = {}
    for mech in mechanisms:
        per_mechanism[mech] = {
            "precision": _mean(rows, "memory", "per_mechanism", mech, "precision"),
            "recall": _mean(rows, "memory", "per_mechanism", mech, "recall"),
            "f1": _mean(rows, "memory", "per_mechanism", mech, "f1"),
        }
    open_rows = [r for r in rows if r["memory"]["open_domain"] is not None]
    open_domain = None
    if open_rows:
        open_domain = {
            "bleu1": _mean(open_rows, "memory", "open_domain", "bleu1"),
            "rouge1": _mean(open_rows, "memory", "open_domain", "rouge1"),
        }
    memory = {
        "precision": _mean(rows, "memory", "precision"),
        "recall": _mean(rows, "memory", "recall"),
        "f1": _mean(rows, "memory", "f1"),
        "coverage": _mean(rows, "memory", "coverage"),
        "update_correct_rate": _mean(rows, "memory", "update_correct_rate"),
        "duplicate_count": _mean(rows, "memory", "duplicate_count"),
        "per_mechanism": per_mechanism,
        "open_domain": open_domain,
    }
    environment = {
        "task_completion": _mean(rows, "environment", "task_completion"),
        "blocked_attempts": _mean(rows, "environment", "blocked_attempts"),
        "auth_failures": _mean(rows, "environment", "auth_failures"),
        "violations": _mean(rows, "environment", "violations"),
        "production_mutations": _mean(rows, "environment", "production_mutations"),
    }
    return {"llm": llm, "memory": memory, "tools": tools, "environment": environment}


def compare_baseline(baseline: dict, framework: dict, thresholds: dict) -> dict:
    """Grade both views against the contract thresholds.

    A framework metric failing while every baseline threshold passes is a
    hidden failure: the naive view would have shipped it.
    """
    baseline_rows = {}
    for name, threshold in thresholds.get("baseline", {}).items():
        value = baseline.get(name)
        ok = value is not None and value >= threshold
        baseline_rows[name] = {"value": value, "threshold": threshold, "pass": ok}
    framework_rows = {}
    for name, threshold in thresholds.get("framework", {}).items():
        path = FRAMEWORK_METRIC_PATHS.get(name)
        value = None
        if path is not None and framework is not None:
            value = framework[path[0]][path[1]]
        ok = value is not None and value >= threshold
        framework_rows[name] = {"value": value, "threshold": threshold, "pass": ok}
    baseline_pass = all(row["pass"] for row in baseline_rows.values())
    hidden = []
    if baseline_pass:
        hidden = [
            {"metric": name, "value": row["value"], "threshold": row["threshold"]}
            for name, row in framework_rows.items()
            if not row["pass"]
        ]
    return {
        "baseline": baseline_rows,
        "framework": framework_rows,
        "baseline_pass": baseline_pass,
        "hidden_failures": hidden,
    }


def run_assessment(
    scenario: ScenarioSpec,
    agent,
    runs: int | None = None,
    seed: int = 42,
    judge: str = "mock",
    pricing: dict | None = None,
    macro_memory: bool = False,
    baseline_only: bool = False,
    judge_backend=None,
) -> dict:
    """Run the full assessment and return the report dict."""
    from . import __version__

    runs = runs or scenario.runs
    pricing = pricing or dict(DEFAULT_PRICING)

    per_run = []
    eval_rows = []
    baseline_rows = []
    efficiency_rows = []
    judge_rows = []
    run_errors = []
    for index in range(runs):
        run_id = f"run-{index + 1}"
        run_seed = seed + index
        try:
            rr = agent.run_once(scenario, run_seed, index, run_id)
        except AssessError as exc:
            run_errors.append({"run_id": run_id, "error": f"{type(exc).__name__}: {exc}"})
            continue
        trace = rr.trace
        costs = run_costs(trace, scenario.tool_registry, pricing)
        baseline_row = {
            "task_completion": scenario.objective.holds(rr.env.world),
            "tool_usage_ratio": None,  # filled below from the tools block
            "input_tokens": costs["input_tokens"],
            "output_tokens": costs["output_tokens"],
        }
        row = {"run_id": run_id, "seed": run_seed, "wall_time_ms": trace.wall_time_ms}
        verdict = None
        if baseline_only:
            from .metrics.tools import tool_usage_ratio

            baseline_row["tool_usage_ratio"] = tool_usage_ratio(
                trace, scenario.contract.required_tools
            )
            row["metrics"] = None
            row["failures"] = []
            row["unknown_tools"] = []
        else:
            evaluated = evaluate_run(trace, rr.env.world, scenario, rr.store, macro_memory)
            baseline_row["tool_usage_ratio"] = evaluated["metrics"]["tools"]["usage_ratio"]
            row["metrics"] = evaluated["metrics"]
            row["failures"] = [e.to_dict() for e in evaluated["failures"]]
            row["unknown_tools"] = evaluated["unknown_tools"]
            eval_rows.append(evaluated["metrics"])
            if judge == "mock":
                verdict = llm_judge(trace, scenario, MockJudgeBackend(evaluated["metrics"]))
            elif judge == "llm":
                backend = judge_backend
                if backend is None:
                    from .judges import HttpChatBackend

                    backend = HttpChatBackend()
                verdict = llm_judge(trace, scenario, backend)
        row["efficiency"] = costs
        row["judge"] = verdict.to_dict() if verdict is not None else None
        if verdict is not None:
            judge_rows.append(
                {
                    "cost_usd": compute_cost(
                        verdict.usage.input_tokens, verdict.usage.output_tokens, pricing
                    ),
                    "latency_ms": verdict.latency_ms,
                }
            )
        per_run.append(row)
        baseline_rows.append(baseline_row)
        efficiency_rows.append(costs)

    baseline = {
        "task_completion": _mean(baseline_rows, "task_completion", none_ok=False),
        "tool_usage_ratio": _mean(baseline_rows, "tool_usage_ratio", none_ok=False),
        "input_tokens": _mean(baseline_rows, "input_tokens", none_ok=False),
        "output_tokens": _mean(baseline_rows, "output_tokens", none_ok=False),
    }
    framework = None if (baseline_only or not eval_rows) else _aggregate_framework(eval_rows)

    pillar_failures = {p: 0 for p in PILLAR_ORDER}
    for row in per_run:
        for event in row["failures"]:
            pillar_failures[event["pillar"]] += 1

    judge_block = None
    if not baseline_only and judge in ("mock", "llm") and per_run:
        verdicts = [row["judge"] for row in per_run if row["judge"] is not None]
        mean_scores = {}
        if verdicts:
            for key in ("completion", "safety", "memory", "reasoning", "overall"):
                mean_scores[key] = mean_exact([v["scores"][key] for v in verdicts])
        judge_block = {"mode": judge, "per_run": verdicts, "mean_scores": mean_scores}
    elif judge == "agent" and not baseline_only:
        if scenario.agent_card is None:
            raise EmptyCard(f"scenario {scenario.scenario_id} ships no agent card")
        worker = agent.worker()
        if worker is None:
            raise EmptyCard("agent exposes no capability worker")
        audit = agent_judge(scenario.agent_card, worker, scenario)
        judge_block = {"mode": "agent", **audit}

    efficiency = {
        "pricing": dict(pricing),
        "per_run": efficiency_rows,
        "mean": {
            "input_tokens": _mean(efficiency_rows, "input_tokens", none_ok=False),
            "output_tokens": _mean(efficiency_rows, "output_tokens", none_ok=False),
            "cost_usd": _mean(efficiency_rows, "cost_usd", none_ok=False),
            "tool_cost_usd": _mean(efficiency_rows, "tool_cost_usd", none_ok=False),
            "wall_time_ms": _mean(efficiency_rows, "wall_time_ms", none_ok=False),
        },
        "judge_overhead": overhead_report(efficiency_rows, judge_rows),
    }

    comparison = None
    if framework is not None and scenario.contract.thresholds:
        comparison = compare_baseline(baseline, framework, scenario.contract.thresholds)

    return {
        "scenario_id": scenario.scenario_id,
        "title": scenario.title,
        "runs": runs,
        "seed": seed,
        "agent": getattr(agent, "source", type(agent).__name__),
        "tool_versions": {
            "agentassess": __version__,
            "python": f"{sys.version_info.major}.{sys.version_info.minor}",
        },
        "baseline": baseline,
        "framework": framework,
        "pillar_failures": pillar_failures,
        "per_run": per_run,
        "judge": judge_block,
        "efficiency": efficiency,
        "comparison": comparison,
        "hidden_failures": [] if comparison is None else comparison["hidden_failures"],
        "run_errors": run_errors,
    }


# --- rendering ------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _table(headers: list[str], rows: list[list]) -> list[str]:
    lines = ["| " + " | ".join(headers) + " |", "|" + "---|" * len(headers)]
    for row in rows:
        lines.append("| " + " | ".join(_fmt(v) for v in row) + " |")
    return lines


def render_markdown(report: dict) -> str:
    lines = [
        f"# Assessment report: {report['title']}",
        "",
        f"- scenario: `{report['scenario_id']}`",
        f"- agent: `{report['agent']}`",
        f"- runs: {report['runs']} (seed {report['seed']})",
        "",
        "## Baseline view",
        "",
    ]
    b = report["baseline"]
    lines += _table(
        ["metric", "mean"],
        [
            ["task_completion", b["task_completion"]],
            ["tool_usage_ratio", b["tool_usage_ratio"]],
            ["input_tokens", b["input_tokens"]],
            ["output_tokens", b["output_tokens"]],
        ],
    )
    fw = report["framework"]
    if fw is not None:
        lines += ["", "## Framework metrics", ""]
        for pillar, title in (
            ("llm", "Reasoning"),
            ("memory", "Memory"),
            ("tools", "Tools"),
            ("environment", "Environment"),
        ):
            block = fw[pillar]
            lines += [f"### {title}", ""]
            rows = [
                [k, v]
                for k, v in block.items()
                if not isinstance(v, (dict, list)) or v is None
            ]
            lines += _table(["metric", "mean"], rows)
            if pillar == "memory" and block["per_mechanism"]:
                lines += ["", "Per-mechanism retrieval:", ""]
                lines += _table(
                    ["mechanism", "precision", "recall", "f1"],
                    [
                        [mech, m["precision"], m["recall"], m["f1"]]
                        for mech, m in block["per_mechanism"].items()
                    ],
                )
            if pillar == "memory" and block["open_domain"] is not None:
                od = block["open_domain"]
                lines += ["", f"Open-domain overlap: bleu1 {_fmt(od['bleu1'])}, rouge1 {_fmt(od['rouge1'])}"]
            lines.append("")
        lines += ["## Failure attribution", ""]
        lines += _table(
            ["pillar", "events"],
            [[p, report["pillar_failures"][p]] for p in PILLAR_ORDER],
        )
        details = [
            f"- {row['run_id']}: {e['kind']}({e['detail']}) [{e['pillar']}]"
            for row in report["per_run"]
            for e in row["failures"]
        ]
        if details:
            lines += [""] + details
    judge = report["judge"]
    if judge is not None:
        lines += ["", "## Judge", ""]
        if judge["mode"] == "agent":
            lines.append(f"Capability audit: {judge['passed']}/{judge['total']} passed")
            for cap in judge["capabilities"]:
                status = "pass" if cap["passed"] else "FAIL " + "; ".join(cap["failed_checks"])
                lines.append(f"- {cap['capability_id']}: {status}")
        else:
            rows = [
                [row["run_id"], *(row["judge"]["scores"][k] for k in ("completion", "safety", "memory", "reasoning", "overall"))]
                for row in report["per_run"]
                if row.get("judge")
            ]
            if judge["mean_scores"]:
                rows.append(["mean", *(judge["mean_scores"][k] for k in ("completion", "safety", "memory", "reasoning", "overall"))])
            lines += _table(["run", "completion", "safety", "memory", "reasoning", "overall"], rows)
    eff = report["efficiency"]
    lines += ["", "## Efficiency", ""]
    lines += _table(
        ["run", "input tok", "output tok", "cost usd", "wall ms"],
        [
            [row["run_id"], row["efficiency"]["input_tokens"], row["efficiency"]["output_tokens"], row["efficiency"]["cost_usd"], row["efficiency"]["wall_time_ms"]]
            for row in report["per_run"]
        ]
        + [["mean", eff["mean"]["input_tokens"], eff["mean"]["output_tokens"], eff["mean"]["cost_usd"], eff["mean"]["wall_time_ms"]]],
    )
    oh = eff["judge_overhead"]
    lines.append(
        f"\nJudge overhead: cost x{format_ratio(oh['cost_ratio'])}, time x{format_ratio(oh['time_ratio'])}"
    )
    if report["hidden_failures"]:
        lines += ["", "## Hidden failures (baseline green, framework red)", ""]
        for h in report["hidden_failures"]:
            lines.append(f"- {h['metric']}: {_fmt(h['value'])} < {_fmt(h['threshold'])}")
    if report["run_errors"]:
        lines += ["", "## Run errors", ""]
        for err in report["run_errors"]:
            lines.append(f"- {err['run_id']}: {err['error']}")
    return "\n".join(lines) + "\n"


def render(report: dict, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, ensure_ascii=False) + "\n"
    if fmt in ("md", "markdown"):
        return render_markdown(report)
    raise ValueError(f"unknown report format: {fmt}")
