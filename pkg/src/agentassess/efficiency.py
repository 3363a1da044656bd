"""Token, cost, and latency accounting, including judge-overhead ratios."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import yaml

from .trace import ExecutionTrace, TokenUsage

# Assumed defaults; configure per provider via a pricing file.
DEFAULT_PRICING = {"input_usd_per_1m": 2.50, "output_usd_per_1m": 10.00}


def load_pricing(path=None) -> dict:
    """Read a pricing document; without a path, the packaged default applies."""
    if path is None:
        text = resources.files("agentassess").joinpath("scenarios/pricing.yaml").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    raw = yaml.safe_load(text) or {}
    return {
        "input_usd_per_1m": float(raw.get("input_usd_per_1m", DEFAULT_PRICING["input_usd_per_1m"])),
        "output_usd_per_1m": float(raw.get("output_usd_per_1m", DEFAULT_PRICING["output_usd_per_1m"])),
    }


def compute_cost(input_tokens: int, output_tokens: int, pricing: dict | None = None) -> float:
    """Linear token cost in USD. Exact; display rounding happens at render time."""
    p = pricing or DEFAULT_PRICING
    return (
        input_tokens * p["input_usd_per_1m"] / 1_000_000
        + output_tokens * p["output_usd_per_1m"] / 1_000_000
    )


def overhead_ratio(judge_value: float, run_value: float) -> float | None:
    """How much the judge adds relative to the run itself; None when undefined."""
    if run_value == 0:
        return None
    return judge_value / run_value


def format_ratio(ratio: float | None, digits: int = 2) -> str:
    return "n/a" if ratio is None else f"{ratio:.{digits}f}"


def run_costs(trace: ExecutionTrace, registry: dict | None = None, pricing: dict | None = None) -> dict:
    """Per-run accounting: token usage, token cost, flat per-call tool cost."""
    usage: TokenUsage = trace.usage_total()
    tool_cost = 0.0
    if registry:
        for span in trace.spans:
            tool = registry.get(span.name)
            if tool is not None and span.kind.value == "tool_call":
                tool_cost += tool.cost_usd
    token_cost = compute_cost(usage.input_tokens, usage.output_tokens, pricing)
    return {
        "input_tokens": usage.input_tokens,
        "output_tokens": usage.output_tokens,
        "cost_usd": token_cost,
        "tool_cost_usd": tool_cost,
        "total_usd": token_cost + tool_cost,
        "wall_time_ms": trace.wall_time_ms,
    }


def overhead_report(run_rows: list[dict], judge_rows: list[dict]) -> dict:
    """Judge cost/time against run cost/time, pooled over runs."""
    run_cost = sum(r["total_usd"] for r in run_rows)
    run_time = sum(r["wall_time_ms"] for r in run_rows)
    judge_cost = sum(j.get("cost_usd", 0.0) for j in judge_rows)
    judge_time = sum(j.get("latency_ms", 0) for j in judge_rows)
    return {
        "run_cost_usd": run_cost,
        "run_time_ms": run_time,
        "judge_cost_usd": judge_cost,
        "judge_time_ms": judge_time,
        "cost_ratio": overhead_ratio(judge_cost, run_cost),
        "time_ratio": overhead_ratio(judge_time, run_time),
    }
