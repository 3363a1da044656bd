"""Tool-pillar metrics: coverage, parameter fidelity, ordering, recovery.

All scores count ``tool_call`` spans only. A guardrail denial never records a
tool_call span, so a blocked attempt is not an invocation here; errored
invocations do count (the call was made, it just failed).
"""

from __future__ import annotations

import re
from statistics import fmean

from ..errors import EmptyCaseList
from ..trace import ExecutionTrace, Span, SpanKind

# digits with optional thousands commas and one decimal part ("1,100", "42", "1.5")
_NUMERIC = re.compile(r"^[+-]?\d[\d,]*(\.\d+)?$")

_ERROR_TAG = re.compile(r"\(([^()]*)\)\s*$")


def canonical_value(value, alias_map: dict | None = None):
    """Normalize a parameter value for loose comparison.

    Strings are trimmed and casefolded, alias-mapped (one level, never
    chained), and comma-grouped numerics become floats. Numbers unify to
    float; bools stay bools. Idempotent by construction.
    """
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        v = value.strip().casefold()
        if alias_map:
            for key, target in alias_map.items():
                if str(key).strip().casefold() == v:
                    return canonical_value(target)
        if _NUMERIC.match(v):
            return float(v.replace(",", ""))
        return v
    return value


def canonicalize(params: dict, alias_map: dict | None = None) -> dict:
    return {
        str(k).strip().casefold(): canonical_value(v, alias_map) for k, v in params.items()
    }


def params_match(wanted: dict, actual: dict, alias_map: dict | None = None) -> bool:
    """Every wanted key present in actual with canonically equal value."""
    got = canonicalize(actual, alias_map)
    for key, value in canonicalize(wanted, alias_map).items():
        if key not in got or got[key] != value:
            return False
    return True


def _invocations(trace: ExecutionTrace, name: str | None = None) -> list[Span]:
    return [
        s
        for s in trace.spans
        if s.kind is SpanKind.TOOL_CALL and (name is None or s.name == name)
    ]


def tool_usage_ratio(trace: ExecutionTrace, required_tools: list[str]) -> float:
    if not required_tools:
        return 1.0
    invoked = {s.name for s in _invocations(trace)}
    return len(invoked & set(required_tools)) / len(required_tools)


def expected_calls(
    trace: ExecutionTrace, mandatory_calls: list[dict], alias_map: dict | None = None
) -> dict:
    """Which contract-mandated calls were observed with matching parameters."""
    missing = []
    for entry in mandatory_calls:
        wanted = entry.get("required_params", {})
        hits = [
            s for s in _invocations(trace, entry["tool"]) if params_match(wanted, s.params, alias_map)
        ]
        if not hits:
            missing.append(entry["tool"])
    total = len(mandatory_calls)
    pct = 1.0 if total == 0 else (total - len(missing)) / total
    return {"pct": pct, "missing": missing, "total": total}


def parameter_accuracy(
    trace: ExecutionTrace, mandatory_calls: list[dict], alias_map: dict | None = None
) -> float:
    """Mean parameter fidelity over invocations of contract-mandated tools.

    Each invocation scores against the best-matching mandate for its tool:
    the fraction of mandated keys present with canonically equal values.
    Mandates with no keys score 1.0; no relevant invocations scores 1.0.
    """
    by_tool: dict[str, list[dict]] = {}
    for entry in mandatory_calls:
        by_tool.setdefault(entry["tool"], []).append(entry.get("required_params", {}))
    scores = []
    for span in _invocations(trace):
        if span.name not in by_tool:
            continue
        best = 0.0
        for wanted in by_tool[span.name]:
            if not wanted:
                best = max(best, 1.0)
                continue
            got = canonicalize(span.params, alias_map)
            want = canonicalize(wanted, alias_map)
            hit = sum(1 for k, v in want.items() if got.get(k) == v)
            best = max(best, hit / len(want))
        scores.append(best)
    return fmean(scores) if scores else 1.0


def _constraint_holds(trace: ExecutionTrace, before: str, after: str, scope: str | None) -> bool:
    """First invocation of ``after`` must be preceded by ``before``.

    Scoped constraints apply per distinct scope value: every scope group's
    first ``after`` needs a same-scoped earlier ``before``. Vacuously holds
    when ``after`` is never invoked.
    """
    befores = _invocations(trace, before)
    afters = _invocations(trace, after)
    if not afters:
        return True
    if scope is None:
        first = afters[0]
        return any(b.t_end <= first.t_start for b in befores)
    firsts: dict = {}
    for span in afters:
        firsts.setdefault(canonical_value(span.params.get(scope)), span)
    for first in firsts.values():
        ok = any(
            b.t_end <= first.t_start
            and canonical_value(b.params.get(scope)) == canonical_value(first.params.get(scope))
            for b in befores
        )
        if not ok:
            return False
    return True


def sequence_score(trace: ExecutionTrace, order_constraints: list[dict]) -> dict:
    """Fraction of ordering constraints honored, with the violated pairs named."""
    violated = []
    for c in order_constraints:
        if not _constraint_holds(trace, c["before"], c["after"], c.get("scope")):
            violated.append(f"{c['before']}->{c['after']}")
    total = len(order_constraints)
    score = 1.0 if total == 0 else (total - len(violated)) / total
    return {
        "score": score,
        "violated": violated,
        "total": total,
        "fully_ordered": not violated,
    }


def phase_completion(
    trace: ExecutionTrace, mandatory_calls: list[dict], alias_map: dict | None = None
) -> float:
    """Fraction of mandated calls that completed without error."""
    if not mandatory_calls:
        return 1.0
    done = 0
    for entry in mandatory_calls:
        wanted = entry.get("required_params", {})
        for span in _invocations(trace, entry["tool"]):
            if span.error is None and params_match(wanted, span.params, alias_map):
                done += 1
                break
    return done / len(mandatory_calls)


def recovery_success(trace: ExecutionTrace, recovery_map: dict) -> dict:
    """Did the same agent follow each recoverable error with a mapped remedy call?"""
    calls = _invocations(trace)
    unrecovered = []
    total = 0
    for idx, span in enumerate(calls):
        if span.error is None:
            continue
        remedies = recovery_map.get(span.error.get("code"))
        if not remedies:
            continue
        total += 1
        follow = next(
            (later for later in calls[idx + 1 :] if later.agent_id == span.agent_id), None
        )
        if follow is None or follow.name not in remedies:
            unrecovered.append(f"{span.name}:{span.error.get('code')}")
    rate = 1.0 if total == 0 else (total - len(unrecovered)) / total
    return {"rate": rate, "unrecovered": unrecovered, "total": total}


def classify_error_message(message: str) -> str:
    """Pull the trailing parenthesized tag out of a simulator error message."""
    m = _ERROR_TAG.search(message or "")
    return m.group(1) if m else ""


def classification_accuracy(cases: list[dict], predict=classify_error_message) -> float:
    if not cases:
        raise EmptyCaseList("classification needs at least one labeled case")
    hits = sum(1 for c in cases if predict(str(c["message"])) == str(c["label"]))
    return hits / len(cases)


def perf_reliability(trace: ExecutionTrace, registry: dict | None = None) -> dict:
    """Per-tool call/error/latency accounting plus equivalence-group rankings.

    Bookkeeping only: none of this feeds pillar scores.
    """
    per_tool: dict[str, dict] = {}
    for span in _invocations(trace):
        row = per_tool.setdefault(
            span.name, {"calls": 0, "errors": 0, "latencies": []}
        )
        row["calls"] += 1
        if span.error is not None:
            row["errors"] += 1
        row["latencies"].append(span.duration_ms)
    out = {}
    for name in sorted(per_tool):
        row = per_tool[name]
        lat = row.pop("latencies")
        row["mean_latency_ms"] = fmean(lat) if lat else 0.0
        row["max_latency_ms"] = max(lat) if lat else 0
        out[name] = row
    groups: dict[str, list[str]] = {}
    if registry:
        tags: dict[str, list[str]] = {}
        for name, tool in registry.items():
            if getattr(tool, "equiv_tag", "") and name in out:
                tags.setdefault(tool.equiv_tag, []).append(name)
        for tag in sorted(tags):
            members = tags[tag]
            if len(members) > 1:
                groups[tag] = sorted(members, key=lambda n: (out[n]["mean_latency_ms"], n))
    return {"per_tool": out, "equiv_groups": groups}


def tools_metrics(trace: ExecutionTrace, contract, registry: dict | None = None) -> dict:
    """All tool-pillar numbers for one run."""
    expected = expected_calls(trace, contract.mandatory_calls, contract.alias_map)
    seq = sequence_score(trace, contract.order_constraints)
    recovery = recovery_success(trace, contract.recovery_map)
    accuracy = None
    if contract.classification_cases:
        accuracy = classification_accuracy(contract.classification_cases)
    return {
        "usage_ratio": tool_usage_ratio(trace, contract.required_tools),
        "parameter_accuracy": parameter_accuracy(
            trace, contract.mandatory_calls, contract.alias_map
        ),
        "expected_calls_pct": expected["pct"],
        "missing_calls": expected["missing"],
        "sequence_score": seq["score"],
        "violated_orderings": seq["violated"],
        "fully_ordered": seq["fully_ordered"],
        "phase_completion": phase_completion(trace, contract.mandatory_calls, contract.alias_map),
        "recovery_rate": recovery["rate"],
        "unrecovered_errors": recovery["unrecovered"],
        "classification_accuracy": accuracy,
        "accounting": perf_reliability(trace, registry),
    }
