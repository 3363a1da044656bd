"""Declarative pass/fail checks evaluated against spans and world state.

Checks are the shared currency between generated test cases, instruction
adherence scoring, and capability audits: small data objects, no callbacks,
so they serialize cleanly into scenario documents and reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import BadPath
from .trace import Span, SpanKind
from .util import glob_match, keyword_set, token_set

CHECK_KINDS = ("tool_log_contains", "memory_query_matches", "state_equals", "span_absent")

DEFAULT_SOURCES = ("memory", "audit")


@dataclass(frozen=True)
class CheckSpec:
    """One success condition; ``args`` are kind-specific."""

    kind: str
    args: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CHECK_KINDS:
            raise ValueError(f"unknown check kind: {self.kind}")

    def describe(self) -> str:
        a = self.args
        if self.kind == "tool_log_contains":
            extra = f" after {a['preceded_by']}" if a.get("preceded_by") else ""
            return f"tool_log_contains({a.get('tool', '?')}{extra})"
        if self.kind == "memory_query_matches":
            kws = " ".join(sorted(keyword_set(a.get("keywords", []))))
            gate = f" before {a['before_tool']}" if a.get("before_tool") else ""
            return f"memory_query_matches({kws}{gate})"
        if self.kind == "state_equals":
            return f"state_equals({a.get('path', '?')} == {a.get('value')!r})"
        target = a.get("name") or a.get("policy_id") or ""
        return f"span_absent({a.get('kind', '?')}{':' + target if target else ''})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "args": dict(self.args)}


def _loose_equal(a, b) -> bool:
    # case/whitespace-insensitive for strings, numeric equality for numbers
    from .metrics.tools import canonical_value

    return canonical_value(a) == canonical_value(b)


def _params_subset(wanted: dict, actual: dict) -> bool:
    folded = {str(k).strip().casefold(): v for k, v in actual.items()}
    for key, value in wanted.items():
        k = str(key).strip().casefold()
        if k not in folded or not _loose_equal(folded[k], value):
            return False
    return True


def _tool_calls(spans: list[Span], name: str) -> list[Span]:
    return [s for s in spans if s.kind is SpanKind.TOOL_CALL and s.name == name]


def _query_tokens(span: Span, categories: dict | None) -> set[str] | None:
    """Token set a lookup span exposes for keyword matching, or None if not a lookup."""
    if span.kind is SpanKind.MEMORY_READ:
        return token_set(str(span.params.get("query", "")))
    if span.kind is SpanKind.TOOL_CALL and categories and categories.get(span.name) == "audit":
        # both the whole tool name and its underscore-separated pieces count
        toks = token_set(span.name) | token_set(span.name.replace("_", " "))
        for key, value in span.params.items():
            toks |= token_set(str(key)) | token_set(str(value))
        return toks
    return None


def _matches(toks: set[str], keywords: set[str], mode: str) -> bool:
    if mode == "any":
        return bool(toks & keywords)
    return keywords <= toks


def lookup_spans_matching(
    spans: list[Span],
    keywords,
    sources=DEFAULT_SOURCES,
    categories: dict | None = None,
    mode: str = "all",
) -> list[Span]:
    """Lookup spans (memory reads and/or audit tool calls) matching the keywords."""
    kws = keyword_set(keywords)
    out = []
    for span in spans:
        if span.kind is SpanKind.MEMORY_READ and "memory" not in sources:
            continue
        if span.kind is SpanKind.TOOL_CALL and "audit" not in sources:
            continue
        toks = _query_tokens(span, categories)
        if toks is not None and _matches(toks, kws, mode):
            out.append(span)
    return out


def gated_satisfaction(
    spans: list[Span],
    action_tool: str,
    keywords,
    sources=DEFAULT_SOURCES,
    categories: dict | None = None,
) -> tuple[int, int]:
    """(satisfied, total) over invocations of a lookup-gated action.

    An invocation is satisfied when some matching lookup span finished at or
    before the invocation started (strict precedence, same rule as
    ``trace.preceding``).
    """
    lookups = lookup_spans_matching(spans, keywords, sources, categories)
    total = satisfied = 0
    for call in _tool_calls(spans, action_tool):
        total += 1
        if any(lk.t_end <= call.t_start for lk in lookups):
            satisfied += 1
    return satisfied, total


def evaluate_check(
    check: CheckSpec,
    spans: list[Span],
    world=None,
    categories: dict | None = None,
) -> bool:
    """Evaluate one check against recorded spans (and final world state)."""
    a = check.args
    if check.kind == "tool_log_contains":
        calls = [
            s
            for s in _tool_calls(spans, a["tool"])
            if _params_subset(a.get("params", {}), s.params)
        ]
        if not calls:
            return False
        before = a.get("preceded_by")
        if not before:
            return True
        first = calls[0]
        scope = a.get("scope")
        for prior in _tool_calls(spans, before):
            if prior.t_end > first.t_start:
                continue
            if scope and not _loose_equal(prior.params.get(scope), first.params.get(scope)):
                continue
            return True
        return False

    if check.kind == "memory_query_matches":
        sources = tuple(a.get("sources", DEFAULT_SOURCES))
        mode = a.get("mode", "all")
        before = a.get("before_tool")
        if before:
            sat, total = gated_satisfaction(spans, before, a["keywords"], sources, categories)
            return sat == total  # vacuously true when never invoked
        return bool(lookup_spans_matching(spans, a["keywords"], sources, categories, mode))

    if check.kind == "state_equals":
        if world is None:
            return False
        try:
            return _loose_equal(world.resolve_path(a["path"]), a["value"])
        except BadPath:
            return False

    # span_absent
    kind = a.get("kind")
    for span in spans:
        if kind and span.kind.value != kind:
            continue
        if a.get("name") and not glob_match(a["name"], span.name):
            continue
        if a.get("policy_id") and span.params.get("policy_id") != a["policy_id"]:
            continue
        return False
    return True
