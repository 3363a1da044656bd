"""Execution trace model: spans, traces, and the newline-delimited wire format.

A trace file is UTF-8 text, one JSON object per line. The first line may be
a header object (recognized by its ``run_id`` key) carrying trace-level
fields; every other line is a span record with exactly the span fields,
absent optionals omitted. Field order is fixed, so serialization is
byte-stable and ``parse_trace(serialize_trace(t)) == t``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .errors import DuplicateSeq, MalformedRecord, NonMonotonicSeq, UnknownSeq


class SpanKind(str, Enum):
    LLM_CALL = "llm_call"
    TOOL_CALL = "tool_call"
    MEMORY_READ = "memory_read"
    MEMORY_WRITE = "memory_write"
    GUARDRAIL_EVENT = "guardrail_event"
    JUDGE_EVENT = "judge_event"


_KINDS = {k.value for k in SpanKind}
_SCALAR = (str, int, float, bool)


@dataclass(frozen=True)
class TokenUsage:
    """Input/output token counts attached to a span or aggregated per run."""

    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
        )

    def to_dict(self) -> dict:
        return {"input_tokens": self.input_tokens, "output_tokens": self.output_tokens}


@dataclass(frozen=True)
class Span:
    """One recorded event: an LLM call, tool call, memory op, or guardrail/judge event."""

    seq: int
    kind: SpanKind
    agent_id: str
    name: str
    t_start: int
    t_end: int
    params: dict = field(default_factory=dict)
    result: object = None
    error: dict | None = None
    usage: TokenUsage | None = None

    def __post_init__(self):
        if self.t_end < self.t_start:
            raise ValueError(f"span {self.seq}: t_end precedes t_start")
        for key, value in self.params.items():
            if not isinstance(key, str) or not isinstance(value, _SCALAR):
                raise ValueError(f"span {self.seq}: params must map strings to scalars")
        if self.error is not None:
            if not isinstance(self.error, dict) or not {"code", "message"} <= set(self.error):
                raise ValueError(f"span {self.seq}: error needs code and message")
        if self.kind is SpanKind.GUARDRAIL_EVENT and self.result is None and self.error is None:
            raise ValueError(f"span {self.seq}: guardrail events carry a result or an error")

    @property
    def duration_ms(self) -> int:
        return self.t_end - self.t_start

    def to_record(self) -> dict:
        rec = {
            "seq": self.seq,
            "kind": self.kind.value,
            "agent_id": self.agent_id,
            "name": self.name,
            "params": self.params,
        }
        if self.result is not None:
            rec["result"] = self.result
        if self.error is not None:
            rec["error"] = self.error
        rec["t_start"] = self.t_start
        rec["t_end"] = self.t_end
        if self.usage is not None:
            rec["usage"] = self.usage.to_dict()
        return rec


@dataclass
class ExecutionTrace:
    """An ordered run record; spans are kept sorted by (t_start, seq)."""

    run_id: str = ""
    scenario_id: str = ""
    spans: list[Span] = field(default_factory=list)
    wall_time_ms: int = 0
    final_state_ref: str = ""

    def __post_init__(self):
        self.spans = sorted(self.spans, key=lambda s: (s.t_start, s.seq))

    def span_by_seq(self, seq: int) -> Span:
        for span in self.spans:
            if span.seq == seq:
                return span
        raise UnknownSeq(seq)

    def usage_total(self) -> TokenUsage:
        total = TokenUsage()
        for span in self.spans:
            if span.usage is not None:
                total = total + span.usage
        return total


def _coerce_kinds(kinds) -> set[SpanKind] | None:
    if not kinds:
        return None
    return {SpanKind(k) for k in kinds}


def slice_trace(trace: ExecutionTrace, kinds=None, agent_id: str | None = None) -> list[Span]:
    """Order-preserving filter by span kind and/or agent.

    An empty or missing ``kinds`` means all kinds. Slicing is idempotent:
    re-slicing the result with the same arguments returns it unchanged.
    """
    wanted = _coerce_kinds(kinds)
    out = []
    for span in trace.spans:
        if wanted is not None and span.kind not in wanted:
            continue
        if agent_id is not None and span.agent_id != agent_id:
            continue
        out.append(span)
    return out


def preceding(
    trace: ExecutionTrace,
    span_seq: int,
    kinds=None,
    window_ms: int | None = None,
) -> list[Span]:
    """Spans that strictly precede the given span (t_end <= its t_start).

    ``window_ms`` bounds how far back to look; omitting it is equivalent
    to an infinite window.
    """
    target = trace.span_by_seq(span_seq)
    wanted = _coerce_kinds(kinds)
    floor = None if window_ms is None else target.t_start - window_ms
    out = []
    for span in trace.spans:
        if span.seq == span_seq or span.t_end > target.t_start:
            continue
        if floor is not None and span.t_end < floor:
            continue
        if wanted is not None and span.kind not in wanted:
            continue
        out.append(span)
    return out


def _parse_usage(raw, line: int) -> TokenUsage:
    if not isinstance(raw, dict):
        raise MalformedRecord(line, "usage must be an object")
    try:
        return TokenUsage(int(raw.get("input_tokens", 0)), int(raw.get("output_tokens", 0)))
    except (TypeError, ValueError) as exc:
        raise MalformedRecord(line, f"bad usage: {exc}") from exc


def _span_from_record(rec: dict, line: int) -> Span:
    for field_name in ("seq", "kind", "agent_id", "name", "t_start", "t_end"):
        if field_name not in rec:
            raise MalformedRecord(line, f"missing {field_name} field")
    if rec["kind"] not in _KINDS:
        raise MalformedRecord(line, f"unknown kind: {rec['kind']!r}")
    usage = _parse_usage(rec["usage"], line) if "usage" in rec else None
    try:
        return Span(
            seq=int(rec["seq"]),
            kind=SpanKind(rec["kind"]),
            agent_id=str(rec["agent_id"]),
            name=str(rec["name"]),
            params=rec.get("params", {}),
            result=rec.get("result"),
            error=rec.get("error"),
            t_start=int(rec["t_start"]),
            t_end=int(rec["t_end"]),
            usage=usage,
        )
    except (TypeError, ValueError) as exc:
        raise MalformedRecord(line, str(exc)) from exc


def parse_trace(document: str | bytes) -> ExecutionTrace:
    """Parse a newline-delimited trace document into a validated trace.

    Raises MalformedRecord (with the 1-based line number), DuplicateSeq, or
    NonMonotonicSeq. An empty document is a valid trace with zero spans.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    trace = ExecutionTrace()
    seen: set[int] = set()
    high = None
    first_record = True
    for line_no, line in enumerate(document.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(rec, dict):
            raise MalformedRecord(line_no, "record is not an object")
        is_header = first_record and "run_id" in rec
        first_record = False
        if is_header:
            trace.run_id = str(rec["run_id"])
            trace.scenario_id = str(rec.get("scenario_id", ""))
            trace.wall_time_ms = int(rec.get("wall_time_ms", 0))
            trace.final_state_ref = str(rec.get("final_state_ref", ""))
            if trace.wall_time_ms < 0:
                raise MalformedRecord(line_no, "wall_time_ms must be non-negative")
            continue
        span = _span_from_record(rec, line_no)
        if span.seq in seen:
            raise DuplicateSeq(span.seq, line_no)
        if high is not None and span.seq < high:
            raise NonMonotonicSeq(span.seq, line_no)
        seen.add(span.seq)
        high = span.seq
        trace.spans.append(span)
    trace.spans.sort(key=lambda s: (s.t_start, s.seq))
    return trace


def serialize_trace(trace: ExecutionTrace) -> str:
    """Render a trace as its canonical newline-delimited document."""
    header = {
        "run_id": trace.run_id,
        "scenario_id": trace.scenario_id,
        "wall_time_ms": trace.wall_time_ms,
        "final_state_ref": trace.final_state_ref,
    }
    lines = [json.dumps(header, ensure_ascii=False, separators=(",", ":"))]
    for span in sorted(trace.spans, key=lambda s: (s.t_start, s.seq)):
        lines.append(json.dumps(span.to_record(), ensure_ascii=False, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def unknown_tool_names(trace: ExecutionTrace, registry_names) -> list[str]:
    """tool_call names not present in the scenario registry (flagged, not rejected)."""
    known = set(registry_names)
    seen: list[str] = []
    for span in trace.spans:
        if span.kind is SpanKind.TOOL_CALL and span.name not in known and span.name not in seen:
            seen.append(span.name)
    return seen


@dataclass
class AgentCard:
    """Published description of an agent: identity, capabilities, tool surface."""

    agent_id: str
    description: str
    capabilities: list[dict] = field(default_factory=list)
    tools: list[str] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for cap in self.capabilities:
            if "id" not in cap or "statement" not in cap:
                raise ValueError("capability entries need id and statement")
            if cap["id"] in seen:
                raise ValueError(f"duplicate capability id: {cap['id']}")
            seen.add(cap["id"])

    @classmethod
    def from_dict(cls, raw: dict) -> "AgentCard":
        return cls(
            agent_id=str(raw.get("agent_id", "")),
            description=str(raw.get("description", "")),
            capabilities=list(raw.get("capabilities", [])),
            tools=list(raw.get("tools", [])),
        )
