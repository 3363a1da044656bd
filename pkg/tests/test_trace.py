"""Trace model and wire-format tests."""

from __future__ import annotations

import json

import pytest

from agentassess.errors import DuplicateSeq, MalformedRecord, NonMonotonicSeq, UnknownSeq
from agentassess.trace import (
    AgentCard,
    ExecutionTrace,
    Span,
    SpanKind,
    TokenUsage,
    parse_trace,
    preceding,
    serialize_trace,
    slice_trace,
    unknown_tool_names,
)


def span(seq, kind=SpanKind.TOOL_CALL, t_start=0, t_end=None, **kw):
    defaults = dict(agent_id="a", name="probe", params={})
    defaults.update(kw)
    if t_end is None:
        t_end = t_start + 10
    return Span(seq=seq, kind=kind, t_start=t_start, t_end=t_end, **defaults)


def test_token_usage_adds_and_rejects_negative():
    total = TokenUsage(10, 2) + TokenUsage(5, 3)
    assert (total.input_tokens, total.output_tokens) == (15, 5)
    with pytest.raises(ValueError):
        TokenUsage(-1, 0)


def test_span_validates_interval_and_params():
    with pytest.raises(ValueError):
        span(1, t_start=10, t_end=5)
    with pytest.raises(ValueError):
        span(1, params={"nested": {"no": 1}})
    with pytest.raises(ValueError):
        span(1, error={"code": "x"})  # message missing


def test_guardrail_event_requires_result_or_error():
    with pytest.raises(ValueError):
        span(1, kind=SpanKind.GUARDRAIL_EVENT)
    ok = span(1, kind=SpanKind.GUARDRAIL_EVENT, error={"code": "guardrail_denied", "message": "no"})
    assert ok.duration_ms == 10


def test_record_field_order_is_fixed():
    s = span(3, result={"ok": True}, usage=TokenUsage(1, 2))
    assert list(s.to_record()) == ["seq", "kind", "agent_id", "name", "params", "result", "t_start", "t_end", "usage"]
    bare = span(4)
    assert list(bare.to_record()) == ["seq", "kind", "agent_id", "name", "params", "t_start", "t_end"]


def test_trace_sorts_spans_and_finds_by_seq():
    t = ExecutionTrace(spans=[span(2, t_start=50), span(1, t_start=5)])
    assert [s.seq for s in t.spans] == [1, 2]
    assert t.span_by_seq(2).t_start == 50
    with pytest.raises(UnknownSeq):
        t.span_by_seq(99)


def test_round_trip_is_byte_stable():
    t = ExecutionTrace(
        run_id="run-7",
        scenario_id="s1_cost",
        wall_time_ms=120,
        final_state_ref="snap-001",
        spans=[
            span(1, t_start=0, t_end=12, result=[1, 2]),
            span(2, kind=SpanKind.LLM_CALL, t_start=12, t_end=40, usage=TokenUsage(100, 20)),
            span(3, t_start=40, t_end=45, error={"code": "transient_failure", "message": "x"}),
        ],
    )
    doc = serialize_trace(t)
    again = parse_trace(doc)
    assert serialize_trace(again) == doc
    assert again == t


def test_header_is_first_record_with_run_id():
    doc = serialize_trace(ExecutionTrace(run_id="r", spans=[span(1)]))
    t = parse_trace(doc)
    assert t.run_id == "r" and len(t.spans) == 1

    # a later record with run_id is just a malformed span, not a second header
    lines = doc.splitlines()
    lines.append(json.dumps({"run_id": "other"}))
    with pytest.raises(MalformedRecord):
        parse_trace("\n".join(lines))


def test_headerless_document_parses_as_spans():
    body = "\n".join(json.dumps(span(i).to_record()) for i in (1, 2))
    t = parse_trace(body)
    assert t.run_id == "" and len(t.spans) == 2


def test_empty_document_is_empty_trace():
    t = parse_trace("")
    assert t.spans == [] and t.run_id == ""


def test_malformed_records_carry_line_numbers():
    with pytest.raises(MalformedRecord) as exc:
        parse_trace('{"run_id": "r"}\nnot json')
    assert exc.value.line == 2
    with pytest.raises(MalformedRecord):
        parse_trace("[1, 2]")
    with pytest.raises(MalformedRecord):
        parse_trace(json.dumps({"seq": 1, "kind": "nope", "agent_id": "a", "name": "n", "t_start": 0, "t_end": 1}))


def test_duplicate_seq_wins_over_non_monotonic():
    records = [
        json.dumps({"run_id": "r"}),
        json.dumps(span(5).to_record()),
        json.dumps(span(5, t_start=100, t_end=110).to_record()),  # duplicate AND non-monotonic tie
        json.dumps(span(2).to_record()),
    ]
    with pytest.raises(DuplicateSeq):
        parse_trace("\n".join(records))
    with pytest.raises(NonMonotonicSeq):
        parse_trace("\n".join([records[0], records[1], records[3]]))


def test_slice_trace_filters_and_is_idempotent():
    t = ExecutionTrace(
        spans=[
            span(1, kind=SpanKind.LLM_CALL, t_start=0),
            span(2, kind=SpanKind.TOOL_CALL, t_start=10, agent_id="b"),
            span(3, kind=SpanKind.TOOL_CALL, t_start=20),
        ]
    )
    calls = slice_trace(t, kinds=["tool_call"])
    assert [s.seq for s in calls] == [2, 3]
    assert [s.seq for s in slice_trace(t, kinds=["tool_call"], agent_id="b")] == [2]
    assert slice_trace(t) == t.spans


def test_preceding_uses_strict_interval_order():
    t = ExecutionTrace(
        spans=[
            span(1, t_start=0, t_end=10),
            span(2, t_start=10, t_end=30),  # t_end == target t_start counts
            span(3, t_start=25, t_end=35),  # overlaps the target: excluded
            span(4, t_start=30, t_end=40),
        ]
    )
    assert [s.seq for s in preceding(t, 4)] == [1, 2]
    assert [s.seq for s in preceding(t, 4, window_ms=15)] == [2]
    assert [s.seq for s in preceding(t, 4, kinds=["llm_call"])] == []


def test_unknown_tool_names_preserves_first_seen_order():
    t = ExecutionTrace(
        spans=[
            span(1, name="mystery_probe", t_start=0),
            span(2, name="list_instances", t_start=10),
            span(3, name="mystery_probe", t_start=20),
            span(4, kind=SpanKind.LLM_CALL, name="zzz", t_start=30),
        ]
    )
    assert unknown_tool_names(t, {"list_instances"}) == ["mystery_probe"]


def test_agent_card_validation():
    card = AgentCard.from_dict(
        {"agent_id": "x", "description": "d", "capabilities": [{"id": "c1", "statement": "s"}], "tools": ["t"]}
    )
    assert card.capabilities[0]["id"] == "c1"
    with pytest.raises(ValueError):
        AgentCard("x", "d", capabilities=[{"id": "c1"}])
    with pytest.raises(ValueError):
        AgentCard("x", "d", capabilities=[{"id": "c1", "statement": "a"}, {"id": "c1", "statement": "b"}])
