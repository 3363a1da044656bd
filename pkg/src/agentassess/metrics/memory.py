"""Memory-pillar metrics: retrieval quality per mechanism, overlap scores, storage health.

Scoring is anchored on the contract's gold entries. Each memory_read span is
assigned to the gold entry sharing the most query keywords (ties go to the
earlier entry); reads overlapping no entry are navigation lookups and stay out
of the retrieval pool, so e.g. a policy lookup cannot dilute precision.
"""

from __future__ import annotations

import math
from collections import Counter
from statistics import fmean

from ..trace import ExecutionTrace, Span, SpanKind
from ..util import keyword_set, percentile, token_set, tokens

MECHANISM_ORDER = ("single_hop", "multi_hop", "temporal", "open_domain")


def retrieval_prf(tp: int, retrieved: int, relevant: int) -> tuple[float, float, float]:
    """Precision/recall/F1 with fixed empty-set conventions.

    No retrievals: precision is 1.0 when nothing was relevant, else 0.0.
    Nothing relevant: recall is 1.0. F1 of two zeros is 0.0.
    """
    if retrieved == 0:
        precision = 1.0 if relevant == 0 else 0.0
    else:
        precision = tp / retrieved
    recall = 1.0 if relevant == 0 else tp / relevant
    if precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def _reads(trace: ExecutionTrace) -> list[Span]:
    return [s for s in trace.spans if s.kind is SpanKind.MEMORY_READ]


def assign_reads(trace: ExecutionTrace, memory_gold: list[dict]) -> list[dict]:
    """Per gold entry: the reads serving it and the pooled retrieval counts."""
    rows = [
        {
            "entry": entry,
            "mechanism": entry.get("mechanism", "single_hop"),
            "gold_ids": set(entry.get("gold_items", [])),
            "reads": [],
            "retrieved": [],
        }
        for entry in memory_gold
    ]
    keyword_sets = [keyword_set(entry.get("query_keywords", [])) for entry in memory_gold]
    for span in _reads(trace):
        qtoks = token_set(str(span.params.get("query", "")))
        best, best_overlap = None, 0
        for idx, kws in enumerate(keyword_sets):
            overlap = len(qtoks & kws)
            if overlap > best_overlap:
                best, best_overlap = idx, overlap
        if best is None:
            continue
        row = rows[best]
        row["reads"].append(span)
        for item_id in (span.result or {}).get("item_ids", []):
            if item_id not in row["retrieved"]:
                row["retrieved"].append(item_id)
    for row in rows:
        row["tp"] = sum(1 for i in row["retrieved"] if i in row["gold_ids"])
    return rows


def _pool(rows: list[dict]) -> tuple[float, float, float]:
    tp = sum(r["tp"] for r in rows)
    retrieved = sum(len(r["retrieved"]) for r in rows)
    relevant = sum(len(r["gold_ids"]) for r in rows)
    return retrieval_prf(tp, retrieved, relevant)


def _macro(rows: list[dict]) -> tuple[float, float, float]:
    triples = [retrieval_prf(r["tp"], len(r["retrieved"]), len(r["gold_ids"])) for r in rows]
    if not triples:
        return retrieval_prf(0, 0, 0)
    return tuple(fmean(t[i] for t in triples) for i in range(3))  # type: ignore[return-value]


def bleu1(candidate: str, references: list[str]) -> float:
    """Unigram BLEU: clipped precision times the short-candidate penalty."""
    cand = tokens(candidate)
    if not cand:
        return 0.0
    counts = Counter(cand)
    clip: Counter = Counter()
    for ref in references:
        clip |= Counter(tokens(ref))
    hit = sum(min(n, clip[tok]) for tok, n in counts.items())
    precision = hit / len(cand)
    ref_lens = sorted(len(tokens(r)) for r in references)
    c = len(cand)
    r = min(ref_lens, key=lambda L: (abs(L - c), L)) if ref_lens else 0
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return precision * bp


def rouge1(candidate: str, reference: str) -> float:
    """Unigram ROUGE F1 (balanced)."""
    ref = tokens(reference)
    if not ref:
        return 0.0
    cand = Counter(tokens(candidate))
    refc = Counter(ref)
    overlap = sum(min(n, cand[tok]) for tok, n in refc.items())
    recall = overlap / len(ref)
    precision = overlap / max(1, sum(cand.values())) if cand else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _open_domain_scores(rows: list[dict]) -> dict | None:
    scored = []
    for row in rows:
        if row["mechanism"] != "open_domain":
            continue
        refs = row["entry"].get("gold_text", [])
        if isinstance(refs, str):
            refs = [refs]
        if not refs:
            continue
        candidate = " ".join(
            content for span in row["reads"] for content in (span.result or {}).get("contents", [])
        )
        scored.append(
            (bleu1(candidate, refs), max(rouge1(candidate, ref) for ref in refs))
        )
    if not scored:
        return None
    return {
        "bleu1": fmean(s[0] for s in scored),
        "rouge1": fmean(s[1] for s in scored),
    }


def _writes(trace: ExecutionTrace) -> list[Span]:
    return [s for s in trace.spans if s.kind is SpanKind.MEMORY_WRITE]


def memory_metrics(trace: ExecutionTrace, contract, store=None, macro: bool = False) -> dict:
    """All memory-pillar numbers for one run."""
    rows = assign_reads(trace, contract.memory_gold)
    pooled = _macro(rows) if macro else _pool(rows)

    per_mechanism = {}
    for mech in MECHANISM_ORDER:
        mech_rows = [r for r in rows if r["mechanism"] == mech]
        if not mech_rows:
            continue
        p, r, f1 = _macro(mech_rows) if macro else _pool(mech_rows)
        per_mechanism[mech] = {
            "precision": p,
            "recall": r,
            "f1": f1,
            "entries": len(mech_rows),
        }

    covered = sum(1 for r in rows if r["tp"] > 0)
    unqueried = [
        " ".join(r["entry"].get("query_keywords", [])) for r in rows if not r["reads"]
    ]

    writes = _writes(trace)
    intended = [w for w in writes if w.params.get("intent_update")]
    failed_updates = [w for w in intended if not (w.result or {}).get("updated")]
    update_rate = None
    if intended:
        update_rate = (len(intended) - len(failed_updates)) / len(intended)

    read_durations = [s.duration_ms for s in _reads(trace)]
    write_durations = [s.duration_ms for s in writes]

    return {
        "precision": pooled[0],
        "recall": pooled[1],
        "f1": pooled[2],
        "pooling": "macro" if macro else "micro",
        "per_mechanism": per_mechanism,
        "coverage": 1.0 if not rows else covered / len(rows),
        "unqueried_gold": unqueried,
        "open_domain": _open_domain_scores(rows),
        "update_correct_rate": update_rate,
        "failed_updates": len(failed_updates),
        "duplicate_count": store.near_duplicate_count() if store is not None else 0,
        "accounting": {
            "read_latency_ms": {
                "mean": fmean(read_durations) if read_durations else 0.0,
                "p95": percentile(read_durations, 95) if read_durations else 0,
            },
            "write_latency_ms": {
                "mean": fmean(write_durations) if write_durations else 0.0,
            },
            "reads": len(read_durations),
            "writes": len(write_durations),
        },
    }
