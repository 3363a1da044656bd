"""Memory store: scoring, dedup-updates, near-duplicate detection."""

from __future__ import annotations

from hypothesis import given, strategies as st

from agentassess.memory_store import MemoryStore, jaccard


def seeded_store(threshold=0.5):
    return MemoryStore.seeded(
        [
            {"id": "mem-a", "tags": ["cost", "baseline"], "t_ms": 100, "content": "baseline is 2900 usd"},
            {"id": "mem-b", "tags": ["policy", "approval"], "t_ms": 200, "content": "cab ticket required"},
            {"id": "mem-c", "tags": ["cost", "report"], "t_ms": 300, "content": "spend report for march"},
        ],
        dedup_threshold=threshold,
    )


def test_jaccard_edges():
    assert jaccard([], []) == 1.0
    assert jaccard(["a"], []) == 0.0
    assert jaccard(["a", "b"], ["b", "c"]) == 1 / 3


@given(st.sets(st.sampled_from("abcdef")), st.sets(st.sampled_from("abcdef")))
def test_jaccard_symmetric_and_bounded(a, b):
    assert jaccard(a, b) == jaccard(b, a)
    assert 0.0 <= jaccard(a, b) <= 1.0


def test_read_scores_tags_and_content():
    store = seeded_store()
    rows = store.read(["cost", "baseline"], k=3)
    assert [r["item_id"] for r in rows] == ["mem-a", "mem-c"]
    assert rows[0]["score"] == 1.0
    assert rows[1]["score"] == 0.5  # only "cost" matches
    # content tokens count too: "ticket" appears only in mem-b's content
    assert [r["item_id"] for r in store.read(["ticket"], k=2)] == ["mem-b"]


def test_read_excludes_zero_scores_and_respects_k():
    store = seeded_store()
    assert store.read(["unrelated"], k=5) == []
    assert store.read([], k=5) == []
    assert len(store.read(["cost"], k=1)) == 1


def test_read_ties_break_by_recency_then_id():
    store = MemoryStore.seeded(
        [
            {"id": "old", "tags": ["x"], "t_ms": 10},
            {"id": "new", "tags": ["x"], "t_ms": 90},
            {"id": "m-zz", "tags": ["x"], "t_ms": 90},
        ]
    )
    # equal score: newest first; equal t_ms: lexicographic id
    assert [r["item_id"] for r in store.read(["x"], k=3)] == ["m-zz", "new", "old"]


def test_write_dedup_updates_in_place():
    store = seeded_store()
    item_id, updated, version = store.write("new baseline is 2750", ["cost", "baseline"], t_ms=400)
    assert (item_id, updated, version) == ("mem-a", True, 2)
    assert store.items["mem-a"]["content"] == "new baseline is 2750"
    assert store.items["mem-a"]["t_ms"] == 400
    assert len(store.items) == 3


def test_write_below_threshold_appends():
    store = seeded_store()
    item_id, updated, version = store.write("note", ["decision", "note"], t_ms=500)
    assert (item_id, updated, version) == ("m-001", False, 1)
    next_id, _, _ = store.write("another", ["totally", "different"], t_ms=501)
    assert next_id == "m-002"


def test_dedup_prefers_highest_overlap_then_newest():
    store = MemoryStore.seeded(
        [
            {"id": "half", "tags": ["a", "b", "x", "y"], "t_ms": 10},
            {"id": "exact-old", "tags": ["a", "b"], "t_ms": 20},
            {"id": "exact-new", "tags": ["a", "b"], "t_ms": 30},
        ]
    )
    item_id, updated, _ = store.write("w", ["a", "b"], t_ms=99)
    assert (item_id, updated) == ("exact-new", True)


def test_dedup_flag_off_always_appends():
    store = seeded_store()
    item_id, updated, _ = store.write("dup", ["cost", "baseline"], t_ms=400, dedup=False)
    assert not updated and item_id == "m-001"
    assert store.near_duplicate_count() == 1


def test_near_duplicate_count_is_greedy_over_sorted_ids():
    store = MemoryStore.seeded(
        [
            {"id": "m-001", "tags": ["a", "b"], "t_ms": 1},
            {"id": "m-002", "tags": ["a", "b"], "t_ms": 2},
            {"id": "m-003", "tags": ["a", "b", "c", "d"], "t_ms": 3},  # 0.5 vs m-001: counted
            {"id": "zed", "tags": ["q"], "t_ms": 4},
        ],
        dedup_threshold=0.5,
    )
    assert store.near_duplicate_count() == 2


def test_clone_is_independent():
    store = seeded_store()
    twin = store.clone()
    twin.write("w", ["cost", "baseline"], t_ms=999)
    assert store.items["mem-a"]["t_ms"] == 100
    assert store.read(["baseline"], k=1)[0]["t_ms"] == 100


def test_casefolding_on_tags_and_query():
    store = MemoryStore.seeded([{"id": "m", "tags": ["Cost", "BASELINE"], "t_ms": 1}])
    assert store.items["m"]["tags"] == ["baseline", "cost"]
    assert store.read(["COST"], k=1)[0]["item_id"] == "m"
