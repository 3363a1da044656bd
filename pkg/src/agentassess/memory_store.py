"""Keyword-indexed agent memory with tag-overlap deduplication.

Items are tiny documents: content text, a tag set, a timestamp, and a
version. Writes near a tag-set already present (Jaccard overlap at or above
the store threshold) update that item in place instead of appending, so
obsolete information is replaced rather than accumulated.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .util import token_set


def jaccard(a, b) -> float:
    """Jaccard overlap of two tag sets; two empty sets count as identical."""
    sa, sb = set(a), set(b)
    union = sa | sb
    if not union:
        return 1.0
    return len(sa & sb) / len(union)


@dataclass
class MemoryStore:
    dedup_threshold: float = 0.5
    items: dict = field(default_factory=dict)
    _counter: int = 0

    @classmethod
    def seeded(cls, seed_items: list[dict], dedup_threshold: float = 0.5) -> "MemoryStore":
        """Build a store from scenario seed entries ({id, content, tags, t_ms})."""
        store = cls(dedup_threshold=dedup_threshold)
        for entry in seed_items:
            store.items[str(entry["id"])] = {
                "content": str(entry.get("content", "")),
                "tags": sorted({str(t).casefold() for t in entry.get("tags", [])}),
                "t_ms": int(entry.get("t_ms", 0)),
                "version": int(entry.get("version", 1)),
            }
        return store

    def clone(self) -> "MemoryStore":
        return MemoryStore(self.dedup_threshold, copy.deepcopy(self.items), self._counter)

    def _near_duplicate(self, tags: set[str]) -> str | None:
        best = None  # (score, t_ms, item_id); highest overlap, then newest, then id
        for item_id, item in self.items.items():
            score = jaccard(tags, item["tags"])
            if score < self.dedup_threshold:
                continue
            key = (score, item["t_ms"], item_id)
            if best is None or key > best:
                best = key
        return best[2] if best else None

    def write(self, content: str, tags, t_ms: int, dedup: bool = True) -> tuple[str, bool, int]:
        """Store or update; returns (item_id, updated, version)."""
        tag_set = {str(t).casefold() for t in tags}
        if dedup:
            hit = self._near_duplicate(tag_set)
            if hit is not None:
                item = self.items[hit]
                item["content"] = str(content)
                item["tags"] = sorted(tag_set)
                item["t_ms"] = int(t_ms)
                item["version"] += 1
                return hit, True, item["version"]
        self._counter += 1
        item_id = f"m-{self._counter:03d}"
        self.items[item_id] = {
            "content": str(content),
            "tags": sorted(tag_set),
            "t_ms": int(t_ms),
            "version": 1,
        }
        return item_id, False, 1

    def read(self, query_keywords, k: int = 3) -> list[dict]:
        """Top-k items by keyword overlap; zero-score items never surface.

        score = |query ∩ (tags ∪ content tokens)| / |query|, ties broken by
        recency (newer first) then item id.
        """
        query = {str(q).casefold() for q in query_keywords}
        if not query:
            return []
        scored = []
        for item_id, item in self.items.items():
            haystack = set(item["tags"]) | token_set(item["content"])
            score = len(query & haystack) / len(query)
            if score > 0:
                scored.append((-score, -item["t_ms"], item_id))
        scored.sort()
        out = []
        for neg_score, neg_t, item_id in scored[: max(0, int(k))]:
            item = self.items[item_id]
            out.append(
                {
                    "item_id": item_id,
                    "score": -neg_score,
                    "content": item["content"],
                    "tags": list(item["tags"]),
                    "t_ms": item["t_ms"],
                    "version": item["version"],
                }
            )
        return out

    def near_duplicate_count(self) -> int:
        """Items whose tag set collides with an earlier item at the store threshold."""
        kept: list[tuple[str, list]] = []
        duplicates = 0
        for item_id in sorted(self.items):
            tags = self.items[item_id]["tags"]
            if any(jaccard(tags, other) >= self.dedup_threshold for _, other in kept):
                duplicates += 1
            else:
                kept.append((item_id, tags))
        return duplicates
