"""Small shared helpers: tokenization, glob matching, exact averaging."""

from __future__ import annotations

import re
from fnmatch import fnmatchcase
from fractions import Fraction

_TOKEN_RE = re.compile(r"[a-z0-9_](?:[a-z0-9_\-.]*[a-z0-9_])?")


def tokens(text: str) -> list[str]:
    """Case-folded whole tokens of a text.

    Tokens keep interior hyphens, dots, and underscores so resource ids
    (``sg-db-1``) and tool names (``check_metrics``) survive as units.
    No stemming.
    """
    return _TOKEN_RE.findall(str(text).casefold())


def token_set(text: str) -> set[str]:
    return set(tokens(text))


def keyword_set(keywords) -> set[str]:
    """Normalize a keyword list (or space-joined string) into a token set."""
    if isinstance(keywords, str):
        return token_set(keywords)
    out: set[str] = set()
    for kw in keywords:
        out.update(tokens(kw))
    return out


def glob_match(pattern, value: str) -> bool:
    """Case-insensitive glob match; pattern may be one glob or a list of globs."""
    if isinstance(pattern, (list, tuple)):
        return any(glob_match(p, value) for p in pattern)
    return fnmatchcase(str(value).casefold(), str(pattern).casefold())


def mean_exact(values) -> float:
    """Arithmetic mean computed with exact rationals, converted at the end.

    Floats are lifted to their exact binary rational, so averaging is
    order-independent and reproducible byte-for-byte.
    """
    vals = list(values)
    if not vals:
        return 0.0
    total = sum(Fraction(v) for v in vals)
    return float(total / len(vals))


def percentile(values, q: float) -> float:
    """Nearest-rank percentile for q in percent (deterministic, no interpolation)."""
    vals = sorted(values)
    if not vals:
        return 0.0
    rank = max(1, -(-int(q * len(vals)) // 100))  # ceil(q*n/100) without float fuzz
    rank = min(rank, len(vals))
    return float(vals[rank - 1])
