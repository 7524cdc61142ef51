"""Tokenization and lexical similarity shared by retrieval, packing and accounting."""

from __future__ import annotations

import re
from collections import Counter
from typing import Iterable, List

_WORD = re.compile(r"[a-z0-9]+")
_COST_TOKEN = re.compile(r"[a-z0-9]+|[^\sa-z0-9]")


def words(text: str) -> List[str]:
    """Lowercased maximal alphanumeric runs."""
    return _WORD.findall(text.lower())


def token_count(text: str) -> int:
    """Evidence token cost: alphanumeric runs plus non-space punctuation characters."""
    return len(_COST_TOKEN.findall(text.lower()))


def f1_overlap(query_tokens: Iterable[str], doc_tokens: Iterable[str]) -> float:
    q = Counter(query_tokens)
    d = Counter(doc_tokens)
    common = sum((q & d).values())
    if common == 0:
        return 0.0
    precision = common / sum(d.values())
    recall = common / sum(q.values())
    return 2 * precision * recall / (precision + recall)


def truncate_to_budget(text: str, budget: int) -> str:
    """Longest whitespace-word prefix of ``text`` whose cost fits ``budget``.

    Falls back to a character prefix when even the first word is too expensive.
    """
    parts = text.split(" ")
    out: List[str] = []
    for part in parts:
        candidate = " ".join(out + [part])
        if token_count(candidate) > budget:
            break
        out.append(part)
    if out:
        return " ".join(out)
    prefix = ""
    for ch in text:
        if token_count(prefix + ch) > budget:
            break
        prefix += ch
    return prefix
