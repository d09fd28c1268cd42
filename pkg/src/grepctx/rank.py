"""Chunk scoring: token-set Jaccard and identifier-weighted BM25."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .search import Chunk

BM25_K1 = 1.2
BM25_B = 0.75

_TOKEN = re.compile(r"\w+")


@dataclass(frozen=True)
class TokenBag:
    tokens: Counter

    @property
    def distinct(self) -> frozenset[str]:
        return frozenset(self.tokens)

    def __len__(self) -> int:
        return sum(self.tokens.values())


@dataclass(frozen=True)
class RankedChunk:
    chunk: Chunk
    score: float
    method: str
    rank: int


def tokenize(text: str) -> TokenBag:
    """Maximal runs of word characters, case preserved, no sub-splitting."""
    return TokenBag(Counter(_TOKEN.findall(text)))


def jaccard_score(chunk_tokens: TokenBag, context_tokens: TokenBag, multiset: bool = False) -> float:
    if multiset:
        a, b = chunk_tokens.tokens, context_tokens.tokens
        union = sum((a | b).values())
        return sum((a & b).values()) / union if union else 0.0
    a, b = chunk_tokens.distinct, context_tokens.distinct
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def _order(pool: Sequence[Chunk], scores: Sequence[float], method: str) -> list[RankedChunk]:
    order = sorted(
        range(len(pool)),
        key=lambda i: (-scores[i], pool[i].file, pool[i].start, pool[i].end, pool[i].chunk_id),
    )
    return [RankedChunk(pool[i], scores[i], method, r) for r, i in enumerate(order, 1)]


def jaccard_rank(
    pool: Sequence[Chunk], context_tokens: TokenBag, multiset: bool = False
) -> list[RankedChunk]:
    scores = [jaccard_score(tokenize(c.text), context_tokens, multiset) for c in pool]
    return _order(pool, scores, "jaccard")


def bm25_scores(
    docs: Sequence[TokenBag], query_tokens: TokenBag, k1: float = BM25_K1, b: float = BM25_B
) -> list[float]:
    """Okapi BM25 with the collection taken to be ``docs`` itself.

    IDF is ``ln(1 + (N - df + 0.5) / (df + 0.5))``, which stays positive even
    for terms present in every document. Each distinct query term counts once.
    """
    n = len(docs)
    if n == 0:
        return []
    lengths = [len(d) for d in docs]
    avgdl = sum(lengths) / n
    if avgdl == 0:
        return [0.0] * n
    terms = query_tokens.distinct
    df = Counter(t for d in docs for t in d.tokens if t in terms)
    idf = {t: math.log(1.0 + (n - c + 0.5) / (c + 0.5)) for t, c in df.items()}
    scores = []
    for doc, dl in zip(docs, lengths):
        norm = k1 * (1.0 - b + b * dl / avgdl)
        s = 0.0
        for t, w in idf.items():
            tf = doc.tokens.get(t, 0)
            if tf:
                s += w * tf * (k1 + 1.0) / (tf + norm)
        scores.append(s)
    return scores


def bm25_rank(
    pool: Sequence[Chunk], query_tokens: TokenBag, k1: float = BM25_K1, b: float = BM25_B
) -> list[RankedChunk]:
    scores = bm25_scores([tokenize(c.text) for c in pool], query_tokens, k1, b)
    return _order(pool, scores, "bm25")
