"""Top-K, token-budgeted context packs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import language_of
from .fuse import FusedBlock
from .rank import tokenize

RELEVANCE_FIRST = "relevance_first"
RELEVANCE_LAST = "relevance_last"


@dataclass(frozen=True)
class ContextPack:
    task_id: str
    blocks: tuple[FusedBlock, ...]
    token_count: int
    budget: int
    rendered: str

    @property
    def empty(self) -> bool:
        return not self.blocks

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "budget": self.budget,
            "token_count": self.token_count,
            "blocks": [
                {
                    "file": b.file,
                    "start": b.start,
                    "end": b.end,
                    "rank": b.best_rank,
                    "score": b.score,
                    "merged_from": list(b.merged_from),
                    "text": b.text,
                }
                for b in self.blocks
            ],
            "rendered": self.rendered,
        }


def count_tokens(text: str) -> int:
    """Lexical token count; a stand-in for the model tokenizer."""
    return len(tokenize(text))


def header(block: FusedBlock) -> str:
    prefix = "#" if language_of(block.file) == "python" else "//"
    return f"{prefix} file: {block.file} lines {block.start}-{block.end}"


def render(blocks: Sequence[FusedBlock], order: str = RELEVANCE_FIRST) -> str:
    ordered = sorted(blocks, key=lambda b: b.best_rank, reverse=(order == RELEVANCE_LAST))
    return "\n\n".join(f"{header(b)}\n{b.text}" for b in ordered)


def assemble_context(
    blocks: Sequence[FusedBlock],
    k: int = 10,
    budget: int = 4096,
    task_id: str = "",
    order: str = RELEVANCE_FIRST,
) -> ContextPack:
    """Admit whole blocks in rank order until ``k`` are in or the list runs out.

    A block that would push the rendered pack over ``budget`` is skipped, never
    truncated; later, smaller blocks may still fit.
    """
    if k < 1 or budget < 1:
        raise ValueError("k and budget must both be >= 1")
    if order not in (RELEVANCE_FIRST, RELEVANCE_LAST):
        raise ValueError(f"unknown order {order!r}")
    admitted: list[FusedBlock] = []
    rendered, used = "", 0
    for block in sorted(blocks, key=lambda b: b.best_rank):
        if len(admitted) >= k:
            break
        # cheap reject; tokens never span the newline separators, so this is exact
        if used + count_tokens(f"{header(block)}\n{block.text}") > budget:
            continue
        trial = render(admitted + [block], order)
        n = count_tokens(trial)
        if n <= budget:
            admitted.append(block)
            rendered, used = trial, n
    return ContextPack(task_id, tuple(admitted), used, budget, rendered)
