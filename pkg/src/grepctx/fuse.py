"""Structure-aware de-duplication: fuse overlapping or nearby chunks of a file."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .corpus import RepoSnapshot
from .rank import RankedChunk


@dataclass(frozen=True)
class FusionConfig:
    top_percent: float = 50.0
    adjacency_gap: int = 1

    def __post_init__(self):
        if not 0 < self.top_percent <= 100:
            raise ValueError(f"top_percent must be in (0, 100], got {self.top_percent}")
        if self.adjacency_gap < 0:
            raise ValueError(f"adjacency_gap must be >= 0, got {self.adjacency_gap}")


@dataclass(frozen=True)
class FusedBlock:
    file: str
    interval: tuple[int, int]
    text: str
    merged_from: tuple[str, ...]
    best_rank: int
    score: float

    @property
    def start(self) -> int:
        return self.interval[0]

    @property
    def end(self) -> int:
        return self.interval[1]


def select_top_percent(ranked: Sequence[RankedChunk], top_percent: float) -> list[RankedChunk]:
    if not 0 < top_percent <= 100:
        raise ValueError(f"top_percent must be in (0, 100], got {top_percent}")
    # exact decimal arithmetic so that e.g. 10 x 70% is 7, never ceil(7.000000001)
    count = math.ceil(len(ranked) * Fraction(str(top_percent)) / 100)
    return list(ranked[:count])


def block_from_chunk(item: RankedChunk) -> FusedBlock:
    """Wrap a single ranked chunk as a block, no merging."""
    c = item.chunk
    return FusedBlock(c.file, c.interval, c.text, (c.chunk_id,), item.rank, item.score)


def merge_intervals(
    chunks: Sequence[RankedChunk], snapshot: RepoSnapshot, gap: int = 1
) -> list[FusedBlock]:
    """Merge same-file chunks whose intervals overlap or leave at most ``gap`` lines between.

    Block text is re-read from the snapshot over the hull interval. Output is
    ordered by best constituent rank.
    """
    by_file: dict[str, list[RankedChunk]] = defaultdict(list)
    for item in chunks:
        by_file[item.chunk.file].append(item)

    blocks: list[FusedBlock] = []
    for path, items in by_file.items():
        items.sort(key=lambda it: (it.chunk.start, it.chunk.end, it.rank))
        group = [items[0]]
        hi = items[0].chunk.end
        for item in items[1:]:
            if item.chunk.start - hi - 1 <= gap:
                group.append(item)
                hi = max(hi, item.chunk.end)
            else:
                blocks.append(_fuse(path, group, hi, snapshot))
                group, hi = [item], item.chunk.end
        blocks.append(_fuse(path, group, hi, snapshot))
    blocks.sort(key=lambda blk: (blk.best_rank, blk.file, blk.start))
    return blocks


def _fuse(path: str, group: list[RankedChunk], hi: int, snapshot: RepoSnapshot) -> FusedBlock:
    lo = group[0].chunk.start
    members = sorted(group, key=lambda it: it.rank)
    return FusedBlock(
        path,
        (lo, hi),
        snapshot.slice(path, (lo, hi)),
        tuple(m.chunk.chunk_id for m in members),
        members[0].rank,
        max(m.score for m in members),
    )


def dedup_pipeline(
    ranked: Sequence[RankedChunk], snapshot: RepoSnapshot, cfg: FusionConfig = FusionConfig()
) -> list[FusedBlock]:
    return merge_intervals(select_top_percent(ranked, cfg.top_percent), snapshot, cfg.adjacency_gap)
