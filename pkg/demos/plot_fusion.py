"""
Fusing overlapping search results
=================================

Hits from different queries often land a few lines apart. Fusion keeps
the best ranked fraction of the pool and merges intervals that overlap
or sit within a small gap of each other.
"""

from grepctx.corpus import RepoSnapshot, SourceFile
from grepctx.fuse import FusionConfig, dedup_pipeline
from grepctx.rank import RankedChunk
from grepctx.search import Chunk, chunk_id_for

lines = tuple(f"line {i}" for i in range(1, 61))
snap = RepoSnapshot(None, (SourceFile("mod.py", lines, "python"),), frozenset({"python"}))

spans = [(10, 20), (18, 25), (27, 30), (40, 44), (50, 55), (1, 3)]
ranked = []
for rank, (s, e) in enumerate(spans, 1):
    c = Chunk(chunk_id_for("mod.py", (s, e)), "mod.py", (s, e), snap.slice("mod.py", (s, e)), frozenset({"q"}), s)
    ranked.append(RankedChunk(c, 1.0 / rank, "bm25", rank))

for top in (100.0, 50.0):
    for gap in (0, 1):
        blocks = dedup_pipeline(ranked, snap, FusionConfig(top_percent=top, adjacency_gap=gap))
        print(f"top {top:>5}% gap {gap}:", [b.interval for b in blocks])
