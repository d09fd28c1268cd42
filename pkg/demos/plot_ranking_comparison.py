"""
Jaccard versus BM25 on a noisy pool
===================================

A chunk that repeats common tokens looks similar to the query under set
overlap. BM25 discounts those tokens and prefers the chunk that shares
the one rare identifier.
"""

from grepctx.rank import bm25_rank, jaccard_rank, tokenize
from grepctx.search import Chunk, chunk_id_for


def chunk(path, text):
    return Chunk(chunk_id_for(path, (1, 1)), path, (1, 1), text, frozenset({"q"}), 1)


common = "self result value data return if for in len append"
pool = [chunk(f"noise/n{i}.py", f"{common} filler{i}") for i in range(8)]
pool.append(chunk("noise/busy.py", f"{common} {common} items"))
pool.append(chunk("core/quant.py", "def quantize_weights(w, bits): return w"))

query = tokenize(f"{common} quantize_weights")

for name, ranked in (("jaccard", jaccard_rank(pool, query)), ("bm25", bm25_rank(pool, query))):
    print(name)
    for r in ranked[:3]:
        print(f"  {r.rank}. {r.chunk.file:<16} {r.score:.3f}")
