"""
Retrieving context for a completion cursor
==========================================

Build a tiny repository, point a cursor at an unfinished line and follow
a task through query generation, search, ranking, fusion and packing.
"""

import tempfile
from pathlib import Path

from grepctx import CompletionTask, PipelineConfig, cmd_retrieve

root = Path(tempfile.mkdtemp())
(root / "cards").mkdir()
(root / "cards/deck.py").write_text(
    "import random\n\n"
    "class Deck:\n"
    "    def __init__(self, cards):\n"
    "        self.cards = list(cards)\n\n"
    "    def draw(self):\n"
    "        return self.cards.pop()\n\n"
    "    def shuffle(self, seed=None):\n"
    "        random.Random(seed).shuffle(self.cards)\n"
)
(root / "cards/util.py").write_text("def clamp(x, lo, hi):\n    return max(lo, min(x, hi))\n")

ctx = "from cards.deck import Deck\n\ndeck = Deck(range(52))\ndeck.shuffle(7)\ntop = deck.draw("
task = CompletionTask("demo-1", "game.py", (5, len("top = deck.draw(")), ctx)

# %%
# The heuristic generator reads the last lines before the cursor and
# proposes a handful of regular expressions, strongest symbols first.
res = cmd_retrieve(root, task, PipelineConfig(budget=512))
for q in res.queries.queries:
    print(f"{q.query_id} {q.kind:<14} {q.pattern}")

# %%
# Every hit is widened into a chunk, scored with BM25, fused with its
# neighbours and packed under the token budget.
print(res.pack.rendered)
print("tokens:", res.pack.token_count, "of", res.pack.budget)
print({k: f"{v * 1e3:.2f} ms" for k, v in res.latency.phase_breakdown.items()})
