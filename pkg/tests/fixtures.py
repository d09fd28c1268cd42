"""Constructed repositories and pools shared by unit and acceptance tests."""

import json
import textwrap
from pathlib import Path

from grepctx.querygen import CompletionTask
from grepctx.search import Chunk, chunk_id_for


def write_repo(root, files):
    root = Path(root)
    for rel, text in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(textwrap.dedent(text).lstrip("\n"))
    return root


DECK_REPO = {
    "deck.py": '''
        import random

        from card import Card


        class Deck:
            """Fifty-two shuffled cards."""

            def __init__(self):
                self.cards = [Card(s, r) for s in "SHDC" for r in range(1, 14)]
                random.shuffle(self.cards)

            def draw(self):
                return self.cards.pop()

            def __len__(self):
                return len(self.cards)
        ''',
    "card.py": '''
        class Card:
            def __init__(self, suit, rank):
                self.suit = suit
                self.rank = rank

            def __repr__(self):
                return f"{self.rank}{self.suit}"
        ''',
    "player.py": '''
        class Player:
            def __init__(self, name):
                self.name = name
                self.hand = []

            def take(self, card):
                self.hand.append(card)

            def show(self):
                return ", ".join(map(repr, self.hand))
        ''',
    "game.py": '''
        from deck import Deck
        from player import Player


        class Game:
            def __init__(self, names):
                self.deck = Deck()
                self.players = [Player(n) for n in names]

            def deal(self):
                for player in self.players:
                    card = self.deck.draw()
                    player.take(card)
        ''',
}

DECK_TASK = CompletionTask(
    "fig2-deck-draw",
    "game.py",
    (12, 34),
    textwrap.dedent(
        """\
        from deck import Deck
        from player import Player


        class Game:
            def __init__(self, names):
                self.deck = Deck()
                self.players = [Player(n) for n in names]

            def deal(self):
                for player in self.players:
                    card = self.deck.draw("""
    ),
    ground_truth=")",
)


def keyword_ambiguity_pool(fillers=18):
    """Pool where Jaccard and BM25 disagree on purpose.

    The query shares ten generic tokens with nearly every chunk and one rare
    identifier (``quantize_weights``) with the gold chunk only.
    """
    generic = "self config value result data state options run init item".split()
    query = " ".join(generic) + " model.quantize_weights("
    distractor = " ".join(generic) + " logger"
    gold = "def quantize_weights(tensor, bits):\n    scale = tensor.abs().max()\n    return round(tensor / scale)"
    texts = {"noise/distractor.py": distractor, "core/quant.py": gold}
    for i in range(fillers):
        texts[f"noise/filler{i:02d}.py"] = " ".join(generic) + f" handler{i} extra{i} field{i} step{i}"
    pool = [
        Chunk(chunk_id_for(path, (1, text.count("\n") + 1)), path, (1, text.count("\n") + 1),
              text, frozenset({"q00"}), 1)
        for path, text in sorted(texts.items())
    ]
    return pool, query, "noise/distractor.py", "core/quant.py"


_SCENARIOS = [
    # (module, class, method, receiver)
    ("billing", "InvoiceLedger", "post_invoice", "ledger"),
    ("storage", "BlobStore", "put_blob", "store"),
    ("search", "QueryPlanner", "plan_query", "planner"),
]


def redundancy_corpus(root):
    """Repositories where one usage file yields a wall of overlapping chunks.

    For each scenario the gold context is the class definition; a sibling
    module calls the method on nearly every line so that naive Top-K fills up
    with near-duplicate windows of that file.
    """
    root = Path(root)
    tasks, gold = [], []
    for module, cls, method, receiver in _SCENARIOS:
        definition = [
            f"class {cls}:",
            f'    """Keeps {module} records."""',
            "",
            "    def __init__(self, backend):",
            "        self.backend = backend",
            "        self.pending = []",
            "",
            f"    def {method}(self, record, *, flush=False):",
            "        self.pending.append(record)",
            "        if flush:",
            "            self.backend.write(self.pending)",
            "            self.pending = []",
            "        return len(self.pending)",
        ]
        usage = [f"from {module}.core import {cls}", "", "", "def replay(records, backend):"]
        usage += [f"    {receiver} = {cls}(backend)"]
        for _ in range(20):
            usage += ["    for record in records:", f"        {receiver}.{method}(record, backend)"]
        usage += [f"    return {receiver}"]
        write_repo(root / module, {
            f"{module}/core.py": "\n".join(definition) + "\n",
            f"{module}/replay.py": "\n".join(usage) + "\n",
            f"{module}/app.py": "placeholder = None\n",
        })
        context = "\n".join([
            f"from {module}.core import {cls}",
            "",
            "",
            "def sync(records, backend):",
            f"    {receiver} = {cls}(backend)",
            "    for record in records:",
            f"        {receiver}.{method}(",
        ])
        task = CompletionTask(f"redundancy-{module}", f"{module}/app.py", (7, 8 + len(receiver) + len(method)),
                              context, ground_truth="record, flush=True)", repo=module)
        tasks.append(task)
        gold.append({"task_id": task.task_id,
                     "gold": [{"file": f"{module}/core.py", "start": 1, "end": len(definition)}]})
    return tasks, gold


def write_jsonl(path, rows):
    Path(path).write_text("".join(json.dumps(r) + "\n" for r in rows))
    return Path(path)
