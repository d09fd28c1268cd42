"""Synthetic repositories and retrieval latency benchmarking."""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import Sequence

from .pipeline import PipelineConfig, cmd_retrieve
from .querygen import CompletionTask

_SYLLABLES = (
    "ab ac ad al am an ar as at ba be bi bo ca ce co da de di do el em en er es fa fe fi "
    "fo ga ge go ha he hi ho il in io is ka ke ko la le li lo ma me mi mo na ne ni no ol "
    "om on or os pa pe pi po ra re ri ro sa se si so ta te ti to ul un ur us va ve vi vo"
).split()
_GENERIC = ("value", "result", "config", "data", "item", "state", "count", "options", "run")

# planted in every synthetic repository so that tasks are identical across sizes
_PLANTED = '''"""Card game primitives."""

import random


class Card:
    def __init__(self, suit, rank):
        self.suit = suit
        self.rank = rank

    def score(self):
        return min(self.rank, 10)


class Deck:
    """A shuffled stack of cards."""

    def __init__(self, seed=None):
        self.cards = [Card(s, r) for s in range(4) for r in range(1, 14)]
        self.rng = random.Random(seed)
        self.rng.shuffle(self.cards)

    def draw(self, count=1):
        drawn = self.cards[:count]
        self.cards = self.cards[count:]
        return drawn

    def remaining(self):
        return len(self.cards)
'''

BENCH_TASKS = (
    CompletionTask(
        "bench-deck-draw",
        "bench/game.py",
        (7, 28),
        "from cards.deck import Deck\n\n\nclass Game:\n    def __init__(self, seed):\n"
        "        self.deck = Deck(seed)\n\n    def deal(self):\n        hand = self.deck.draw(",
    ),
    CompletionTask(
        "bench-card-score",
        "bench/rules.py",
        (5, 20),
        "from cards.deck import Card\n\n\ndef total(hand):\n"
        "    cards = [Card(c.suit, c.rank) for c in hand]\n    return sum(card.score(",
    ),
    CompletionTask(
        "bench-remaining",
        "bench/table.py",
        (4, 30),
        "class Table:\n    def status(self, deck):\n        left = deck.remaining(",
    ),
)


def _name(rng: random.Random, parts: int) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(parts))


def _class_name(rng: random.Random) -> str:
    return "".join(rng.choice(_SYLLABLES).capitalize() for _ in range(rng.randint(2, 3)))


def _module(rng: random.Random, classes: list[str], methods: list[str]) -> list[str]:
    lines = ["import os", "import sys", ""]
    for other in rng.sample(classes, k=min(2, len(classes))):
        lines.append(f"from lib.{other.lower()} import {other}")
    lines.append("")
    for _ in range(rng.randint(2, 4)):
        cls = _class_name(rng)
        classes.append(cls)
        base = rng.choice(classes[:-1]) if len(classes) > 1 and rng.random() < 0.3 else "object"
        lines += ["", f"class {cls}({base}):", f'    """{cls} helper."""', ""]
        lines += ["    def __init__(self, config, value=None):"]
        lines += ["        self.config = config", "        self.value = value", "        self.state = {}", ""]
        for _ in range(rng.randint(3, 7)):
            meth = _name(rng, rng.randint(2, 3))
            methods.append(meth)
            arg = rng.choice(_GENERIC)
            lines.append(f"    def {meth}(self, {arg}):")
            for _ in range(rng.randint(4, 12)):
                target = rng.choice(_GENERIC)
                callee = rng.choice(methods)
                roll = rng.random()
                if roll < 0.4:
                    lines.append(f"        {target} = self.{callee}({arg})")
                elif roll < 0.6:
                    lines.append(f"        if {target} is not None and self.state.get('{target}'):")
                    lines.append(f"            return {target}")
                elif roll < 0.8:
                    other = rng.choice(classes)
                    lines.append(f"        helper = {other}(self.config)")
                else:
                    lines.append(f"        self.state['{target}'] = {arg}")
            lines += [f"        return {arg}", ""]
    return lines


def synthesize_repo(root, total_lines: int, seed: int = 0) -> Path:
    """Write a deterministic Python repository of roughly ``total_lines`` lines."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if total_lines <= 0:
        return root
    rng = random.Random(seed)
    planted = root / "cards" / "deck.py"
    planted.parent.mkdir(parents=True, exist_ok=True)
    planted.write_text(_PLANTED)
    written = _PLANTED.count("\n")
    classes: list[str] = ["Card", "Deck"]
    methods: list[str] = ["draw", "score", "remaining"]
    index = 0
    while written < total_lines:
        lines = _module(rng, classes, methods)
        lines = lines[: max(1, total_lines - written)]
        path = root / f"pkg{index // 50:03d}" / f"mod{index:05d}.py"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
        written += len(lines)
        index += 1
    return root


@dataclass(frozen=True)
class BenchRow:
    size: int
    files: int
    lines: int
    tasks: int
    mean_retrieval_seconds: float
    mean_querygen_seconds: float
    mean_search_seconds: float
    mean_scan_seconds: float

    def to_json(self) -> dict:
        return self.__dict__.copy()


def run_bench(
    workdir,
    sizes: Sequence[int],
    cfg: PipelineConfig = PipelineConfig(),
    repeats: int = 3,
    seed: int = 0,
    tasks: Sequence[CompletionTask] = BENCH_TASKS,
) -> list[BenchRow]:
    """Mean per-task latency for synthetic repositories of each size.

    Every run rescans the repository from disk; nothing is reused between tasks.
    """
    rows = []
    for size in sizes:
        repo = synthesize_repo(Path(workdir) / f"repo_{size}", size, seed)
        records = []
        result = None
        for _ in range(repeats):
            for task in tasks:
                result = cmd_retrieve(repo, task, cfg)
                records.append(result.latency)
        files = sum(1 for p in repo.rglob("*.py"))
        lines = sum(len(p.read_text().splitlines()) for p in repo.rglob("*.py"))
        rows.append(
            BenchRow(
                size,
                files,
                lines,
                len(records),
                fmean(r.retrieval_seconds for r in records),
                fmean(r.phase_breakdown.get("querygen", 0.0) for r in records),
                fmean(r.phase_breakdown.get("search", 0.0) for r in records),
                fmean(r.phase_breakdown.get("scan", 0.0) for r in records),
            )
        )
    return rows
