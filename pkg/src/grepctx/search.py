"""Index-free line matching over a snapshot and expansion of hits into chunks."""

from __future__ import annotations

import re
from bisect import bisect_right
from functools import lru_cache

try:
    from re import _parser as sre_parse  # Python >= 3.11
    from re import _constants as sre_constants
except ImportError:  # pragma: no cover
    import sre_constants
    import sre_parse
from dataclasses import dataclass

from .corpus import RepoSnapshot, SourceFile
from .querygen import LexicalQuery, QuerySet

DEFAULT_BEFORE = 3
DEFAULT_AFTER = 10
DEFAULT_HIT_CAP = 200

# Constructs whose meaning depends on string (not line) boundaries or on
# neighbouring text; patterns using them are matched one line at a time.
_CONTEXT_SENSITIVE = re.compile(r"\\[AZ]|\(\?<?[=!]")


@dataclass(frozen=True)
class MatchHit:
    query_id: str
    file: str
    line: int
    text: str


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    file: str
    interval: tuple[int, int]
    text: str
    provenance: frozenset[str]
    hit_line: int

    @property
    def start(self) -> int:
        return self.interval[0]

    @property
    def end(self) -> int:
        return self.interval[1]


def chunk_id_for(file: str, interval: tuple[int, int]) -> str:
    return f"{file}:{interval[0]}-{interval[1]}"


@lru_cache(maxsize=1024)
def required_literal(pattern: str, flags: int = 0) -> str:
    """Longest literal run every match of ``pattern`` must contain ("" if none).

    Only the top-level sequence is inspected; zero-width assertions do not
    interrupt a run. Case-insensitive patterns yield "".
    """
    try:
        parsed = sre_parse.parse(pattern, flags)
    except re.error:
        return ""
    if (parsed.state.flags | flags) & re.IGNORECASE:
        return ""
    best, run = "", []
    for op, av in parsed:
        if op is sre_constants.LITERAL:
            run.append(chr(av))
        elif op is sre_constants.AT:
            continue
        else:
            if len(run) > len(best):
                best = "".join(run)
            run = []
    if len(run) > len(best):
        best = "".join(run)
    return best


def _matching_lines(source: SourceFile, regex: re.Pattern, per_line: bool):
    lines = source.lines
    if not lines:
        return
    if per_line:
        for i, line in enumerate(lines):
            if regex.search(line):
                yield i + 1
        return
    text = source.text
    m = regex.search(text)
    if m is None:
        return
    starts = source.line_starts
    while True:
        idx = bisect_right(starts, m.start()) - 1
        # a whole-text match may run across a newline; confirm on the line alone
        if "\n" not in m.group() or regex.search(lines[idx]):
            yield idx + 1
        if idx + 1 >= len(lines):
            return
        m = regex.search(text, starts[idx + 1])
        if m is None:
            return


def execute_query(
    snapshot: RepoSnapshot, query: LexicalQuery, hit_cap: int = DEFAULT_HIT_CAP
) -> list[MatchHit]:
    """Every matching line, in (path, line) order, truncated to ``hit_cap``."""
    regex = query.compile()
    per_line = bool(_CONTEXT_SENSITIVE.search(query.pattern))
    literal = required_literal(query.pattern, regex.flags)
    hits: list[MatchHit] = []
    for source in snapshot.files:
        if literal and literal not in source.text:
            continue
        for line_no in _matching_lines(source, regex, per_line):
            hits.append(MatchHit(query.query_id, source.path, line_no, source.lines[line_no - 1]))
            if len(hits) >= hit_cap:
                return hits
    return hits


def expand_hit(
    snapshot: RepoSnapshot, hit: MatchHit, before: int = DEFAULT_BEFORE, after: int = DEFAULT_AFTER
) -> Chunk:
    source = snapshot.file(hit.file)
    interval = (max(1, hit.line - before), min(source.line_count, hit.line + after))
    return Chunk(
        chunk_id_for(hit.file, interval),
        hit.file,
        interval,
        source.slice(*interval),
        frozenset({hit.query_id}),
        hit.line,
    )


def execute_query_set(
    snapshot: RepoSnapshot,
    queries: QuerySet,
    before: int = DEFAULT_BEFORE,
    after: int = DEFAULT_AFTER,
    hit_cap: int = DEFAULT_HIT_CAP,
) -> list[Chunk]:
    """Candidate pool: expanded hits of all queries, coalesced on (file, interval).

    A coalesced chunk keeps the earliest hit line seen for it.
    """
    pool: dict[tuple[str, tuple[int, int]], Chunk] = {}
    for query in queries.queries:
        for hit in execute_query(snapshot, query, hit_cap):
            chunk = expand_hit(snapshot, hit, before, after)
            key = (chunk.file, chunk.interval)
            prior = pool.get(key)
            if prior is None:
                pool[key] = chunk
            else:
                pool[key] = Chunk(
                    prior.chunk_id,
                    prior.file,
                    prior.interval,
                    prior.text,
                    prior.provenance | chunk.provenance,
                    min(prior.hit_line, chunk.hit_line),
                )
    return [pool[k] for k in sorted(pool)]
