"""End-to-end retrieval for one completion site."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .assemble import RELEVANCE_FIRST, ContextPack, assemble_context
from .corpus import MAX_FILE_BYTES, ConfigError, RepoSnapshot, scan_repo
from .fuse import FusedBlock, FusionConfig, block_from_chunk, dedup_pipeline
from .metrics import DEFAULT_TAU, LatencyRecord, time_phase
from .querygen import CompletionTask, ExternalGenerator, QuerySet, generate_queries
from .rank import RankedChunk, bm25_rank, jaccard_rank, tokenize
from .search import Chunk, execute_query_set

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

NAIVE = "naive"
FULL = "full"


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = FULL
    m: int = 10
    K: int = 10
    budget: int = 4096
    N: float = 50.0
    G: int = 1
    before: int = 3
    after: int = 10
    L: int = 20
    hit_cap: int = 200
    generator: str = "heuristic"
    tau: float = DEFAULT_TAU
    order: str = RELEVANCE_FIRST
    multiset_jaccard: bool = False
    exclude_current_file: bool = True
    em_normalize: bool = True
    ignore: tuple[str, ...] = ()
    languages: Optional[tuple[str, ...]] = None
    max_file_bytes: int = MAX_FILE_BYTES

    def __post_init__(self):
        if self.mode not in (NAIVE, FULL):
            raise ConfigError(f"mode must be 'naive' or 'full', got {self.mode!r}")
        for name in ("m", "K", "budget", "L", "hit_cap"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("G", "before", "after"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0 < self.N <= 100:
            raise ConfigError(f"N must be in (0, 100], got {self.N}")
        if not 0 <= self.tau <= 1:
            raise ConfigError(f"tau must be in [0, 1], got {self.tau}")

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, data: dict) -> "PipelineConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        data = dict(data)
        for key in ("ignore", "languages"):
            if isinstance(data.get(key), list):
                data[key] = tuple(data[key])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path) -> PipelineConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from None
    return PipelineConfig.from_mapping(data)


def load_snapshot(repo, cfg: PipelineConfig) -> RepoSnapshot:
    return scan_repo(repo, cfg.ignore, cfg.languages, cfg.max_file_bytes)


def query_window(local_context: str, lines: int) -> str:
    return "\n".join(local_context.split("\n")[-lines:])


@dataclass
class RetrievalResult:
    task_id: str
    queries: QuerySet
    pool: list[Chunk]
    ranked: list[RankedChunk]
    blocks: list[FusedBlock]
    pack: ContextPack
    latency: LatencyRecord
    warnings: list[str] = field(default_factory=list)

    @property
    def retrieval_empty(self) -> bool:
        return self.pack.empty


def resolve_generator(cfg: PipelineConfig) -> Optional[ExternalGenerator]:
    if cfg.generator != "heuristic":
        return ExternalGenerator(cfg.generator)
    return ExternalGenerator.from_env()


def retrieve(
    snapshot: RepoSnapshot,
    task: CompletionTask,
    cfg: PipelineConfig = PipelineConfig(),
    generator: Optional[ExternalGenerator] = None,
    latency: Optional[LatencyRecord] = None,
) -> RetrievalResult:
    """Run query generation, search, ranking, (fusion) and assembly over ``snapshot``."""
    latency = latency if latency is not None else LatencyRecord(task.task_id)
    if not task.local_context:
        queries = QuerySet(task.task_id, (), "heuristic")
    elif generator is None:
        queries, _ = time_phase("querygen", lambda: generate_queries(task, cfg.m, cfg.L), latency)
    else:
        queries, secs = time_phase("querygen", lambda: generator.generate(task, cfg.m), latency)
        latency.generation_seconds = secs

    view = snapshot.without(task.file) if cfg.exclude_current_file else snapshot
    pool, _ = time_phase(
        "search",
        lambda: execute_query_set(view, queries, cfg.before, cfg.after, cfg.hit_cap),
        latency,
    )
    context_tokens = tokenize(query_window(task.local_context, cfg.L))
    if cfg.mode == NAIVE:
        ranked, _ = time_phase(
            "rank", lambda: jaccard_rank(pool, context_tokens, cfg.multiset_jaccard), latency
        )
        blocks = [block_from_chunk(r) for r in ranked]
    else:
        ranked, _ = time_phase("rank", lambda: bm25_rank(pool, context_tokens), latency)
        blocks, _ = time_phase(
            "fuse", lambda: dedup_pipeline(ranked, view, FusionConfig(cfg.N, cfg.G)), latency
        )
    pack, _ = time_phase(
        "assemble",
        lambda: assemble_context(blocks, cfg.K, cfg.budget, task.task_id, cfg.order),
        latency,
    )
    latency.retrieval_seconds = sum(latency.phase_breakdown.values())
    return RetrievalResult(
        task.task_id, queries, pool, ranked, blocks, pack, latency, list(queries.warnings)
    )


def cmd_retrieve(
    repo, task: CompletionTask, cfg: PipelineConfig = PipelineConfig(), generator=None
) -> RetrievalResult:
    """Scan ``repo`` from disk and retrieve for ``task``; scanning is timed as its own phase."""
    latency = LatencyRecord(task.task_id)
    snapshot, _ = time_phase("scan", lambda: load_snapshot(Path(repo), cfg), latency)
    owned = generator is None
    if owned:
        generator = resolve_generator(cfg)
    try:
        result = retrieve(snapshot, task, cfg, generator, latency)
    finally:
        if owned and generator is not None:
            generator.close()
    result.warnings[:0] = list(snapshot.warnings)
    return result
