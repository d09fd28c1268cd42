"""Index-free, grep-style context retrieval for repository-level code completion."""

from .assemble import ContextPack, assemble_context, count_tokens
from .corpus import ConfigError, RepoSnapshot, SliceRangeError, SourceFile, scan_repo
from .fuse import FusedBlock, FusionConfig, dedup_pipeline, merge_intervals, select_top_percent
from .metrics import (
    CoverageReport,
    EvalMetrics,
    LatencyRecord,
    Span,
    classify_failure,
    coverage_ratio,
    edit_similarity,
    exact_match,
    identifier_metrics,
    time_phase,
    token_recall_f1,
)
from .pipeline import PipelineConfig, cmd_retrieve, retrieve
from .querygen import (
    CompletionTask,
    ExternalGenerator,
    LexicalQuery,
    QuerySet,
    extract_identifiers,
    generate_queries,
    parse_external_queries,
)
from .rank import RankedChunk, TokenBag, bm25_rank, jaccard_rank, jaccard_score, tokenize
from .search import Chunk, MatchHit, execute_query, execute_query_set, expand_hit

__version__ = "0.1.0"
