"""Evaluation: code/identifier match metrics, line coverage, failure types, timing."""

from __future__ import annotations

import keyword
import re
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from statistics import fmean
from typing import Callable, Iterable, Optional, TypeVar

from .querygen import JAVA_KEYWORDS

T = TypeVar("T")

DEFAULT_TAU = 0.8
RECALL_FAILURE = "recall_failure"
RERANK_FAILURE = "rerank_failure"

PYTHON_KEYWORDS = frozenset(keyword.kwlist) | frozenset(getattr(keyword, "softkwlist", ()))
_CODE_TOKEN = re.compile(r"\w+|[^\w\s]")
_WORD = re.compile(r"\w+")


class EvaluationError(ValueError):
    """A sample cannot be scored (e.g. empty golden context)."""


@dataclass(frozen=True)
class EvalMetrics:
    code_em: float
    code_es: float
    code_recall: float
    code_f1: float
    id_em: float
    id_es: float
    id_recall: float
    id_f1: float

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Span:
    """A golden-context fragment: ``file`` lines ``interval[0]..interval[1]``."""

    file: str
    interval: tuple[int, int]


@dataclass(frozen=True)
class CoverageReport:
    ratio: float
    tau: float
    covered: bool
    failure_class: Optional[str] = None

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class LatencyRecord:
    task_id: str
    retrieval_seconds: float = 0.0
    generation_seconds: Optional[float] = None
    phase_breakdown: dict[str, float] = field(default_factory=dict)
    cpu_breakdown: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def exact_match(prediction: str, reference: str, normalize: bool = True) -> float:
    """100 if equal after collapsing whitespace (or verbatim with ``normalize=False``)."""
    if normalize:
        return 100.0 if prediction.split() == reference.split() else 0.0
    return 100.0 if prediction == reference else 0.0


def edit_similarity(prediction: str, reference: str) -> float:
    longest = max(len(prediction), len(reference))
    if longest == 0:
        return 100.0
    return 100.0 * (1.0 - levenshtein(prediction, reference) / longest)


def code_tokens(text: str) -> list[str]:
    """Word runs and single punctuation characters."""
    return _CODE_TOKEN.findall(text)


def _recall_f1(overlap: int, n_pred: int, n_ref: int) -> tuple[float, float]:
    recall = 100.0 * overlap / n_ref if n_ref else 100.0
    if n_pred:
        precision = 100.0 * overlap / n_pred
    else:
        precision = 100.0 if not n_ref else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return recall, f1


def token_recall_f1(prediction: str, reference: str) -> tuple[float, float]:
    p, r = Counter(code_tokens(prediction)), Counter(code_tokens(reference))
    return _recall_f1(sum((p & r).values()), sum(p.values()), sum(r.values()))


def identifiers(text: str, language: str) -> frozenset[str]:
    """Word tokens minus language keywords and numerals."""
    if language == "python":
        kws = PYTHON_KEYWORDS
    elif language == "java":
        kws = JAVA_KEYWORDS
    else:
        kws = PYTHON_KEYWORDS | JAVA_KEYWORDS
    return frozenset(t for t in _WORD.findall(text) if t not in kws and not t[0].isdigit())


def identifier_metrics(
    prediction: str, reference: str, language: str
) -> tuple[float, float, float, float]:
    """(em, es, recall, f1) with identifiers compared as sets."""
    p, r = identifiers(prediction, language), identifiers(reference, language)
    em = 100.0 if p == r else 0.0
    es = edit_similarity(" ".join(sorted(p)), " ".join(sorted(r)))
    recall, f1 = _recall_f1(len(p & r), len(p), len(r))
    return em, es, recall, f1


def evaluate(prediction: str, reference: str, language: str, normalize: bool = True) -> EvalMetrics:
    recall, f1 = token_recall_f1(prediction, reference)
    if normalize:
        # keeps code_em == 100 => code_es == 100 when only spacing differs
        es = edit_similarity(" ".join(prediction.split()), " ".join(reference.split()))
    else:
        es = edit_similarity(prediction, reference)
    id_em, id_es, id_recall, id_f1 = identifier_metrics(prediction, reference, language)
    return EvalMetrics(
        exact_match(prediction, reference, normalize),
        es,
        recall,
        f1,
        id_em,
        id_es,
        id_recall,
        id_f1,
    )


def lines_of(items: Iterable) -> set[tuple[str, int]]:
    """(file, line) pairs covered by chunks, blocks or spans."""
    out: set[tuple[str, int]] = set()
    for item in items:
        start, end = item.interval
        out.update((item.file, n) for n in range(start, end + 1))
    return out


def coverage_fraction(retrieved: Iterable, gold: Iterable) -> Fraction:
    gold_lines = lines_of(gold)
    if not gold_lines:
        raise EvaluationError("golden context is empty; coverage is undefined")
    return Fraction(len(lines_of(retrieved) & gold_lines), len(gold_lines))


def coverage_ratio(retrieved: Iterable, gold: Iterable) -> float:
    """Share of golden-context lines that the retrieved items cover."""
    return float(coverage_fraction(retrieved, gold))


def classify_failure(pool_coverage: float, topk_coverage: float, tau: float = DEFAULT_TAU):
    """``recall_failure`` if the pool misses gold, ``rerank_failure`` if only the top-K does, else None."""
    if pool_coverage < tau:
        return RECALL_FAILURE
    if topk_coverage < tau:
        return RERANK_FAILURE
    return None


def coverage_report(
    pool: Iterable, topk: Iterable, gold: Iterable, tau: float = DEFAULT_TAU
) -> tuple[CoverageReport, CoverageReport]:
    gold = list(gold)
    pool_ratio = coverage_ratio(pool, gold)
    topk_ratio = coverage_ratio(topk, gold)
    failure = classify_failure(pool_ratio, topk_ratio, tau)
    return (
        CoverageReport(pool_ratio, tau, pool_ratio >= tau, None),
        CoverageReport(topk_ratio, tau, topk_ratio >= tau, failure),
    )


def time_phase(phase: str, work: Callable[[], T], record: Optional[LatencyRecord] = None):
    """Run ``work`` and return ``(result, wall_seconds)``; CPU time goes to ``record``."""
    cpu0, wall0 = time.process_time(), time.perf_counter()
    result = work()
    wall = time.perf_counter() - wall0
    cpu = time.process_time() - cpu0
    if record is not None:
        record.phase_breakdown[phase] = record.phase_breakdown.get(phase, 0.0) + wall
        record.cpu_breakdown[phase] = record.cpu_breakdown.get(phase, 0.0) + max(cpu, 0.0)
    return result, wall


def aggregate(rows: Iterable[EvalMetrics]) -> dict[str, float]:
    """Unweighted per-field mean over tasks."""
    rows = list(rows)
    if not rows:
        return {}
    return {k: fmean(getattr(r, k) for r in rows) for k in EvalMetrics.__dataclass_fields__}
