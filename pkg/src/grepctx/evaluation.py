"""Task-file driven evaluation and hyperparameter sweeps.

Results JSONL carries only deterministic fields so that identical runs are
byte-identical; timings go to a separate latency JSONL.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Iterable, Optional, Sequence

from .corpus import ConfigError, RepoSnapshot
from .metrics import (
    RECALL_FAILURE,
    RERANK_FAILURE,
    EvalMetrics,
    EvaluationError,
    LatencyRecord,
    Span,
    aggregate,
    coverage_report,
    evaluate,
    time_phase,
)
from .pipeline import PipelineConfig, load_snapshot, resolve_generator, retrieve
from .querygen import CompletionTask

logger = logging.getLogger(__name__)

SWEEP_PARAMS = ("N", "tau", "K")


def _read_jsonl(path) -> list[dict]:
    rows = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"{path}:{lineno}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return rows


def task_from_json(row: dict) -> CompletionTask:
    try:
        return CompletionTask(
            task_id=str(row["task_id"]),
            file=row["file"],
            cursor=(int(row["line"]), int(row["column"])),
            local_context=row["local_context"],
            ground_truth=row.get("ground_truth"),
            repo=row.get("repo"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed task record {row!r}: {exc}") from None


def task_to_json(task: CompletionTask) -> dict:
    row = {
        "task_id": task.task_id,
        "repo": task.repo,
        "file": task.file,
        "line": task.cursor[0],
        "column": task.cursor[1],
        "local_context": task.local_context,
    }
    if task.ground_truth is not None:
        row["ground_truth"] = task.ground_truth
    return row


def load_tasks(path) -> list[CompletionTask]:
    tasks = [task_from_json(r) for r in _read_jsonl(path)]
    ids = [t.task_id for t in tasks]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"{path}: duplicate task_id values")
    return tasks


def load_gold(path) -> dict[str, list[Span]]:
    gold: dict[str, list[Span]] = {}
    for row in _read_jsonl(path):
        try:
            gold[str(row["task_id"])] = [
                Span(g["file"], (int(g["start"]), int(g["end"]))) for g in row["gold"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed gold record {row!r}: {exc}") from None
    return gold


def load_predictions(path) -> dict[str, str]:
    try:
        return {str(r["task_id"]): r["prediction"] for r in _read_jsonl(path)}
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed predictions file {path}: {exc}") from None


@dataclass
class EvalReport:
    results: list[dict]
    latencies: list[LatencyRecord]
    summary: dict = field(default_factory=dict)

    def results_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.results)

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.jsonl").write_text(self.results_jsonl(), encoding="utf-8")
        (out / "latency.jsonl").write_text(
            "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in self.latencies),
            encoding="utf-8",
        )
        (out / "summary.json").write_text(
            json.dumps(self.summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        return out


def _evaluate_task(
    task: CompletionTask,
    snapshot: RepoSnapshot,
    cfg: PipelineConfig,
    generator,
    latency: LatencyRecord,
    gold: Optional[list[Span]],
    prediction: Optional[str],
) -> dict:
    result = retrieve(snapshot, task, cfg, generator, latency)
    row: dict = {
        "task_id": task.task_id,
        "status": "ok",
        "retrieval_empty": result.retrieval_empty,
        "queries": [q.pattern for q in result.queries.queries],
        "pool_size": len(result.pool),
        "blocks": [
            {"file": b.file, "start": b.start, "end": b.end, "rank": b.best_rank, "score": b.score}
            for b in result.pack.blocks
        ],
        "token_count": result.pack.token_count,
        "coverage": None,
        "failure_class": None,
        "metrics": None,
        "warnings": list(result.warnings),
    }
    if gold is not None:
        try:
            pool_cov, topk_cov = coverage_report(result.pool, result.pack.blocks, gold, cfg.tau)
        except EvaluationError as exc:
            row["coverage"] = {"error": str(exc)}
        else:
            row["coverage"] = {"pool": pool_cov.to_json(), "topk": topk_cov.to_json()}
            row["failure_class"] = topk_cov.failure_class
    if prediction is not None:
        if task.ground_truth is None:
            row["warnings"].append("prediction supplied but task has no ground_truth")
        else:
            row["metrics"] = evaluate(
                prediction, task.ground_truth, task.language, cfg.em_normalize
            ).to_json()
    return row


def summarize(results: Sequence[dict], latencies: Sequence[LatencyRecord]) -> dict:
    ok = [r for r in results if r["status"] == "ok"]
    covered = [r for r in ok if r["coverage"] and "pool" in r["coverage"]]
    summary: dict = {
        "tasks": len(results),
        "errored": len(results) - len(ok),
        "retrieval_empty": sum(r["retrieval_empty"] for r in ok),
        "mean_blocks": fmean(len(r["blocks"]) for r in ok) if ok else 0.0,
        "mean_token_count": fmean(r["token_count"] for r in ok) if ok else 0.0,
    }
    if covered:
        summary["coverage"] = {
            "evaluated": len(covered),
            "pool_covered": sum(r["coverage"]["pool"]["covered"] for r in covered),
            "topk_covered": sum(r["coverage"]["topk"]["covered"] for r in covered),
            "mean_pool_ratio": fmean(r["coverage"]["pool"]["ratio"] for r in covered),
            "mean_topk_ratio": fmean(r["coverage"]["topk"]["ratio"] for r in covered),
            RECALL_FAILURE: sum(r["failure_class"] == RECALL_FAILURE for r in covered),
            RERANK_FAILURE: sum(r["failure_class"] == RERANK_FAILURE for r in covered),
        }
    scored = [EvalMetrics(**r["metrics"]) for r in ok if r["metrics"]]
    if scored:
        summary["metrics"] = aggregate(scored)
    if latencies:
        phases = sorted({p for rec in latencies for p in rec.phase_breakdown})
        summary["latency"] = {
            "mean_retrieval_seconds": fmean(r.retrieval_seconds for r in latencies),
            "mean_phase_seconds": {
                p: fmean(r.phase_breakdown.get(p, 0.0) for r in latencies) for p in phases
            },
            "mean_cpu_seconds": fmean(sum(r.cpu_breakdown.values()) for r in latencies),
        }
    return summary


def cmd_eval(
    repo_root,
    tasks: Iterable[CompletionTask],
    cfg: PipelineConfig = PipelineConfig(),
    gold: Optional[dict[str, list[Span]]] = None,
    predictions: Optional[dict[str, str]] = None,
) -> EvalReport:
    """Retrieve for every task, then score coverage and predictions where available.

    Each task's repository is ``repo_root / task.repo`` (or ``repo_root`` when
    the task names none) and is scanned once per run. A task whose repository
    cannot be loaded is reported as errored; the run continues.
    """
    tasks = list(tasks)
    if gold is not None:
        missing = sorted(set(gold) - {t.task_id for t in tasks})
        if missing:
            raise ConfigError(f"gold file names unknown task ids: {missing}")
    root = Path(repo_root)
    snapshots: dict[str, object] = {}
    results: list[dict] = []
    latencies: list[LatencyRecord] = []
    generator = resolve_generator(cfg)
    try:
        for task in tasks:
            key = task.repo or ""
            latency = LatencyRecord(task.task_id)
            if key not in snapshots:
                try:
                    snapshots[key], _ = time_phase(
                        "scan", lambda: load_snapshot(root / key, cfg), latency
                    )
                except ConfigError as exc:
                    snapshots[key] = exc
            snapshot = snapshots[key]
            if isinstance(snapshot, Exception):
                results.append({"task_id": task.task_id, "status": "error", "error": str(snapshot)})
                continue
            try:
                row = _evaluate_task(
                    task,
                    snapshot,
                    cfg,
                    generator,
                    latency,
                    None if gold is None else gold.get(task.task_id),
                    None if predictions is None else predictions.get(task.task_id),
                )
            except Exception as exc:  # one bad task must not sink the run
                logger.exception("task %s failed", task.task_id)
                row = {"task_id": task.task_id, "status": "error", "error": f"{type(exc).__name__}: {exc}"}
            results.append(row)
            latencies.append(latency)
    finally:
        if generator is not None:
            generator.close()
    return EvalReport(results, latencies, summarize(results, latencies))


def _check_value(param: str, value: float) -> None:
    if param == "N" and not 0 < value <= 100:
        raise ConfigError(f"N must be in (0, 100], got {value}")
    if param == "tau" and not 0 <= value <= 1:
        raise ConfigError(f"tau must be in [0, 1], got {value}")
    if param == "K" and (value < 1 or int(value) != value):
        raise ConfigError(f"K must be a positive integer, got {value}")


def cmd_sweep(
    repo_root,
    tasks: Iterable[CompletionTask],
    param: str,
    values: Sequence[float],
    cfg: PipelineConfig = PipelineConfig(),
    gold: Optional[dict[str, list[Span]]] = None,
    predictions: Optional[dict[str, str]] = None,
) -> list[dict]:
    """One cmd_eval summary per value of ``param``."""
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}, got {param!r}")
    for v in values:
        _check_value(param, v)
    tasks = list(tasks)
    rows = []
    for v in values:
        value = int(v) if param == "K" else float(v)
        report = cmd_eval(repo_root, tasks, cfg.replace(**{param: value}), gold, predictions)
        rows.append({"param": param, "value": value, **report.summary})
    return rows
