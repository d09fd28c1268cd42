"""Command-line front end: retrieve, eval, bench, sweep."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path

from .bench import run_bench
from .corpus import ConfigError
from .evaluation import (
    SWEEP_PARAMS,
    cmd_eval,
    cmd_sweep,
    load_gold,
    load_predictions,
    load_tasks,
    task_from_json,
)
from .pipeline import PipelineConfig, cmd_retrieve, load_config
from .querygen import ProtocolError


def _numbers(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if getattr(args, "mode", None):
        cfg = cfg.replace(mode=args.mode)
    return cfg


def _read_task(source: str):
    if source == "-":
        raw = sys.stdin.read()
    elif source.lstrip().startswith("{"):
        raw = source
    else:
        try:
            raw = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read task {source}: {exc}") from None
    try:
        return task_from_json(json.loads(raw))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"task is not valid JSON: {exc}") from None


def _emit(payload, out) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def run_retrieve(args) -> int:
    cfg = _config(args)
    task = _read_task(args.task)
    result = cmd_retrieve(args.repo, task, cfg)
    payload = {
        "pack": result.pack.to_json(),
        "retrieval_empty": result.retrieval_empty,
        "queries": [q.pattern for q in result.queries.queries],
        "latency": result.latency.to_json(),
        "warnings": result.warnings,
    }
    _emit(payload, args.out)
    return 0


def run_eval(args) -> int:
    cfg = _config(args)
    tasks = load_tasks(args.tasks)
    gold = load_gold(args.gold) if args.gold else None
    preds = load_predictions(args.predictions) if args.predictions else None
    report = cmd_eval(args.repo_root, tasks, cfg, gold, preds)
    out = report.write(args.out or "eval_out")
    logging.getLogger("grepctx").info("wrote %s", out)
    sys.stdout.write(json.dumps(report.summary, indent=2, sort_keys=True) + "\n")
    return 0


def run_bench_cmd(args) -> int:
    cfg = _config(args)
    sizes = [int(s) for s in args.sizes]
    if args.workdir:
        rows = run_bench(args.workdir, sizes, cfg, args.repeats)
    else:
        with tempfile.TemporaryDirectory(prefix="grepctx-bench-") as tmp:
            rows = run_bench(tmp, sizes, cfg, args.repeats)
    _emit([r.to_json() for r in rows], args.out)
    return 0


def run_sweep(args) -> int:
    cfg = _config(args)
    tasks = load_tasks(args.tasks)
    gold = load_gold(args.gold) if args.gold else None
    preds = load_predictions(args.predictions) if args.predictions else None
    rows = cmd_sweep(args.repo_root, tasks, args.param, args.values, cfg, gold, preds)
    _emit(rows, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grepctx", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file; keys are PipelineConfig field names")
    common.add_argument("--mode", choices=("naive", "full"))
    common.add_argument("--out", help="output file; for eval a directory (default eval_out)")

    p = sub.add_parser("retrieve", parents=[common], help="build a context pack for one task")
    p.add_argument("--repo", required=True)
    p.add_argument("--task", required=True, help="task JSON file, inline JSON, or - for stdin")
    p.set_defaults(func=run_retrieve)

    p = sub.add_parser("eval", parents=[common], help="evaluate a task file")
    p.add_argument("--repo-root", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--gold")
    p.add_argument("--predictions")
    p.set_defaults(func=run_eval)

    p = sub.add_parser("bench", parents=[common], help="latency on synthetic repositories")
    p.add_argument("--sizes", type=_numbers, required=True, help="e.g. 10000,100000")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--workdir", help="keep generated repositories here")
    p.set_defaults(func=run_bench_cmd)

    p = sub.add_parser("sweep", parents=[common], help="re-run eval across parameter values")
    p.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    p.add_argument("--values", type=_numbers, required=True)
    p.add_argument("--repo-root", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--gold")
    p.add_argument("--predictions")
    p.set_defaults(func=run_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, ProtocolError) as exc:
        print(f"grepctx: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
