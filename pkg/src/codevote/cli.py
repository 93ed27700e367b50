"""Command-line entry point wiring acquisition, filtering, voting, and evaluation.

Exit codes: 0 success, 1 usage error, 2 no viable candidates, 3 infrastructure
failure. Flag precedence is CLI flag > config file > built-in default.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from . import acquire, bench
from .model import ConfigError, EnsembleConfig, Task, validate_config
from .runner_client import RunnerError, RunnerUnavailable
from .syntax import NoViableCandidates, filter_candidates, parse_check
from .vote import build_matrix, select

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_VIABLE = 2
EXIT_INFRA = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    # shared flags are valid both before and after the subcommand; SUPPRESS
    # keeps a flag given before the subcommand from being reset to a default
    # by the subparser
    common = argparse.ArgumentParser(add_help=False)
    n = argparse.SUPPRESS
    common.add_argument("--config", type=Path, default=n, help="JSON config file")
    common.add_argument("--lambda", dest="lambda_", type=float, default=n)
    common.add_argument("--n-cap", dest="n_cap", type=int, default=n)
    common.add_argument("--weights", default=n, help="four comma-separated component weights")
    common.add_argument("--seed", type=int, default=n)
    common.add_argument("--timeout-ms", dest="exec_timeout_ms", type=int, default=n)
    common.add_argument("--diff-budget", dest="diff_budget", type=int, default=n)
    common.add_argument("--runner", dest="runner_cmd", default=n,
                        help="command line that launches the sandbox runner")
    common.add_argument("--jobs", type=int, default=n,
                        help="worker pool size (default: logical CPU count)")
    common.add_argument("--offline", action="store_true", default=n,
                        help="never contact providers (default)")

    parser = _Parser(prog="codevote", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[common],
                         help="fetch candidates from providers and store them")
    gen.add_argument("--tasks", type=Path, required=True)
    gen.add_argument("--out", type=Path, required=True)

    sel = sub.add_parser("select", parents=[common],
                         help="pick the consensus candidate for one task")
    sel.add_argument("--task", type=Path, required=True)
    sel.add_argument("--candidates", type=Path, required=True)

    ben = sub.add_parser("bench", parents=[common],
                         help="run the offline evaluation and emit reports")
    ben.add_argument("--tasks", type=Path, required=True)
    ben.add_argument("--candidates", type=Path, required=True)
    ben.add_argument("--out", type=Path, required=True)

    exp = sub.add_parser("explain", parents=[common],
                         help="print the per-pair breakdown for one task")
    exp.add_argument("--task", type=Path, required=True)
    exp.add_argument("--candidates", type=Path, required=True)

    return parser


_FLAG_KEYS = ("lambda_", "n_cap", "weights", "seed", "exec_timeout_ms", "diff_budget",
              "runner_cmd")


def _resolve_config(args: argparse.Namespace) -> EnsembleConfig:
    raw: dict[str, Any] = {}
    config_path = getattr(args, "config", None)
    if config_path is not None:
        try:
            raw.update(json.loads(Path(config_path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {config_path}: {exc}") from exc
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            if key == "lambda_":
                raw.pop("lambda", None)
            elif key == "weights":
                raw.pop("codebleu_weights", None)
            raw[key] = value
    return validate_config(raw)


def _load_single_task(path: Path) -> Task:
    """A task file holding one JSON object, or a one-line JSONL file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        tasks = acquire.load_tasks(path)
        if len(tasks) != 1:
            raise UsageError(f"{path} must contain exactly one task, found {len(tasks)}")
        return tasks[0]
    try:
        return Task(
            id=obj["task_id"],
            prompt=obj["prompt"],
            entry_point=obj["entry_point"],
            reference_tests=obj.get("test", ""),
            subject_language=obj.get("subject_language", "python"),
            input_constraints=tuple(obj.get("input_constraints", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid task file {path}: {exc}") from exc


def _providers_from_config(args: argparse.Namespace) -> list[acquire.ProviderSpec]:
    config_path = getattr(args, "config", None)
    if config_path is None:
        raise UsageError("generate needs a --config file with a 'providers' list")
    raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
    specs = raw.get("providers")
    if not specs:
        raise UsageError("config file has no 'providers' entries")
    return [acquire.ProviderSpec.from_dict(p) for p in specs]


def _jobs(args: argparse.Namespace) -> int:
    jobs = getattr(args, "jobs", None)
    if jobs is not None:
        if jobs < 1:
            raise UsageError("--jobs must be >= 1")
        return jobs
    return os.cpu_count() or 1


def _cmd_generate(args: argparse.Namespace) -> int:
    providers = _providers_from_config(args)
    tasks = acquire.load_tasks(args.tasks)
    for task in tasks:
        candidates, errors = acquire.fetch_candidates(task, providers)
        for record in errors:
            log.warning("task %s: %s: %s", task.id, record["provider"], record["error"])
        acquire.store_candidates(args.out, candidates)
        print(f"{task.id}: stored {len(candidates)} candidates, {len(errors)} failures")
    return EXIT_OK


def _select_for_task(task: Task, args: argparse.Namespace):
    pool = acquire.load_candidates(args.candidates, task)
    if not pool:
        raise NoViableCandidates(f"no candidate files found under {args.candidates}")
    checked = [parse_check(c, task.subject_language) for c in pool]
    survivors = filter_candidates(checked)
    return survivors, acquire.candidate_paths(args.candidates, task)


def _cmd_select(args: argparse.Namespace, config: EnsembleConfig) -> int:
    task = _load_single_task(args.task)
    survivors, paths = _select_for_task(task, args)
    matrix = build_matrix(survivors, task, config, jobs=_jobs(args))
    result = select(survivors, matrix, config)
    winner = next(c for c in survivors if c.id == result.winner_id)
    print(paths[winner.source_id])
    print(json.dumps(result.to_dict(), sort_keys=True))
    return EXIT_OK


def _cmd_explain(args: argparse.Namespace, config: EnsembleConfig) -> int:
    task = _load_single_task(args.task)
    survivors, _ = _select_for_task(task, args)
    _, breakdowns = build_matrix(
        survivors, task, config, jobs=_jobs(args), collect_breakdowns=True
    )
    for record in breakdowns:
        print(json.dumps(record, sort_keys=True))
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace, config: EnsembleConfig) -> int:
    tasks = acquire.load_tasks(args.tasks)
    if not tasks:
        raise UsageError(f"no tasks found in {args.tasks}")
    untestable = [t.id for t in tasks if not t.reference_tests]
    if untestable:
        raise UsageError(f"tasks without reference tests cannot be benchmarked: {untestable}")
    records, explain = bench.run_offline_bench(
        tasks, args.candidates, config, jobs=_jobs(args)
    )
    json_path, table_path = bench.emit_report(records, config, args.out, explain)
    print(table_path.read_text(encoding="utf-8"), end="")
    print(f"report: {json_path}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = _resolve_config(args)
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "select":
            return _cmd_select(args, config)
        if args.command == "bench":
            return _cmd_bench(args, config)
        if args.command == "explain":
            return _cmd_explain(args, config)
        raise UsageError(f"unknown command {args.command!r}")
    except (UsageError, ConfigError, acquire.TaskFileError, OSError,
            json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoViableCandidates as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_VIABLE
    except (RunnerUnavailable, RunnerError, acquire.FetchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFRA


if __name__ == "__main__":
    sys.exit(main())
