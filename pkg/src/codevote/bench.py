"""Evaluation harness: reference-test verdicts, pass@1, achievable accuracy,
and report emission.

Every source's candidate is test-evaluated on every task (not only the
winner): the per-source rows and the achievable-accuracy upper bound both
need the full grid.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from .acquire import load_candidates
from .diffbehave import DiffBackend
from .model import Candidate, EnsembleConfig, Task
from .runner_client import RunnerProcess, resolve_runner_cmd
from .syntax import NoViableCandidates, filter_candidates, parse_check
from .vote import build_matrix, select

log = logging.getLogger(__name__)

# reference suites run longer than single calls
TEST_TIMEOUT_FACTOR = 10


@dataclass(frozen=True)
class RunRecord:
    """Per-task evaluation outcome for the whole source roster."""

    task_id: str
    per_source_correct: Mapping[str, bool]
    selected_source: str
    selected_correct: bool
    survivors: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_source_correct", dict(self.per_source_correct))
        if self.selected_source != "none" and self.selected_source not in self.per_source_correct:
            raise ValueError(f"selected source {self.selected_source!r} not in roster")

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "per_source_correct": dict(sorted(self.per_source_correct.items())),
            "selected_source": self.selected_source,
            "selected_correct": self.selected_correct,
            "survivors": self.survivors,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunRecord":
        return cls(
            task_id=data["task_id"],
            per_source_correct=data["per_source_correct"],
            selected_source=data["selected_source"],
            selected_correct=data["selected_correct"],
            survivors=data["survivors"],
        )


def compose_test_program(task: Task) -> str:
    """HumanEval-style suites define ``check``; append the call if absent."""
    tests = task.reference_tests
    if "def check(" in tests and f"check({task.entry_point})" not in tests:
        return tests + f"\n\ncheck({task.entry_point})\n"
    return tests


def run_reference_tests(
    task: Task,
    program_text: str,
    config: EnsembleConfig,
    runner_cmd: list[str] | None = None,
) -> bool:
    """True iff the reference suite runs against the program with no failures."""
    if not task.reference_tests:
        raise ValueError(f"task {task.id!r} has no reference tests")
    cmd = runner_cmd if runner_cmd is not None else resolve_runner_cmd(config)
    timeout_ms = config.exec_timeout_ms * TEST_TIMEOUT_FACTOR
    with RunnerProcess(cmd) as runner:
        ok, error = runner.load(program_text, timeout_s=timeout_ms / 1000.0)
        if not ok:
            log.debug("task %s: program failed to load: %s", task.id, error)
            return False
        passed, _failures = runner.run_tests(compose_test_program(task), timeout_ms)
        return passed


def pass_at_1(records: Sequence[RunRecord]) -> float:
    """Percentage of tasks whose selected program passes its reference tests."""
    if not records:
        raise ValueError("record list must be non-empty")
    return 100.0 * sum(r.selected_correct for r in records) / len(records)


def achievable_accuracy(records: Sequence[RunRecord]) -> float:
    """Percentage of tasks where at least one source produced a correct program."""
    if not records:
        raise ValueError("record list must be non-empty")
    hits = sum(any(r.per_source_correct.values()) for r in records)
    return 100.0 * hits / len(records)


def evaluate_task(
    task: Task,
    candidates: Sequence[Candidate],
    config: EnsembleConfig,
    backend: DiffBackend | None = None,
    jobs: int = 1,
    collect_explain: bool = False,
) -> tuple[RunRecord, list[dict]]:
    """Select a winner for one task and grade every source against the tests."""
    checked = [parse_check(c, task.subject_language) for c in candidates]
    per_source = {
        c.source_id: run_reference_tests(task, c.text, config)
        for c in sorted(checked, key=lambda c: c.source_id)
    }
    explain: list[dict] = []
    try:
        survivors = filter_candidates(checked)
    except NoViableCandidates:
        record = RunRecord(
            task_id=task.id,
            per_source_correct=per_source,
            selected_source="none",
            selected_correct=False,
            survivors=0,
        )
        return record, explain

    if collect_explain:
        matrix, explain = build_matrix(
            survivors, task, config, backend=backend, jobs=jobs, collect_breakdowns=True
        )
    else:
        matrix = build_matrix(survivors, task, config, backend=backend, jobs=jobs)
    result = select(survivors, matrix, config)
    winner = next(c for c in survivors if c.id == result.winner_id)
    record = RunRecord(
        task_id=task.id,
        per_source_correct=per_source,
        selected_source=winner.source_id,
        selected_correct=per_source[winner.source_id],
        survivors=len(survivors),
    )
    return record, explain


def run_offline_bench(
    tasks: Sequence[Task],
    candidates_root: Path,
    config: EnsembleConfig,
    backend: DiffBackend | None = None,
    jobs: int = 1,
) -> tuple[list[RunRecord], list[dict]]:
    """Evaluate every task against the candidate pools stored under a root dir."""
    records: list[RunRecord] = []
    explain: list[dict] = []
    for task in tasks:
        pool = load_candidates(candidates_root, task)
        if not pool:
            log.warning("task %s: no candidates found, recording an empty pool", task.id)
            records.append(
                RunRecord(
                    task_id=task.id,
                    per_source_correct={},
                    selected_source="none",
                    selected_correct=False,
                    survivors=0,
                )
            )
            continue
        record, task_explain = evaluate_task(
            task, pool, config, backend=backend, jobs=jobs, collect_explain=True
        )
        records.append(record)
        explain.extend(task_explain)
    return records, explain


def _source_accuracy(records: Sequence[RunRecord]) -> dict[str, float]:
    sources = sorted({s for r in records for s in r.per_source_correct})
    return {
        s: 100.0 * sum(r.per_source_correct.get(s, False) for r in records) / len(records)
        for s in sources
    }


def emit_report(
    records: Sequence[RunRecord],
    config: EnsembleConfig,
    out_dir: Path,
    explain: Sequence[dict] = (),
) -> tuple[Path, Path]:
    """Write the JSON report and the fixed-width accuracy table.

    Output is fully deterministic (sorted keys, no timestamps): identical
    inputs and seed produce byte-identical files.
    """
    if not records:
        raise ValueError("cannot emit a report for zero tasks")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ensemble = pass_at_1(records)
    ceiling = achievable_accuracy(records)
    per_source = _source_accuracy(records)

    payload = {
        "config": config.to_dict(),
        "records": [r.to_dict() for r in records],
        "explain": list(explain),
        "summary": {
            "tasks": len(records),
            "pass_at_1": ensemble,
            "achievable_accuracy": ceiling,
            "per_source_pass_at_1": per_source,
        },
    }
    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    width = max([len("ensemble")] + [len(s) for s in per_source]) + 2
    lines = [f"{'source':<{width}}pass@1 (%)", "-" * (width + 14)]
    for source, accuracy in per_source.items():
        lines.append(f"{source:<{width}}{accuracy:>10.1f}")
    lines.append(f"{'ensemble':<{width}}{ensemble:>10.1f} ({ceiling:.1f})")
    table_path = out_dir / "report.txt"
    table_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return json_path, table_path
