"""Shared fixtures: reference listings, candidate pools, runner wiring, and
generators for property-based tests."""

from __future__ import annotations

import hashlib
import json
import random
import re
import sys
from pathlib import Path

import pytest

from codevote.model import Candidate, DiffReport, EnsembleConfig, Task
from codevote.syntax import parse_check

FIXTURES = Path(__file__).parent / "fixtures"
REPO_ROOT = Path(__file__).resolve().parents[1]
RUNNER_SCRIPT = REPO_ROOT / "runner" / "src" / "coderunner.py"


def listing(n: int) -> str:
    return (FIXTURES / "listings" / f"listing{n}.py").read_text(encoding="utf-8")


def make_candidate(text: str, cid: str = "c0", task_id: str = "t0") -> Candidate:
    return parse_check(Candidate(id=cid, task_id=task_id, source_id=cid, text=text))


@pytest.fixture(scope="session")
def runner_cmd() -> str:
    if not RUNNER_SCRIPT.exists():
        pytest.skip("sandbox runner is not built")
    return f"{sys.executable} {RUNNER_SCRIPT}"


@pytest.fixture()
def config() -> EnsembleConfig:
    return EnsembleConfig()


@pytest.fixture()
def exec_config(runner_cmd) -> EnsembleConfig:
    return EnsembleConfig(runner_cmd=runner_cmd)


@pytest.fixture(scope="session")
def quartet_task() -> Task:
    raw = json.loads((FIXTURES / "quartet_task.json").read_text(encoding="utf-8"))
    return Task(
        id=raw["task_id"],
        prompt=raw["prompt"],
        entry_point=raw["entry_point"],
        reference_tests=raw["test"],
        input_constraints=tuple(raw.get("input_constraints", ())),
    )


@pytest.fixture(scope="session")
def quartet_pool(quartet_task) -> list[Candidate]:
    pool = []
    for path in sorted((FIXTURES / "quartet" / "binary_search").iterdir()):
        pool.append(
            parse_check(
                Candidate(
                    id=path.stem,
                    task_id=quartet_task.id,
                    source_id=path.stem,
                    text=path.read_text(encoding="utf-8"),
                )
            )
        )
    return pool


class StubDiffBackend:
    """Deterministic behavioral backend for execution-free tests.

    Counterexample counts are a pure, symmetric function of the pair's texts;
    identical texts always count zero.
    """

    def __call__(self, a, b, sig, config) -> DiffReport:
        if a.text == b.text:
            cex = 0
        else:
            key = "\x00".join(sorted((a.text, b.text))).encode("utf-8")
            cex = int(hashlib.sha256(key).hexdigest(), 16) % (config.n_cap + 3)
        return DiffReport(pair=(a.id, b.id), cex_count=cex, inputs_tried=config.diff_budget)


@pytest.fixture()
def stub_backend() -> StubDiffBackend:
    return StubDiffBackend()


# --- tiny random program generator (static metrics only, never executed) ----

_NAMES = ["alpha", "beta", "gamma", "delta", "omega", "kappa"]
_OPS = ["+", "-", "*", "//", "%"]
_CMP = ["<", "<=", ">", ">=", "==", "!="]


def _expr(rng: random.Random, names: list[str], depth: int = 0) -> str:
    roll = rng.random()
    if depth >= 2 or roll < 0.35:
        return rng.choice(names + [str(rng.randint(0, 9))])
    if roll < 0.8:
        return f"({_expr(rng, names, depth + 1)} {rng.choice(_OPS)} {_expr(rng, names, depth + 1)})"
    return f"len([{_expr(rng, names, depth + 1)}])"


def _block(rng: random.Random, names: list[str], indent: str, budget: int) -> list[str]:
    lines: list[str] = []
    for _ in range(rng.randint(1, budget)):
        kind = rng.random()
        if kind < 0.45:
            target = rng.choice(_NAMES)
            lines.append(f"{indent}{target} = {_expr(rng, names)}")
            if target not in names:
                names.append(target)
        elif kind < 0.6 and names:
            lines.append(f"{indent}{rng.choice(names)} += {_expr(rng, names)}")
        elif kind < 0.8:
            cond = f"{_expr(rng, names)} {rng.choice(_CMP)} {_expr(rng, names)}"
            lines.append(f"{indent}if {cond}:")
            lines.extend(_block(rng, names, indent + "    ", 2))
            if rng.random() < 0.5:
                lines.append(f"{indent}else:")
                lines.extend(_block(rng, names, indent + "    ", 2))
        else:
            loop_var = rng.choice(_NAMES)
            if loop_var not in names:
                names.append(loop_var)
            lines.append(f"{indent}for {loop_var} in range({_expr(rng, names)}):")
            lines.extend(_block(rng, names, indent + "    ", 2))
    return lines


def random_program(seed: int, n_params: int | None = None) -> str:
    """A small, always-parseable function; used only for static metrics."""
    rng = random.Random(seed)
    params = rng.sample(_NAMES, n_params if n_params is not None else rng.randint(1, 3))
    names = list(params)
    body = _block(rng, names, "    ", 3)
    body.append(f"    return {_expr(rng, names)}")
    return f"def generated({', '.join(params)}):\n" + "\n".join(body) + "\n"


def rename_identifiers(src: str) -> str:
    """Consistently rename every generator-pool identifier to a fresh name."""
    out = src
    for index, name in enumerate(_NAMES + ["generated"]):
        out = re.sub(rf"\b{name}\b", f"zz_{index}_{name}", out)
    return out


def reformat_program(src: str) -> str:
    """Whitespace and comment changes only."""
    lines = ["# reformatted"]
    for line in src.split("\n"):
        lines.append(line + ("  " if line.strip() else ""))
        lines.append("")
        lines.append("# note")
    return "\n".join(lines) + "\n"
