"""Behavioral similarity by cross-executing candidate pairs on generated inputs.

The backend contract is small on purpose: anything that can produce a
counterexample count for a pair satisfies it, so the bundled generate-and-run
engine can be swapped for a symbolic one without touching the voting layer.
"""

from __future__ import annotations

import ast
import json
import math
import random
from dataclasses import dataclass
from typing import Any, Callable

from .model import Candidate, DiffReport, EnsembleConfig, ExecOutcome, Task, Witness
from .runner_client import RunnerProcess, resolve_runner_cmd
from .syntax import parse_module

# type hints understood by the input generator
INT = "int"
FLOAT = "float"
BOOL = "bool"
STRING = "string"
ANY = "any"
# parametric hints are tuples: ("list", elem), ("dict", key, value), ("tuple", (h, ...))

Hint = Any


class EntryPointMissing(Exception):
    """The candidate does not define the task's entry point."""


@dataclass(frozen=True)
class CallSignature:
    function_name: str
    params: tuple[tuple[str, Hint], ...]
    constraints: tuple[str, ...] = ()


DiffBackend = Callable[[Candidate, Candidate, CallSignature, EnsembleConfig], DiffReport]


def _hint_from_annotation(node: ast.expr | None) -> Hint:
    if node is None:
        return ANY
    if isinstance(node, ast.Name):
        return {
            "int": INT,
            "float": FLOAT,
            "bool": BOOL,
            "str": STRING,
            "list": ("list", ANY),
            "dict": ("dict", ANY, ANY),
            "tuple": ("tuple", (ANY,)),
        }.get(node.id, ANY)
    if isinstance(node, ast.Subscript):
        base = node.value
        base_name = base.id if isinstance(base, ast.Name) else getattr(base, "attr", "")
        inner = node.slice
        elems = inner.elts if isinstance(inner, ast.Tuple) else [inner]
        hints = tuple(_hint_from_annotation(e) for e in elems)
        name = base_name.lower()
        if name == "list":
            return ("list", hints[0])
        if name == "dict":
            return ("dict", hints[0], hints[1] if len(hints) > 1 else ANY)
        if name == "tuple":
            return ("tuple", hints)
        if name == "optional":
            return hints[0]
        if name in ("sequence", "iterable"):
            return ("list", hints[0])
        return ANY
    if isinstance(node, ast.Attribute):
        return _hint_from_annotation(ast.Name(id=node.attr, ctx=ast.Load()))
    return ANY


def derive_signature(task: Task, candidate: Candidate) -> CallSignature:
    """Read the entry point's parameter list and hints out of the candidate."""
    tree = parse_module(candidate.text)
    for node in tree.body:
        if (
            isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef))
            and node.name == task.entry_point
        ):
            params = tuple(
                (arg.arg, _hint_from_annotation(arg.annotation))
                for arg in list(node.args.posonlyargs) + list(node.args.args)
            )
            return CallSignature(
                function_name=task.entry_point,
                params=params,
                constraints=task.input_constraints,
            )
    raise EntryPointMissing(
        f"candidate {candidate.id!r} does not define entry point {task.entry_point!r}"
    )


def unify_signatures(a: CallSignature, b: CallSignature) -> CallSignature | None:
    """Common call shape for a pair, or None when the arities disagree."""
    if len(a.params) != len(b.params):
        return None
    params = tuple(
        (pa[0], pa[1] if pa[1] == pb[1] else ANY) for pa, pb in zip(a.params, b.params)
    )
    return CallSignature(function_name=a.function_name, params=params, constraints=a.constraints)


# --- input generation -------------------------------------------------------

_BOUNDARY: dict[Any, list] = {
    INT: [0, -1, 1, 2, -2, 10, 5, 7, 3, 100],
    FLOAT: [0.0, -1.0, 1.0, 0.5, -0.5, 2.5, -2.5, 10.0, 0.25, 100.0],
    BOOL: [False, True],
    STRING: ["", "a", "ab", "z", "abc", "b", "aa", "ba", "c", "zz"],
    ANY: [[], 0, -1, [0], "", True, 1, [1, 2], 0.0, "a"],
}


def _boundary_value(hint: Hint, index: int):
    if isinstance(hint, tuple):
        kind = hint[0]
        if kind == "list":
            pool = [[], [_boundary_value(hint[1], 0)], [_boundary_value(hint[1], 0),
                                                        _boundary_value(hint[1], 1)]]
            return pool[index % len(pool)]
        if kind == "dict":
            pool = [{}, {"k": _boundary_value(hint[2], 0)}]
            return pool[index % len(pool)]
        if kind == "tuple":
            return [_boundary_value(h, index) for h in hint[1]]
    pool = _BOUNDARY.get(hint, _BOUNDARY[ANY])
    return pool[index % len(pool)]


def _random_value(hint: Hint, rng: random.Random, depth: int = 0):
    if isinstance(hint, tuple):
        kind = hint[0]
        if kind == "list":
            return [_random_value(hint[1], rng, depth + 1) for _ in range(rng.randint(0, 6))]
        if kind == "dict":
            return {
                _random_key(hint[1], rng): _random_value(hint[2], rng, depth + 1)
                for _ in range(rng.randint(0, 4))
            }
        if kind == "tuple":
            return [_random_value(h, rng, depth + 1) for h in hint[1]]
    if hint == INT:
        return rng.randint(-1_000_000, 1_000_000) if rng.random() < 0.1 else rng.randint(-50, 50)
    if hint == FLOAT:
        return round(rng.uniform(-100.0, 100.0), 3)
    if hint == BOOL:
        return rng.random() < 0.5
    if hint == STRING:
        return "".join(rng.choice("abcdexyz ") for _ in range(rng.randint(0, 6)))
    # mixed pool: small ints, floats, short strings, short int-lists,
    # booleans, empty containers
    if depth > 1:
        return rng.randint(-9, 9)
    roll = rng.randint(0, 5)
    if roll == 0:
        return rng.randint(-20, 20)
    if roll == 1:
        return round(rng.uniform(-10.0, 10.0), 2)
    if roll == 2:
        return "".join(rng.choice("abcxyz") for _ in range(rng.randint(0, 4)))
    if roll == 3:
        return [rng.randint(-9, 9) for _ in range(rng.randint(0, 5))]
    if roll == 4:
        return rng.random() < 0.5
    return rng.choice([[], "", {}])


def _random_key(hint: Hint, rng: random.Random):
    if hint == INT:
        return rng.randint(-9, 9)
    return "".join(rng.choice("abcxyz") for _ in range(rng.randint(1, 3)))


def _sort_key(value):
    return (type(value).__name__, repr(value))


def _apply_constraint(name: str, args: list) -> list:
    if name == "sorted":
        out = []
        for arg in args:
            if isinstance(arg, list):
                try:
                    out.append(sorted(arg))
                except TypeError:
                    out.append(sorted(arg, key=_sort_key))
            else:
                out.append(arg)
        return out
    if name == "unique":
        out = []
        for arg in args:
            if isinstance(arg, list):
                seen, dedup = set(), []
                for item in arg:
                    key = repr(item)
                    if key not in seen:
                        seen.add(key)
                        dedup.append(item)
                out.append(dedup)
            else:
                out.append(arg)
        return out
    if name == "non_empty":
        return [[0] if isinstance(arg, list) and not arg else arg for arg in args]
    if name == "non_negative":
        out = []
        for arg in args:
            if isinstance(arg, bool):
                out.append(arg)
            elif isinstance(arg, (int, float)):
                out.append(abs(arg))
            elif isinstance(arg, list):
                out.append([abs(x) if isinstance(x, (int, float)) and not isinstance(x, bool) else x
                            for x in arg])
            else:
                out.append(arg)
        return out
    raise ValueError(f"unknown input constraint {name!r}")


def generate_inputs(sig: CallSignature, budget: int, seed: int) -> list[tuple]:
    """Exactly ``budget`` argument tuples, deterministic in (sig, budget, seed).

    The first ten slots cycle through boundary values (empty list, 0, -1,
    single-element list, ...); the rest are drawn from the seeded generator.
    Constraints are applied after generation, so e.g. ``sorted`` guarantees
    every list argument is non-decreasing.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = random.Random(seed)
    inputs: list[tuple] = []
    n_boundary = min(10, budget)
    for slot in range(n_boundary):
        args = [_boundary_value(hint, slot + idx) for idx, (_, hint) in enumerate(sig.params)]
        inputs.append(tuple(args))
    for _ in range(budget - n_boundary):
        args = [_random_value(hint, rng) for _, hint in sig.params]
        inputs.append(tuple(args))
    constrained = []
    for args in inputs:
        out = list(args)
        for name in sig.constraints:
            out = _apply_constraint(name, out)
        constrained.append(tuple(out))
    return constrained


# --- divergence predicate ---------------------------------------------------


def values_equal(a, b, tolerance: float) -> bool:
    """Deep equality with float tolerance; bools never equal non-bools."""
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        fa, fb = float(a), float(b)
        if math.isnan(fa) or math.isnan(fb):
            return math.isnan(fa) and math.isnan(fb)
        return math.isclose(fa, fb, rel_tol=tolerance, abs_tol=tolerance)
    if type(a) is not type(b):
        return False
    if isinstance(a, list):
        return len(a) == len(b) and all(values_equal(x, y, tolerance) for x, y in zip(a, b))
    if isinstance(a, dict):
        return set(a) == set(b) and all(values_equal(a[k], b[k], tolerance) for k in a)
    return a == b


def outcomes_diverge(a: ExecOutcome, b: ExecOutcome, tolerance: float) -> bool:
    """Statuses differing is a divergence, except that two exceptions (of any
    kinds) agree and two timeouts agree; two ok outcomes diverge on unequal
    values."""
    if a.status != b.status:
        return True
    if a.status == ExecOutcome.OK:
        return not values_equal(a.value, b.value, tolerance)
    return False  # both exception or both timeout


def bsim(cex_count: int, n_cap: int) -> float:
    """Behavioral similarity: 1 minus the capped counterexample fraction."""
    if cex_count < 0:
        raise ValueError("cex_count must be non-negative")
    if n_cap < 1:
        raise ValueError("n_cap must be >= 1")
    return 1.0 - min(n_cap, cex_count) / n_cap


# --- cross-execution backend -------------------------------------------------


class CrossExecutionBackend:
    """Default backend: run both candidates on the same generated inputs.

    Each candidate gets its own executor process per pair, so a crashed or
    hung candidate can never leak state into another comparison.
    """

    def __init__(self, config: EnsembleConfig):
        self._cmd = resolve_runner_cmd(config)

    def __call__(
        self, a: Candidate, b: Candidate, sig: CallSignature, config: EnsembleConfig
    ) -> DiffReport:
        pair = (a.id, b.id)
        inputs = generate_inputs(sig, config.diff_budget, config.seed)
        with RunnerProcess(self._cmd) as run_a, RunnerProcess(self._cmd) as run_b:
            ok_a, _ = run_a.load(a.text)
            ok_b, _ = run_b.load(b.text)
            if not ok_a or not ok_b:
                # a candidate that cannot even load is maximally dissimilar
                return DiffReport(pair=pair, cex_count=config.n_cap, witnesses=(), inputs_tried=0)
            seen: set[str] = set()
            witnesses: list[Witness] = []
            tried = 0
            for args in inputs:
                if len(seen) >= config.n_cap:
                    break
                tried += 1
                wire_args = list(args)
                out_a = self._call(run_a, sig.function_name, wire_args, config)
                out_b = self._call(run_b, sig.function_name, wire_args, config)
                if outcomes_diverge(out_a, out_b, config.float_tolerance):
                    key = json.dumps(wire_args, sort_keys=True, default=repr)
                    if key not in seen:
                        seen.add(key)
                        if len(witnesses) < config.n_cap:
                            witnesses.append(Witness(args=args, outcome_a=out_a, outcome_b=out_b))
            return DiffReport(
                pair=pair,
                cex_count=len(seen),
                witnesses=tuple(witnesses),
                inputs_tried=tried,
            )

    @staticmethod
    def _call(
        runner: RunnerProcess, entry: str, args: list, config: EnsembleConfig
    ) -> ExecOutcome:
        outcome = runner.call(entry, args, config.exec_timeout_ms)
        if outcome.status == ExecOutcome.TIMEOUT:
            # killed on deadline; bring a fresh process up for the next input
            runner.restart_and_reload()
        return outcome


def diff_pair(
    a: Candidate,
    b: Candidate,
    sig: CallSignature,
    config: EnsembleConfig,
    backend: DiffBackend | None = None,
) -> DiffReport:
    """Differentially test one ordered pair; counts are symmetric in the pair."""
    if backend is None:
        backend = CrossExecutionBackend(config)
    return backend(a, b, sig, config)
