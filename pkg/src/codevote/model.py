"""Domain types and validated configuration shared by all pipeline stages.

Every type here is an immutable value after construction and can be shared
freely between concurrent workers. Each one serializes to plain JSON-safe
dicts via ``to_dict`` / ``from_dict`` and round-trips exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

log = logging.getLogger(__name__)

DEFAULT_SUBJECT_LANGUAGE = "python"

WEIGHT_SUM_TOLERANCE = 1e-9


class ConfigError(ValueError):
    """A configuration mapping violates one of the documented invariants."""


class ParseStatus(str, Enum):
    UNKNOWN = "unknown"
    OK = "ok"
    FAILED = "failed"


class TieBreakReason(str, Enum):
    UNIQUE_MAX = "unique_max"
    FEWER_COUNTEREXAMPLES = "fewer_counterexamples"
    SEEDED_PICK = "seeded_pick"


@dataclass(frozen=True)
class Task:
    """One programming problem: prompt, entry point, and reference tests.

    ``reference_tests`` may be empty only when the task is used for selection
    without evaluation. ``input_constraints`` is a list of named constraints
    (e.g. ``"sorted"``) applied by the differential input generator.
    """

    id: str
    prompt: str
    entry_point: str
    reference_tests: str = ""
    subject_language: str = DEFAULT_SUBJECT_LANGUAGE
    input_constraints: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("task id must be non-empty")
        if not self.entry_point.isidentifier():
            raise ValueError(f"entry_point {self.entry_point!r} is not a valid identifier")
        object.__setattr__(self, "input_constraints", tuple(self.input_constraints))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "prompt": self.prompt,
            "entry_point": self.entry_point,
            "reference_tests": self.reference_tests,
            "subject_language": self.subject_language,
            "input_constraints": list(self.input_constraints),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Task":
        return cls(
            id=data["id"],
            prompt=data["prompt"],
            entry_point=data["entry_point"],
            reference_tests=data.get("reference_tests", ""),
            subject_language=data.get("subject_language", DEFAULT_SUBJECT_LANGUAGE),
            input_constraints=tuple(data.get("input_constraints", ())),
        )


@dataclass(frozen=True)
class Candidate:
    """One generated program with provenance and parse status."""

    id: str
    task_id: str
    source_id: str
    text: str
    parse_ok: ParseStatus = ParseStatus.UNKNOWN

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError(f"candidate {self.id!r}: text must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "task_id": self.task_id,
            "source_id": self.source_id,
            "text": self.text,
            "parse_ok": self.parse_ok.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Candidate":
        return cls(
            id=data["id"],
            task_id=data["task_id"],
            source_id=data["source_id"],
            text=data["text"],
            parse_ok=ParseStatus(data.get("parse_ok", "unknown")),
        )


@dataclass(frozen=True)
class CodeBleuWeights:
    """Component weights for the composite code-similarity score."""

    ngram: float = 0.0
    weighted_ngram: float = 0.0
    syntax: float = 0.5
    dataflow: float = 0.5

    def __post_init__(self) -> None:
        vals = self.as_tuple()
        if any(w < 0 for w in vals):
            raise ConfigError(f"weights must be non-negative, got {vals}")
        if abs(sum(vals) - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ConfigError(f"weights must sum to 1, got {sum(vals)!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.ngram, self.weighted_ngram, self.syntax, self.dataflow)


@dataclass(frozen=True)
class EnsembleConfig:
    """Validated knobs for the whole pipeline.

    Defaults are the recommended operating point: equal weight on the static
    and behavioral similarity halves, behavioral cap of 10, and the composite
    score reduced to its syntax and data-flow components.
    """

    lambda_: float = 0.5
    n_cap: int = 10
    codebleu_weights: CodeBleuWeights = field(default_factory=CodeBleuWeights)
    ngram_order: int = 4
    ast_depth: int = 3
    diff_budget: int = 100
    exec_timeout_ms: int = 2000
    seed: int = 0
    float_tolerance: float = 1e-6
    keyword_token_weight: float = 5.0
    punctuation_token_weight: float = 0.1
    runner_cmd: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lambda_!r}")
        if self.n_cap < 1:
            raise ConfigError(f"n_cap must be >= 1, got {self.n_cap!r}")
        if self.ngram_order < 1:
            raise ConfigError(f"ngram_order must be >= 1, got {self.ngram_order!r}")
        if self.ast_depth < 1:
            raise ConfigError(f"ast_depth must be >= 1, got {self.ast_depth!r}")
        if self.diff_budget < self.n_cap:
            raise ConfigError(
                f"diff_budget ({self.diff_budget!r}) must be >= n_cap ({self.n_cap!r})"
            )
        if self.exec_timeout_ms < 1:
            raise ConfigError(f"exec_timeout_ms must be positive, got {self.exec_timeout_ms!r}")
        if self.float_tolerance <= 0:
            raise ConfigError(f"float_tolerance must be positive, got {self.float_tolerance!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        if not -(2**63) <= self.seed < 2**63:
            raise ConfigError("seed must fit in 64 bits")

    def to_dict(self) -> dict[str, Any]:
        return {
            "lambda": self.lambda_,
            "n_cap": self.n_cap,
            "codebleu_weights": {
                "ngram": self.codebleu_weights.ngram,
                "weighted_ngram": self.codebleu_weights.weighted_ngram,
                "syntax": self.codebleu_weights.syntax,
                "dataflow": self.codebleu_weights.dataflow,
            },
            "ngram_order": self.ngram_order,
            "ast_depth": self.ast_depth,
            "diff_budget": self.diff_budget,
            "exec_timeout_ms": self.exec_timeout_ms,
            "seed": self.seed,
            "float_tolerance": self.float_tolerance,
            "keyword_token_weight": self.keyword_token_weight,
            "punctuation_token_weight": self.punctuation_token_weight,
            "runner_cmd": self.runner_cmd,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EnsembleConfig":
        return validate_config(data)


_CONFIG_KEYS = {
    "lambda",
    "lambda_",
    "n_cap",
    "weights",
    "codebleu_weights",
    "ngram_order",
    "ast_depth",
    "diff_budget",
    "exec_timeout_ms",
    "seed",
    "float_tolerance",
    "keyword_token_weight",
    "punctuation_token_weight",
    "runner_cmd",
}


def _parse_weights(raw: Mapping[str, Any]) -> CodeBleuWeights:
    if "weights" in raw and "codebleu_weights" in raw:
        raise ConfigError("give either 'weights' or 'codebleu_weights', not both")
    if "weights" in raw:
        seq = raw["weights"]
        if isinstance(seq, str):
            seq = [part.strip() for part in seq.split(",")]
        try:
            vals = [float(v) for v in seq]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"weights must be four numbers, got {raw['weights']!r}") from exc
        if len(vals) != 4:
            raise ConfigError(f"weights must have exactly 4 entries, got {len(vals)}")
        return CodeBleuWeights(*vals)
    if "codebleu_weights" in raw:
        mapping = raw["codebleu_weights"]
        unknown = set(mapping) - {"ngram", "weighted_ngram", "syntax", "dataflow"}
        if unknown:
            raise ConfigError(f"unknown weight components: {sorted(unknown)}")
        return CodeBleuWeights(
            ngram=float(mapping.get("ngram", 0.0)),
            weighted_ngram=float(mapping.get("weighted_ngram", 0.0)),
            syntax=float(mapping.get("syntax", 0.0)),
            dataflow=float(mapping.get("dataflow", 0.0)),
        )
    return CodeBleuWeights()


def validate_config(raw: Mapping[str, Any]) -> EnsembleConfig:
    """Build an :class:`EnsembleConfig` from a flat key-value mapping.

    Absent keys take the documented defaults; invariant violations raise
    :class:`ConfigError`. Unknown keys are ignored with a warning so config
    files can carry extra sections (e.g. provider rosters).
    """
    unknown = set(raw) - _CONFIG_KEYS - {"providers"}
    if unknown:
        log.warning("ignoring unknown config keys: %s", sorted(unknown))

    def _int(key: str, default: int) -> int:
        value = raw.get(key, default)
        if isinstance(value, bool):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        if isinstance(value, int):
            return value
        try:
            as_float = float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key} must be an integer, got {value!r}") from exc
        if as_float != int(as_float):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(as_float)

    def _float(key: str, default: float) -> float:
        value = raw.get(key, default)
        try:
            return float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key} must be a number, got {value!r}") from exc

    if "lambda" in raw and "lambda_" in raw:
        raise ConfigError("give either 'lambda' or 'lambda_', not both")
    lambda_key = "lambda" if "lambda" in raw else "lambda_"

    runner_cmd = raw.get("runner_cmd")
    if runner_cmd is not None and not isinstance(runner_cmd, str):
        raise ConfigError(f"runner_cmd must be a string, got {runner_cmd!r}")

    return EnsembleConfig(
        lambda_=_float(lambda_key, 0.5),
        n_cap=_int("n_cap", 10),
        codebleu_weights=_parse_weights(raw),
        ngram_order=_int("ngram_order", 4),
        ast_depth=_int("ast_depth", 3),
        diff_budget=_int("diff_budget", 100),
        exec_timeout_ms=_int("exec_timeout_ms", 2000),
        seed=_int("seed", 0),
        float_tolerance=_float("float_tolerance", 1e-6),
        keyword_token_weight=_float("keyword_token_weight", 5.0),
        punctuation_token_weight=_float("punctuation_token_weight", 0.1),
        runner_cmd=runner_cmd,
    )


@dataclass(frozen=True)
class ExecOutcome:
    """Result of one sandboxed call: ok with a JSON value, exception, or timeout."""

    status: str
    value: Any = None
    error_kind: str | None = None

    OK = "ok"
    EXCEPTION = "exception"
    TIMEOUT = "timeout"

    def __post_init__(self) -> None:
        if self.status not in (self.OK, self.EXCEPTION, self.TIMEOUT):
            raise ValueError(f"unknown outcome status {self.status!r}")
        if self.status == self.OK and self.error_kind is not None:
            raise ValueError("ok outcome must not carry error_kind")
        if self.status == self.EXCEPTION and self.error_kind is None:
            raise ValueError("exception outcome must carry error_kind")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"status": self.status}
        if self.status == self.OK:
            out["value"] = self.value
        if self.error_kind is not None:
            out["error_kind"] = self.error_kind
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExecOutcome":
        return cls(
            status=data["status"],
            value=data.get("value"),
            error_kind=data.get("error_kind"),
        )


@dataclass(frozen=True)
class Witness:
    """One diverging input together with both observed outcomes."""

    args: tuple[Any, ...]
    outcome_a: ExecOutcome
    outcome_b: ExecOutcome

    def to_dict(self) -> dict[str, Any]:
        return {
            "args": list(self.args),
            "outcome_a": self.outcome_a.to_dict(),
            "outcome_b": self.outcome_b.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Witness":
        return cls(
            args=tuple(data["args"]),
            outcome_a=ExecOutcome.from_dict(data["outcome_a"]),
            outcome_b=ExecOutcome.from_dict(data["outcome_b"]),
        )


@dataclass(frozen=True)
class DiffReport:
    """Outcome of differentially testing one candidate pair."""

    pair: tuple[str, str]
    cex_count: int
    witnesses: tuple[Witness, ...] = ()
    inputs_tried: int = 0

    def __post_init__(self) -> None:
        if self.cex_count < 0:
            raise ValueError("cex_count must be non-negative")
        if self.inputs_tried < 0:
            raise ValueError("inputs_tried must be non-negative")
        object.__setattr__(self, "pair", tuple(self.pair))
        object.__setattr__(self, "witnesses", tuple(self.witnesses))

    def to_dict(self) -> dict[str, Any]:
        return {
            "pair": list(self.pair),
            "cex_count": self.cex_count,
            "witnesses": [w.to_dict() for w in self.witnesses],
            "inputs_tried": self.inputs_tried,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DiffReport":
        return cls(
            pair=tuple(data["pair"]),
            cex_count=data["cex_count"],
            witnesses=tuple(Witness.from_dict(w) for w in data.get("witnesses", ())),
            inputs_tried=data.get("inputs_tried", 0),
        )


def _freeze_rows(rows) -> tuple[tuple, ...]:
    return tuple(tuple(row) for row in rows)


@dataclass(frozen=True)
class SimilarityMatrix:
    """All pairwise scores for one candidate set.

    ``codebleu`` is directed (row = candidate, column = reference); ``bsim``
    and ``cex_counts`` are symmetric. Diagonals are fixed by convention
    (scores 1, counts 0) and never read by the voting stage.
    """

    candidate_ids: tuple[str, ...]
    codebleu: tuple[tuple[float, ...], ...]
    bsim: tuple[tuple[float, ...], ...]
    combined: tuple[tuple[float, ...], ...]
    cex_counts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "candidate_ids", tuple(self.candidate_ids))
        object.__setattr__(self, "codebleu", _freeze_rows(self.codebleu))
        object.__setattr__(self, "bsim", _freeze_rows(self.bsim))
        object.__setattr__(self, "combined", _freeze_rows(self.combined))
        object.__setattr__(self, "cex_counts", _freeze_rows(self.cex_counts))
        self.validate()

    def validate(self) -> None:
        n = len(self.candidate_ids)
        if len(set(self.candidate_ids)) != n:
            raise ValueError("candidate ids must be unique")
        for name in ("codebleu", "bsim", "combined", "cex_counts"):
            grid = getattr(self, name)
            if len(grid) != n or any(len(row) != n for row in grid):
                raise ValueError(f"{name} must be {n}x{n}")
        for grid in (self.codebleu, self.bsim, self.combined):
            for row in grid:
                for v in row:
                    if not 0.0 <= v <= 1.0:
                        raise ValueError(f"score {v!r} outside [0, 1]")
        for i in range(n):
            if self.codebleu[i][i] != 1.0 or self.bsim[i][i] != 1.0 or self.combined[i][i] != 1.0:
                raise ValueError("score diagonals must be 1 by convention")
            if self.cex_counts[i][i] != 0:
                raise ValueError("cex_counts diagonal must be 0")
            for j in range(n):
                if self.cex_counts[i][j] < 0:
                    raise ValueError("cex counts must be non-negative")
                if self.bsim[i][j] != self.bsim[j][i]:
                    raise ValueError("bsim must be symmetric")
                if self.cex_counts[i][j] != self.cex_counts[j][i]:
                    raise ValueError("cex_counts must be symmetric")

    def index_of(self, candidate_id: str) -> int:
        return self.candidate_ids.index(candidate_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "candidate_ids": list(self.candidate_ids),
            "codebleu": [list(r) for r in self.codebleu],
            "bsim": [list(r) for r in self.bsim],
            "combined": [list(r) for r in self.combined],
            "cex_counts": [list(r) for r in self.cex_counts],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SimilarityMatrix":
        return cls(
            candidate_ids=tuple(data["candidate_ids"]),
            codebleu=_freeze_rows(data["codebleu"]),
            bsim=_freeze_rows(data["bsim"]),
            combined=_freeze_rows(data["combined"]),
            cex_counts=_freeze_rows(data["cex_counts"]),
        )


@dataclass(frozen=True)
class SelectionResult:
    """Winning candidate plus the aggregate scores and tie-break trace."""

    winner_id: str
    aggregated: Mapping[str, float]
    tie_set: tuple[str, ...]
    tie_break_reason: TieBreakReason

    def __post_init__(self) -> None:
        object.__setattr__(self, "aggregated", dict(self.aggregated))
        object.__setattr__(self, "tie_set", tuple(self.tie_set))
        if self.winner_id not in self.tie_set:
            raise ValueError("winner must be a member of the tie set")
        if self.aggregated:
            top = max(self.aggregated.values())
            if self.aggregated[self.winner_id] != top:
                raise ValueError("winner must hold the maximum aggregated score")

    def to_dict(self) -> dict[str, Any]:
        return {
            "winner_id": self.winner_id,
            "aggregated": dict(self.aggregated),
            "tie_set": list(self.tie_set),
            "tie_break_reason": self.tie_break_reason.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SelectionResult":
        return cls(
            winner_id=data["winner_id"],
            aggregated=data["aggregated"],
            tie_set=tuple(data["tie_set"]),
            tie_break_reason=TieBreakReason(data["tie_break_reason"]),
        )
