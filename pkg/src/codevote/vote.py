"""Pairwise similarity matrix, per-candidate aggregation, and winner selection.

The combined pairwise score is the weighted blend of the symmetrized static
similarity and the behavioral similarity. Aggregation sums each candidate's
combined scores against all peers; selection takes the argmax with a
deterministic three-stage tie-break.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from . import codebleu as cb
from .diffbehave import (
    CallSignature,
    CrossExecutionBackend,
    DiffBackend,
    EntryPointMissing,
    bsim,
    derive_signature,
    unify_signatures,
)
from .model import (
    Candidate,
    DiffReport,
    EnsembleConfig,
    ParseStatus,
    SelectionResult,
    SimilarityMatrix,
    Task,
    TieBreakReason,
)
from .runner_client import RunnerError


def pair_similarity(
    a: Candidate, b: Candidate, config: EnsembleConfig, diff: DiffReport
) -> float:
    """Blend of symmetrized static similarity and behavioral similarity."""
    sym = (cb.combined_score(a, b, config) + cb.combined_score(b, a, config)) / 2.0
    return config.lambda_ * sym + (1.0 - config.lambda_) * bsim(diff.cex_count, config.n_cap)


def _pair_diff(
    a: Candidate,
    b: Candidate,
    sig_a: CallSignature | None,
    sig_b: CallSignature | None,
    config: EnsembleConfig,
    backend: DiffBackend,
) -> DiffReport:
    if sig_a is None or sig_b is None:
        # missing entry point: behaviorally maximally dissimilar to every peer
        return DiffReport(pair=(a.id, b.id), cex_count=config.n_cap)
    sig = unify_signatures(sig_a, sig_b)
    if sig is None:
        return DiffReport(pair=(a.id, b.id), cex_count=config.n_cap)
    return backend(a, b, sig, config)


def build_matrix(
    candidates: Sequence[Candidate],
    task: Task,
    config: EnsembleConfig,
    backend: DiffBackend | None = None,
    jobs: int = 1,
    collect_breakdowns: bool = False,
) -> SimilarityMatrix | tuple[SimilarityMatrix, list[dict]]:
    """All pairwise scores for the pool; each unordered pair is diffed once.

    With ``collect_breakdowns`` the full per-pair component scores are
    returned as well (the ``explain`` payload).
    """
    if not candidates:
        raise ValueError("candidate pool must be non-empty")
    for c in candidates:
        if c.parse_ok is not ParseStatus.OK:
            raise ValueError(f"candidate {c.id!r} has not passed the syntax filter")
    ids = [c.id for c in candidates]
    if len(set(ids)) != len(ids):
        raise ValueError("candidate ids must be unique")

    if backend is None:
        backend = CrossExecutionBackend(config)

    sigs: list[CallSignature | None] = []
    for c in candidates:
        try:
            sigs.append(derive_signature(task, c))
        except EntryPointMissing:
            sigs.append(None)

    n = len(candidates)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def run_pair(pair: tuple[int, int]) -> DiffReport:
        i, j = pair
        try:
            return _pair_diff(candidates[i], candidates[j], sigs[i], sigs[j], config, backend)
        except RunnerError as exc:
            raise RunnerError(
                f"pair ({candidates[i].id!r}, {candidates[j].id!r}): {exc}"
            ) from exc

    if jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run_pair, pairs))
    else:
        reports = [run_pair(p) for p in pairs]

    codebleu_grid = [[1.0] * n for _ in range(n)]
    bsim_grid = [[1.0] * n for _ in range(n)]
    combined_grid = [[1.0] * n for _ in range(n)]
    cex_grid = [[0] * n for _ in range(n)]
    breakdowns: list[dict] = []

    for (i, j), report in zip(pairs, reports):
        a, b = candidates[i], candidates[j]
        score_ab = cb.combined_score(a, b, config)
        score_ba = cb.combined_score(b, a, config)
        sym = (score_ab + score_ba) / 2.0
        behavioral = bsim(report.cex_count, config.n_cap)
        combined = config.lambda_ * sym + (1.0 - config.lambda_) * behavioral

        codebleu_grid[i][j] = score_ab
        codebleu_grid[j][i] = score_ba
        bsim_grid[i][j] = bsim_grid[j][i] = behavioral
        combined_grid[i][j] = combined_grid[j][i] = combined
        cex_grid[i][j] = cex_grid[j][i] = report.cex_count

        if collect_breakdowns:
            breakdowns.append(
                {
                    "task_id": task.id,
                    "pair": [a.id, b.id],
                    "codebleu_ab": cb.codebleu_score(a, b, config).to_dict(),
                    "codebleu_ba": cb.codebleu_score(b, a, config).to_dict(),
                    "codebleu_sym": sym,
                    "cex_count": report.cex_count,
                    "inputs_tried": report.inputs_tried,
                    "bsim": behavioral,
                    "combined": combined,
                }
            )

    matrix = SimilarityMatrix(
        candidate_ids=tuple(ids),
        codebleu=tuple(tuple(r) for r in codebleu_grid),
        bsim=tuple(tuple(r) for r in bsim_grid),
        combined=tuple(tuple(r) for r in combined_grid),
        cex_counts=tuple(tuple(r) for r in cex_grid),
    )
    if collect_breakdowns:
        return matrix, breakdowns
    return matrix


def aggregate(matrix: SimilarityMatrix) -> dict[str, float]:
    """Sum each candidate's combined score against all others (diagonal excluded).

    ``fsum`` keeps the sums order-independent, so duplicate candidates tie
    exactly.
    """
    n = len(matrix.candidate_ids)
    return {
        matrix.candidate_ids[i]: math.fsum(matrix.combined[i][j] for j in range(n) if j != i)
        for i in range(n)
    }


def _cex_total(matrix: SimilarityMatrix, index: int) -> int:
    return sum(matrix.cex_counts[index])


def select(
    candidates: Sequence[Candidate], matrix: SimilarityMatrix, config: EnsembleConfig
) -> SelectionResult:
    """Argmax of the aggregate, then fewer total counterexamples, then a
    seeded pick over ids in sorted order."""
    by_id = {c.id: c for c in candidates}
    if set(by_id) != set(matrix.candidate_ids):
        raise ValueError("candidates do not match the matrix")

    agg = aggregate(matrix)
    top = max(agg.values())
    tie_set = tuple(sorted(cid for cid, value in agg.items() if value == top))
    if len(tie_set) == 1:
        return SelectionResult(
            winner_id=tie_set[0],
            aggregated=agg,
            tie_set=tie_set,
            tie_break_reason=TieBreakReason.UNIQUE_MAX,
        )

    totals = {cid: _cex_total(matrix, matrix.index_of(cid)) for cid in tie_set}
    fewest = min(totals.values())
    finalists = sorted(cid for cid, total in totals.items() if total == fewest)
    if len(finalists) == 1:
        return SelectionResult(
            winner_id=finalists[0],
            aggregated=agg,
            tie_set=tie_set,
            tie_break_reason=TieBreakReason.FEWER_COUNTEREXAMPLES,
        )

    winner = random.Random(config.seed).choice(finalists)
    return SelectionResult(
        winner_id=winner,
        aggregated=agg,
        tie_set=tie_set,
        tie_break_reason=TieBreakReason.SEEDED_PICK,
    )
