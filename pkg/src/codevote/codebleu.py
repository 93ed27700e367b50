"""Composite code-similarity score over an ordered (candidate, reference) pair.

Four sub-metrics: clipped n-gram precision, token-class-weighted n-gram
precision, AST subtree overlap, and data-flow edge overlap. The combined
score is their weighted sum. Scores are directional; the voting layer decides
how to symmetrize.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .model import Candidate, EnsembleConfig, ParseStatus
from .syntax import (
    KEYWORD,
    PUNCTUATION,
    DataFlowGraph,
    SubtreeBag,
    TokenStream,
    ast_subtrees,
    dataflow_graph,
    tokenize,
)

_COMBINE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CodeBleuBreakdown:
    ngram: float
    weighted_ngram: float
    syntax: float
    dataflow: float
    combined: float

    def to_dict(self) -> dict[str, float]:
        return {
            "ngram": self.ngram,
            "weighted_ngram": self.weighted_ngram,
            "syntax": self.syntax,
            "dataflow": self.dataflow,
            "combined": self.combined,
        }


def _grams(tokens: tuple, k: int) -> Counter:
    return Counter(tuple(tokens[i : i + k]) for i in range(len(tokens) - k + 1))


def _precision(cand_grams: Counter, ref_grams: Counter, weight) -> float:
    """Clipped precision with an add-one floor when nothing matches."""
    total = sum(count * weight(gram) for gram, count in cand_grams.items())
    matched = sum(
        min(count, ref_grams.get(gram, 0)) * weight(gram) for gram, count in cand_grams.items()
    )
    if matched > 0:
        return matched / total
    return 1.0 / (total + 1.0)


def _geometric_mean(values: list[float]) -> float:
    return math.exp(sum(math.log(v) for v in values) / len(values))


def ngram_precision(cand: TokenStream, ref: TokenStream, order: int = 4) -> float:
    """Geometric mean of clipped k-gram precision for k = 1..order."""
    if not cand.tokens or not ref.tokens:
        raise ValueError("token streams must be non-empty")
    if order < 1:
        raise ValueError("order must be >= 1")
    precisions = [
        _precision(_grams(cand.tokens, k), _grams(ref.tokens, k), lambda _g: 1.0)
        for k in range(1, order + 1)
    ]
    return _geometric_mean(precisions)


def weighted_ngram_precision(
    cand: TokenStream,
    ref: TokenStream,
    order: int = 4,
    keyword_weight: float = 5.0,
    punctuation_weight: float = 0.1,
) -> float:
    """As :func:`ngram_precision` but matches weighted by token class.

    Keywords count ``keyword_weight`` each, punctuation ``punctuation_weight``,
    everything else 1; a gram's weight is the sum over its tokens.
    """
    if not cand.tokens or not ref.tokens:
        raise ValueError("token streams must be non-empty")
    if order < 1:
        raise ValueError("order must be >= 1")

    def token_weight(token) -> float:
        if token.klass == KEYWORD:
            return keyword_weight
        if token.klass == PUNCTUATION:
            return punctuation_weight
        return 1.0

    def gram_weight(gram) -> float:
        return sum(token_weight(t) for t in gram)

    precisions = [
        _precision(_grams(cand.tokens, k), _grams(ref.tokens, k), gram_weight)
        for k in range(1, order + 1)
    ]
    return _geometric_mean(precisions)


def ast_match(cand_bag: SubtreeBag, ref_bag: SubtreeBag) -> float:
    """Share of the candidate's subtree multiset found in the reference's."""
    if cand_bag.total == 0:
        raise ValueError("candidate subtree bag must be non-empty")
    ref_counts = ref_bag.counts()
    matched = sum(min(n, ref_counts.get(entry, 0)) for entry, n in cand_bag.entries)
    return matched / cand_bag.total


def dataflow_match(cand_dfg: DataFlowGraph, ref_dfg: DataFlowGraph) -> float:
    """Share of the candidate's def→use edges found in the reference's.

    Two programs with no data flow at all are vacuously equivalent (1.0);
    a candidate with edges scores 0 against an edge-free reference only if
    nothing matches, and an edge-free candidate scores 0 against one with
    edges.
    """
    cand_counts = cand_dfg.counts()
    cand_total = sum(cand_counts.values())
    ref_counts = ref_dfg.counts()
    if cand_total == 0:
        return 1.0 if sum(ref_counts.values()) == 0 else 0.0
    matched = sum(min(n, ref_counts.get(edge, 0)) for edge, n in cand_counts.items())
    return matched / cand_total


def _component_scores(
    cand_text: str, ref_text: str, config: EnsembleConfig, which: tuple[bool, bool, bool, bool]
) -> list[float]:
    """Compute the requested sub-metrics (ngram, weighted, syntax, dataflow)."""
    out = [0.0, 0.0, 0.0, 0.0]
    if which[0] or which[1]:
        cand_tokens = tokenize(cand_text)
        ref_tokens = tokenize(ref_text)
        if which[0]:
            out[0] = ngram_precision(cand_tokens, ref_tokens, config.ngram_order)
        if which[1]:
            out[1] = weighted_ngram_precision(
                cand_tokens,
                ref_tokens,
                config.ngram_order,
                config.keyword_token_weight,
                config.punctuation_token_weight,
            )
    if which[2]:
        out[2] = ast_match(
            ast_subtrees(cand_text, config.ast_depth), ast_subtrees(ref_text, config.ast_depth)
        )
    if which[3]:
        out[3] = dataflow_match(dataflow_graph(cand_text), dataflow_graph(ref_text))
    return out


def _require_parsed(candidate: Candidate) -> None:
    if candidate.parse_ok is not ParseStatus.OK:
        raise ValueError(f"candidate {candidate.id!r} has not passed the syntax filter")


def codebleu_score(cand: Candidate, ref: Candidate, config: EnsembleConfig) -> CodeBleuBreakdown:
    """Full four-component breakdown plus the weighted combination."""
    _require_parsed(cand)
    _require_parsed(ref)
    scores = _component_scores(cand.text, ref.text, config, (True, True, True, True))
    weights = config.codebleu_weights.as_tuple()
    combined = sum(w * s for w, s in zip(weights, scores))
    return CodeBleuBreakdown(
        ngram=scores[0],
        weighted_ngram=scores[1],
        syntax=scores[2],
        dataflow=scores[3],
        combined=combined,
    )


def combined_score(cand: Candidate, ref: Candidate, config: EnsembleConfig) -> float:
    """The weighted combination only; zero-weight sub-metrics are skipped."""
    _require_parsed(cand)
    _require_parsed(ref)
    weights = config.codebleu_weights.as_tuple()
    which = tuple(w > 0.0 for w in weights)
    scores = _component_scores(cand.text, ref.text, config, which)  # type: ignore[arg-type]
    return sum(w * s for w, s in zip(weights, scores))
