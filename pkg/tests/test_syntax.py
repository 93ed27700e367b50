import pytest

from codevote.model import Candidate, ParseStatus
from codevote.syntax import (
    IDENTIFIER,
    KEYWORD,
    LITERAL,
    OPERATOR,
    NoViableCandidates,
    SubjectParseError,
    ast_subtrees,
    dataflow_graph,
    filter_candidates,
    parse_check,
    tokenize,
)

from conftest import listing, make_candidate, random_program, reformat_program, rename_identifiers


class TestParseCheck:
    def test_reference_listing_parses(self):
        assert make_candidate(listing(1)).parse_ok is ParseStatus.OK

    def test_malformed_header_fails(self):
        assert make_candidate("def f(:\n").parse_ok is ParseStatus.FAILED

    def test_mixed_tabs_and_spaces_but_grammatical(self):
        # oracle: the bundled grammar itself accepts this text
        text = "def f():\n\treturn 1\n\ndef g():\n    return 2\n"
        compile(text, "<fixture>", "exec")
        assert make_candidate(text).parse_ok is ParseStatus.OK

    def test_deterministic_for_fixed_input(self):
        cand = Candidate(id="c", task_id="t", source_id="s", text="x = 1\n")
        assert parse_check(cand) == parse_check(cand)

    def test_unsupported_subject_language_rejected(self):
        with pytest.raises(ValueError):
            parse_check(make_candidate("x = 1\n"), subject_language="cobol")


class TestFilterCandidates:
    def test_keeps_only_parsed_in_order(self):
        ok1 = make_candidate("a = 1\n", "ok1")
        bad = make_candidate("def f(:\n", "bad")
        ok2 = make_candidate("b = 2\n", "ok2")
        assert [c.id for c in filter_candidates([ok1, bad, ok2])] == ["ok1", "ok2"]

    def test_all_failed_raises(self):
        with pytest.raises(NoViableCandidates):
            filter_candidates([make_candidate("def f(:\n", "bad")])

    def test_all_ok_is_identity(self):
        pool = [make_candidate("a = 1\n", "x"), make_candidate("b = 2\n", "y")]
        assert filter_candidates(pool) == pool


class TestTokenize:
    def test_simple_assignment(self):
        tokens = tokenize("x = 1").tokens
        assert [(t.lexeme, t.klass) for t in tokens] == [
            ("x", IDENTIFIER),
            ("=", OPERATOR),
            ("1", LITERAL),
        ]

    def test_loop_header_starts_with_keyword(self):
        assert tokenize("while left <= right:\n    pass\n").tokens[0].klass == KEYWORD

    def test_comments_dropped(self):
        assert len(tokenize("# comment\nx=1")) == 3

    def test_unlexable_text_rejected(self):
        with pytest.raises(SubjectParseError):
            tokenize("def f():\n\treturn 1\n  return 2\n")


class TestAstSubtrees:
    def test_structure_only_canonicalization(self):
        assert ast_subtrees("x = 1") == ast_subtrees("y = 2")

    def test_self_identity(self):
        assert ast_subtrees(listing(1)) == ast_subtrees(listing(1))

    def test_totals_monotone_in_depth(self):
        for seed in range(30):
            src = random_program(seed)
            totals = [ast_subtrees(src, d).total for d in (1, 2, 3, 5)]
            assert totals == sorted(totals)

    def test_overlap_orders_reference_listings(self):
        b1, b2, b3 = (ast_subtrees(listing(n)) for n in (1, 2, 3))
        inter_12 = sum((b1.counts() & b2.counts()).values())
        inter_13 = sum((b1.counts() & b3.counts()).values())
        assert inter_13 < inter_12


class TestDataflowGraph:
    def test_single_def_use_chain(self):
        graph = dataflow_graph("a = 1\nb = a\n")
        assert graph.edges == (("var_0", "var_1", "comesFrom"),)

    def test_parameter_def_and_use(self):
        graph = dataflow_graph("def f(p): return p\n")
        assert graph.edges == (("var_0", "var_0", "comesFrom"),)

    def test_reference_listing_jaccard_ordering(self):
        g1, g2, g3 = (dataflow_graph(listing(n)).counts() for n in (1, 2, 3))

        def jaccard(a, b):
            inter = sum((a & b).values())
            union = sum((a | b).values())
            return inter / union

        assert jaccard(g1, g2) >= jaccard(g1, g3)

    def test_edge_count_invariant_under_reformatting(self):
        for seed in range(30):
            src = random_program(seed)
            assert dataflow_graph(src).edge_count() == dataflow_graph(
                reformat_program(src)
            ).edge_count()

    def test_unparseable_text_rejected(self):
        with pytest.raises(SubjectParseError):
            dataflow_graph("def f(:\n")


class TestAlphaInvariance:
    def test_rename_preserves_bags_and_graphs(self):
        for seed in range(30):
            src = random_program(seed)
            renamed = rename_identifiers(src)
            assert renamed != src
            assert ast_subtrees(src) == ast_subtrees(renamed)
            assert dataflow_graph(src) == dataflow_graph(renamed)

    def test_rename_on_reference_listing(self):
        src = listing(1)
        renamed = src.replace("left", "lo").replace("right", "hi").replace("arr", "items")
        assert ast_subtrees(src) == ast_subtrees(renamed)
        assert dataflow_graph(src) == dataflow_graph(renamed)
