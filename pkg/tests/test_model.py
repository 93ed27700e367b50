import json

import pytest
from hypothesis import given, strategies as st

from codevote.model import (
    Candidate,
    ConfigError,
    DiffReport,
    EnsembleConfig,
    ExecOutcome,
    ParseStatus,
    SelectionResult,
    SimilarityMatrix,
    Task,
    TieBreakReason,
    Witness,
    validate_config,
)


class TestValidateConfig:
    def test_empty_mapping_yields_recommended_defaults(self):
        cfg = validate_config({})
        assert cfg.lambda_ == 0.5
        assert cfg.n_cap == 10
        assert cfg.codebleu_weights.as_tuple() == (0.0, 0.0, 0.5, 0.5)
        assert cfg.ngram_order == 4

    def test_lambda_boundary_one_is_pure_static_mode(self):
        assert validate_config({"lambda": 1.0}).lambda_ == 1.0

    def test_equal_weights_accepted(self):
        cfg = validate_config({"weights": [0.25, 0.25, 0.25, 0.25]})
        assert cfg.codebleu_weights.as_tuple() == (0.25, 0.25, 0.25, 0.25)

    def test_weights_accepted_as_mapping(self):
        cfg = validate_config({"codebleu_weights": {"syntax": 0.25, "dataflow": 0.75}})
        assert cfg.codebleu_weights.as_tuple() == (0.0, 0.0, 0.25, 0.75)

    @pytest.mark.parametrize("bad", [-0.1, 1.1, "nope"])
    def test_out_of_range_lambda_rejected(self, bad):
        with pytest.raises(ConfigError):
            validate_config({"lambda": bad})

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            validate_config({"weights": [0.5, 0.5, 0.5, 0.5]})

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError):
            validate_config({"weights": [-0.5, 0.5, 0.5, 0.5]})

    @pytest.mark.parametrize("bad", [0, -3])
    def test_non_positive_n_cap_rejected(self, bad):
        with pytest.raises(ConfigError):
            validate_config({"n_cap": bad})

    def test_diff_budget_must_cover_n_cap(self):
        with pytest.raises(ConfigError):
            validate_config({"n_cap": 10, "diff_budget": 5})

    def test_unknown_keys_ignored_with_warning(self, caplog):
        with caplog.at_level("WARNING"):
            cfg = validate_config({"totally_unknown": 1})
        assert cfg == EnsembleConfig()
        assert "totally_unknown" in caplog.text

    @given(
        lam=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        n_cap=st.integers(min_value=1, max_value=50),
        seed=st.integers(min_value=-(2**63), max_value=2**63 - 1),
    )
    def test_valid_inputs_always_accepted(self, lam, n_cap, seed):
        cfg = validate_config({"lambda": lam, "n_cap": n_cap, "seed": seed, "diff_budget": 50})
        assert cfg.lambda_ == lam
        assert cfg.n_cap == n_cap


class TestTask:
    def test_rejects_empty_id(self):
        with pytest.raises(ValueError):
            Task(id="", prompt="p", entry_point="f")

    def test_rejects_non_identifier_entry_point(self):
        with pytest.raises(ValueError):
            Task(id="t", prompt="p", entry_point="not valid!")

    def test_reference_tests_may_be_empty_for_selection_only(self):
        task = Task(id="t", prompt="p", entry_point="f")
        assert task.reference_tests == ""


class TestCandidate:
    def test_rejects_empty_text(self):
        with pytest.raises(ValueError):
            Candidate(id="c", task_id="t", source_id="s", text="")


def _round_trip(value):
    data = json.loads(json.dumps(value.to_dict()))
    return type(value).from_dict(data)


class TestRoundTrip:
    def test_task(self):
        task = Task(id="t/1", prompt="p", entry_point="f", reference_tests="def check(c): pass",
                    input_constraints=("sorted",))
        assert _round_trip(task) == task

    def test_candidate(self):
        cand = Candidate(id="c", task_id="t", source_id="s", text="x = 1\n",
                         parse_ok=ParseStatus.OK)
        assert _round_trip(cand) == cand

    def test_config(self):
        cfg = EnsembleConfig(lambda_=0.25, seed=7, runner_cmd="python3 runner.py")
        assert _round_trip(cfg) == cfg

    def test_exec_outcome_and_witness_and_diff_report(self):
        report = DiffReport(
            pair=("a", "b"),
            cex_count=2,
            witnesses=(
                Witness(
                    args=([1, 2], 3),
                    outcome_a=ExecOutcome(status="ok", value=1),
                    outcome_b=ExecOutcome(status="exception", error_kind="ValueError"),
                ),
            ),
            inputs_tried=40,
        )
        back = DiffReport.from_dict(json.loads(json.dumps(report.to_dict())))
        # JSON turns the args tuple's inner containers into lists, which is
        # exactly the wire form the engine stores
        assert back == report

    def test_similarity_matrix(self):
        matrix = SimilarityMatrix(
            candidate_ids=("a", "b"),
            codebleu=((1.0, 0.5), (0.25, 1.0)),
            bsim=((1.0, 0.8), (0.8, 1.0)),
            combined=((1.0, 0.6), (0.6, 1.0)),
            cex_counts=((0, 2), (2, 0)),
        )
        assert _round_trip(matrix) == matrix

    def test_selection_result(self):
        result = SelectionResult(
            winner_id="a",
            aggregated={"a": 1.5, "b": 0.5},
            tie_set=("a",),
            tie_break_reason=TieBreakReason.UNIQUE_MAX,
        )
        assert _round_trip(result) == result


class TestSimilarityMatrixInvariants:
    def _base(self, **overrides):
        fields = dict(
            candidate_ids=("a", "b"),
            codebleu=((1.0, 0.5), (0.5, 1.0)),
            bsim=((1.0, 0.8), (0.8, 1.0)),
            combined=((1.0, 0.6), (0.6, 1.0)),
            cex_counts=((0, 2), (2, 0)),
        )
        fields.update(overrides)
        return SimilarityMatrix(**fields)

    def test_asymmetric_bsim_rejected(self):
        with pytest.raises(ValueError):
            self._base(bsim=((1.0, 0.8), (0.7, 1.0)))

    def test_asymmetric_cex_rejected(self):
        with pytest.raises(ValueError):
            self._base(cex_counts=((0, 2), (3, 0)))

    def test_score_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            self._base(combined=((1.0, 1.5), (1.5, 1.0)))

    def test_diagonal_conventions_enforced(self):
        with pytest.raises(ValueError):
            self._base(codebleu=((0.9, 0.5), (0.5, 1.0)))
        with pytest.raises(ValueError):
            self._base(cex_counts=((1, 2), (2, 0)))


class TestSelectionResultInvariants:
    def test_winner_must_be_in_tie_set(self):
        with pytest.raises(ValueError):
            SelectionResult(
                winner_id="a",
                aggregated={"a": 1.0, "b": 2.0},
                tie_set=("b",),
                tie_break_reason=TieBreakReason.UNIQUE_MAX,
            )

    def test_winner_must_hold_max_aggregate(self):
        with pytest.raises(ValueError):
            SelectionResult(
                winner_id="a",
                aggregated={"a": 1.0, "b": 2.0},
                tie_set=("a", "b"),
                tie_break_reason=TieBreakReason.SEEDED_PICK,
            )


class TestExecOutcome:
    def test_exactly_one_of_value_or_error_kind(self):
        with pytest.raises(ValueError):
            ExecOutcome(status="ok", error_kind="ValueError")
        with pytest.raises(ValueError):
            ExecOutcome(status="exception")

    def test_timeout_carries_neither(self):
        outcome = ExecOutcome(status="timeout")
        assert outcome.value is None and outcome.error_kind is None
