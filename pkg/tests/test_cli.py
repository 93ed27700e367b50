import json

import pytest

from codevote.cli import EXIT_INFRA, EXIT_NO_VIABLE, EXIT_OK, EXIT_USAGE, _build_parser, \
    _resolve_config, main

from conftest import FIXTURES


QUARTET_ARGS = [
    "select",
    "--task", str(FIXTURES / "quartet_task.json"),
    "--candidates", str(FIXTURES / "quartet"),
]


def parse(argv):
    return _build_parser().parse_args(argv)


class TestFlagPrecedence:
    @pytest.mark.parametrize(
        "flag, key, file_value, flag_value, getter",
        [
            ("--lambda", "lambda", 0.9, "0.2", lambda c: c.lambda_),
            ("--n-cap", "n_cap", 4, "6", lambda c: c.n_cap),
            ("--seed", "seed", 11, "12", lambda c: c.seed),
            ("--timeout-ms", "exec_timeout_ms", 500, "900", lambda c: c.exec_timeout_ms),
            ("--diff-budget", "diff_budget", 40, "60", lambda c: c.diff_budget),
        ],
    )
    def test_flag_beats_file_beats_default(self, tmp_path, flag, key, file_value, flag_value,
                                           getter):
        defaults = _resolve_config(parse(QUARTET_ARGS))
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({key: file_value}))

        file_only = _resolve_config(parse(["--config", str(cfg_file)] + QUARTET_ARGS))
        assert getter(file_only) == pytest.approx(file_value)

        flag_too = _resolve_config(
            parse(["--config", str(cfg_file), flag, flag_value] + QUARTET_ARGS)
        )
        assert getter(flag_too) == pytest.approx(type(file_value)(float(flag_value)))
        assert getter(defaults) != getter(file_only)

    def test_weights_flag_overrides_file(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"weights": [0.25, 0.25, 0.25, 0.25]}))
        cfg = _resolve_config(
            parse(["--config", str(cfg_file), "--weights", "0,0,0.5,0.5"] + QUARTET_ARGS)
        )
        assert cfg.codebleu_weights.as_tuple() == (0.0, 0.0, 0.5, 0.5)

    def test_defaults_without_any_input(self):
        cfg = _resolve_config(parse(QUARTET_ARGS))
        assert cfg.lambda_ == 0.5 and cfg.n_cap == 10

    def test_flags_accepted_after_subcommand(self):
        cfg = _resolve_config(parse([*QUARTET_ARGS, "--lambda", "0.5", "--n-cap", "10"]))
        assert cfg.lambda_ == 0.5 and cfg.n_cap == 10
        cfg = _resolve_config(parse([*QUARTET_ARGS, "--lambda", "0.25", "--seed", "3"]))
        assert cfg.lambda_ == 0.25 and cfg.seed == 3

    def test_flags_accepted_before_subcommand(self):
        cfg = _resolve_config(parse(["--lambda", "0.75", *QUARTET_ARGS]))
        assert cfg.lambda_ == 0.75


class TestExitCodes:
    def test_usage_error_is_exit_one(self, capsys):
        assert main(["select", "--task", "only.json"]) == EXIT_USAGE
        assert "error" in capsys.readouterr().err

    def test_bad_config_value_is_exit_one(self, capsys):
        assert main(["--lambda", "7", *QUARTET_ARGS]) == EXIT_USAGE

    def test_nothing_parses_is_exit_two(self, tmp_path, capsys):
        task_file = tmp_path / "task.json"
        task_file.write_text(json.dumps({"task_id": "t", "prompt": "p", "entry_point": "f"}))
        pool = tmp_path / "t"
        pool.mkdir()
        (pool / "s1.py").write_text("def f(:\n")
        code = main(
            ["select", "--task", str(task_file), "--candidates", str(tmp_path)]
        )
        assert code == EXIT_NO_VIABLE

    def test_missing_runner_is_exit_three(self, tmp_path, capsys):
        code = main(["--runner", "/nonexistent/sandbox-runner", *QUARTET_ARGS])
        assert code == EXIT_INFRA

    def test_empty_task_file_is_exit_one_for_bench(self, tmp_path):
        tasks = tmp_path / "tasks.jsonl"
        tasks.write_text("")
        code = main([
            "bench",
            "--tasks", str(tasks),
            "--candidates", str(tmp_path),
            "--out", str(tmp_path / "out"),
        ])
        assert code == EXIT_USAGE
        assert not (tmp_path / "out").exists()


@pytest.mark.integration
class TestSelectCommand:
    def test_select_prints_winner_path_and_result(self, runner_cmd, capsys):
        code = main(["--runner", runner_cmd, *QUARTET_ARGS])
        assert code == EXIT_OK
        out = capsys.readouterr().out.strip().split("\n")
        assert out[0].endswith(".py")
        result = json.loads(out[1])
        assert result["winner_id"] in {"iterative", "recursive"}

    def test_select_is_deterministic(self, runner_cmd, capsys):
        assert main(["--runner", runner_cmd, "--seed", "3", *QUARTET_ARGS]) == EXIT_OK
        first = capsys.readouterr().out
        assert main(["--runner", runner_cmd, "--seed", "3", *QUARTET_ARGS]) == EXIT_OK
        second = capsys.readouterr().out
        assert first == second

    def test_explain_prints_pair_records(self, runner_cmd, capsys):
        code = main([
            "--runner", runner_cmd,
            "explain",
            "--task", str(FIXTURES / "quartet_task.json"),
            "--candidates", str(FIXTURES / "quartet"),
        ])
        assert code == EXIT_OK
        lines = [json.loads(line) for line in capsys.readouterr().out.strip().split("\n")]
        assert len(lines) == 6  # C(4, 2) unordered pairs
        for entry in lines:
            assert {"pair", "codebleu_ab", "codebleu_ba", "cex_count", "bsim",
                    "combined"} <= set(entry)


class TestGenerateCommand:
    def test_generate_stores_fetched_candidates(self, tmp_path, monkeypatch, capsys):
        import httpx

        def fake_post(url, json=None, headers=None, timeout=None):
            body = {"choices": [{"message": {"content": "```python\nx = 1\n```"}}]}
            return httpx.Response(200, json=body)

        monkeypatch.setattr("codevote.acquire.httpx.post", fake_post)
        monkeypatch.setenv("FAKE_KEY", "sk-test")

        config_file = tmp_path / "cfg.json"
        config_file.write_text(json.dumps({
            "providers": [
                {"name": "m1", "endpoint_url": "https://api.example.test/v1/x",
                 "model": "m1-large", "api_key_env": "FAKE_KEY"},
                {"name": "m2", "endpoint_url": "https://api.example.test/v1/y",
                 "model": "m2-large", "api_key_env": "FAKE_KEY"},
            ]
        }))
        tasks_file = tmp_path / "tasks.jsonl"
        tasks_file.write_text(json.dumps(
            {"task_id": "t1", "prompt": "p", "entry_point": "f", "test": ""}
        ) + "\n")

        out_dir = tmp_path / "pool"
        code = main([
            "--config", str(config_file),
            "generate", "--tasks", str(tasks_file), "--out", str(out_dir),
        ])
        assert code == EXIT_OK
        assert (out_dir / "t1" / "m1.py").read_text() == "x = 1"
        assert (out_dir / "t1" / "m2.py").read_text() == "x = 1"
        assert "stored 2 candidates" in capsys.readouterr().out

    def test_generate_without_providers_is_usage_error(self, tmp_path):
        tasks_file = tmp_path / "tasks.jsonl"
        tasks_file.write_text(json.dumps(
            {"task_id": "t1", "prompt": "p", "entry_point": "f"}
        ) + "\n")
        code = main(["generate", "--tasks", str(tasks_file), "--out", str(tmp_path / "o")])
        assert code == EXIT_USAGE


@pytest.mark.integration
class TestBenchCommand:
    def test_offline_bench_writes_reports(self, runner_cmd, tmp_path, capsys):
        out_dir = tmp_path / "out"
        code = main([
            "--runner", runner_cmd,
            "bench",
            "--tasks", str(FIXTURES / "minibench" / "tasks.jsonl"),
            "--candidates", str(FIXTURES / "minibench" / "candidates"),
            "--out", str(out_dir),
        ])
        assert code == EXIT_OK
        payload = json.loads((out_dir / "report.json").read_text())
        assert payload["summary"]["tasks"] == 5
        assert (out_dir / "report.txt").exists()
