"""
Test the experiment registry, report files and command-line handling
"""
import json

import pytest

import harness
from harness import (
    COLUMNS,
    DEFAULT_SUITE,
    EXPERIMENTS,
    ExperimentConfig,
    ReportRow,
    build_config,
    get_argument_parser,
    read_report,
    resolve_names,
    row_passes,
    run,
    suite,
    write_report,
)
from utilities import DEFAULT_DIMENSION_CAP, PreconditionError, UnknownExperimentError, get_dimension_cap


def make_row(value, reference, comparator, **params):
    return ReportRow("unit", json.dumps(params), "metric", value, reference, comparator, False, 0)


class TestRowPasses:
    @pytest.mark.parametrize(
        "value, reference, comparator, params, expected",
        [
            (0.5, 0.5, "<=", {}, True),
            (0.51, 0.5, "<=", {}, False),
            (0.51, 0.5, "<=", {"tol": 0.02}, True),
            (0.49, 0.5, ">=", {}, False),
            (0.49, 0.5, ">=", {"tol": 0.02}, True),
            (0.5, 0.5, "==", {}, True),
            (0.5, 0.6, "==", {"tol": 0.05}, False),
            (0.52, 0.5, "~3sigma", {"se": 0.01}, True),
            (0.6, 0.5, "~3sigma", {"se": 0.01}, False),
            (0.46, 0.5, ">=3sigma", {"se": 0.01, "sigmas": 4}, True),
            (0.54, 0.5, "<=3sigma", {"se": 0.01, "sigmas": 2}, False),
            (7.0, None, "info", {}, True),
        ],
    )
    def test_comparators(self, value, reference, comparator, params, expected):
        assert row_passes(make_row(value, reference, comparator, **params)) is expected

    def test_unknown_comparator(self):
        with pytest.raises(ValueError, match="Unknown comparator"):
            row_passes(make_row(1.0, 1.0, "approximately"))


class TestRun:
    def test_planted_failure(self, capsys):
        rows = run(ExperimentConfig("planted-failure", seed=3, reproducible=True))
        assert len(rows) == 1
        row = rows[0]
        assert row.metric == "planted_false_inequality"
        assert not row.passed
        assert row.ms == 0
        params = json.loads(row.param_json)
        assert params["seed"] == 3
        assert params["dim_cap"] == DEFAULT_DIMENSION_CAP
        assert "Running planted-failure (seed 3)" in capsys.readouterr().out

    def test_unknown_experiment(self):
        with pytest.raises(UnknownExperimentError, match="Unknown experiment"):
            run(ExperimentConfig("check-everything"))

    def test_dimension_cap_restored(self):
        previous = get_dimension_cap()
        run(ExperimentConfig("planted-failure", dim_cap=16))
        assert get_dimension_cap() == previous

    @pytest.mark.parametrize(
        "name, params",
        [
            ("qpotp-efi", {}),
            ("qpotp-wrong-msg", {"grid": "1,2;1,3"}),
            ("money-clone", {"grid": "1,1;2,1"}),
            ("check-fvdg", {"pairs": 20, "max_dim": 4}),
            ("commit-from-svsi", {"attacks": 5}),
            ("efi-amplify", {"n": 2}),
            ("qds-game", {"trials": 400, "q_trials": 100, "rates": "1.0"}),
        ],
    )
    def test_experiments_pass(self, name, params):
        rows = run(ExperimentConfig(name, params=params, seed=7))
        assert rows
        failures = [row.metric for row in rows if not row.passed]
        assert failures == []

    def test_pass_flag_recomputable(self):
        rows = run(ExperimentConfig("qpotp-wrong-msg", params={"grid": "1,2"}))
        assert all(row_passes(row) == row.passed for row in rows)

    def test_same_seed_same_report_bytes(self, tmp_path):
        config = ExperimentConfig("check-fvdg", params={"pairs": 10}, seed=42, reproducible=True)
        write_report(run(config), tmp_path / "first.csv")
        write_report(run(config), tmp_path / "second.csv")
        assert (tmp_path / "first.csv").read_bytes() == (tmp_path / "second.csv").read_bytes()


class TestParameters:
    def test_scalar_flags_select_one_grid_entry(self):
        rows = run(ExperimentConfig("money-clone", params={"p": 2, "t": 1}))
        assert rows
        assert all(row.metric.endswith("[p=2,t=1]") for row in rows if "[" in row.metric)
        params = json.loads(rows[0].param_json)
        assert params["grid"] == "2,1"
        assert "p" not in params and "t" not in params

    def test_missing_scalar_falls_back_to_first_grid_entry(self):
        rows = run(ExperimentConfig("qpotp-wrong-msg", params={"ell": 3}))
        assert json.loads(rows[0].param_json)["grid"] == "1,3"
        assert all("kappa=1,ell=3" in row.metric for row in rows if "[" in row.metric)

    def test_unused_parameter_rejected(self):
        with pytest.raises(PreconditionError, match="does not use q"):
            run(ExperimentConfig("money-clone", params={"q": 3}))

    def test_trials_rejected_where_unused(self):
        with pytest.raises(PreconditionError, match="trials"):
            run(ExperimentConfig("qpotp-efi", trials=5))

    def test_qds_game_reports_q_time_rows(self):
        params = {"trials": 200, "q_trials": 40, "rates": "1.0", "q": 2, "lambda": 1}
        rows = {row.metric: row for row in run(ExperimentConfig("qds-game", params=params))}
        label = "[q=2,lambda=1]"
        assert {f"good_analytic{label}", f"good_empirical{label}", f"embedding_win{label}"} <= set(rows)
        assert rows[f"q_time_win{label}"].value == 1.0
        assert rows[f"good_analytic{label}"].passed
        assert rows[f"embedded_queries_max{label}"].passed

    def test_efi_fixture_and_copies(self):
        rows = run(ExperimentConfig("efi-amplify", params={"n": 2, "fixture": "zero-plus"}))
        assert [row.metric for row in rows] == [
            "efi[zero-plus,n=1]",
            "efi_monotone[zero-plus,n=1]",
            "efi[zero-plus,n=2]",
            "efi_monotone[zero-plus,n=2]",
        ]
        assert all(row.passed for row in rows)

    def test_unknown_efi_fixture(self):
        with pytest.raises(PreconditionError, match="Unknown EFI fixture"):
            run(ExperimentConfig("efi-amplify", params={"fixture": "one-plus"}))


class TestSuite:
    def test_seeds_follow_index(self, monkeypatch):
        seen = []
        monkeypatch.setattr(harness, "run", lambda config: seen.append((config.name, config.seed)) or [])
        suite(["qpotp-efi", "money-clone", "efi-amplify"], ExperimentConfig("", seed=6))
        assert seen == [("qpotp-efi", 6), ("money-clone", 7), ("efi-amplify", 4)]

    def test_suite_passes_only_used_parameters(self, monkeypatch, capsys):
        seen = []
        monkeypatch.setattr(harness, "run", lambda config: seen.append(config) or [])
        config = ExperimentConfig("", params={"kappa": 1, "ell": 2}, trials=3)
        suite(["qpotp-efi", "planted-failure"], config)
        assert seen[0].params == {"kappa": 1, "ell": 2}
        assert seen[1].params == {}
        assert seen[0].trials is None
        assert "Not passing ell, kappa, trials to planted-failure" in capsys.readouterr().out

    def test_empty_suite(self):
        assert suite([], ExperimentConfig("")) == []

    def test_default_suite_excludes_planted_failure(self):
        assert "planted-failure" in EXPERIMENTS
        assert "planted-failure" not in DEFAULT_SUITE
        assert "check-fvdg" in DEFAULT_SUITE


class TestReport:
    def test_write_and_read(self, tmp_path):
        rows = run(ExperimentConfig("planted-failure", reproducible=True))
        path = tmp_path / "report.csv"
        write_report(rows, path)
        write_report(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(COLUMNS)
        assert len(lines) == 3
        loaded = read_report(path)
        assert loaded == rows + rows

    def test_json_mirror(self, tmp_path):
        rows = run(ExperimentConfig("planted-failure", reproducible=True))
        write_report(rows, tmp_path / "report.csv", json_output=True)
        records = json.loads((tmp_path / "report.json").read_text())
        assert records[0]["metric"] == "planted_false_inequality"
        assert records[0]["pass"] == "false"

    def test_json_mirror_holds_whole_report(self, tmp_path):
        rows = run(ExperimentConfig("planted-failure", reproducible=True))
        write_report(rows, tmp_path / "report.csv", json_output=True)
        write_report(rows, tmp_path / "report.csv", json_output=True)
        records = json.loads((tmp_path / "report.json").read_text())
        assert len(records) == 2
        assert sorted(entry.name for entry in tmp_path.iterdir()) == ["report.csv", "report.json"]

    def test_failed_write_keeps_previous_report(self, tmp_path, monkeypatch):
        rows = run(ExperimentConfig("planted-failure", reproducible=True))
        path = tmp_path / "report.csv"
        write_report(rows, path)
        before = path.read_bytes()

        def fail(source, target):
            raise OSError("disk full")

        monkeypatch.setattr(harness.os, "replace", fail)
        with pytest.raises(OSError, match="disk full"):
            write_report(rows, path)
        assert path.read_bytes() == before
        assert [entry.name for entry in tmp_path.iterdir()] == ["report.csv"]


class TestResolveNames:
    def test_two_word_command(self):
        assert resolve_names(["check", "fvdg"]) == ["check-fvdg"]

    def test_single_word_command(self):
        assert resolve_names(["amplify"]) == ["amplify"]

    def test_suite(self):
        assert resolve_names(["suite"]) == DEFAULT_SUITE
        assert resolve_names(["suite", "qpotp-efi"]) == ["qpotp-efi"]


class TestBuildConfig:
    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("OWSG_WB_SEED", raising=False)
        monkeypatch.delenv("OWSG_WB_DIM_CAP", raising=False)
        config = build_config(get_argument_parser().parse_args(["amplify"]))
        assert config.seed == 0
        assert config.dim_cap == DEFAULT_DIMENSION_CAP
        assert config.scale_loops is None
        assert config.params == {}

    def test_precedence(self, monkeypatch, tmp_path):
        config_file = tmp_path / "workbench.conf"
        config_file.write_text("seed = 11\ndim_cap = 512\ntrials = 30\ngrid = 1,1\n")
        monkeypatch.setenv("OWSG_WB_SEED", "99")
        monkeypatch.setenv("OWSG_WB_DIM_CAP", "64")
        args = get_argument_parser().parse_args(
            ["money", "clone", "--config", str(config_file), "--dim-cap", "256", "--q", "4", "--set", "t=2"]
        )
        config = build_config(args)
        assert config.seed == 11
        assert config.dim_cap == 256
        assert config.trials == 30
        assert config.params == {"grid": "1,1", "q": 4, "t": 2}

    def test_environment(self, monkeypatch):
        monkeypatch.setenv("OWSG_WB_SEED", "42")
        monkeypatch.setenv("OWSG_WB_DIM_CAP", "128")
        config = build_config(get_argument_parser().parse_args(["amplify", "--lambda", "3"]))
        assert config.seed == 42
        assert config.dim_cap == 128
        assert config.params == {"lambda": 3}

    def test_invalid_set_entry(self):
        with pytest.raises(ValueError, match="KEY=VALUE"):
            build_config(get_argument_parser().parse_args(["amplify", "--set", "delta"]))


class TestMain:
    def test_planted_failure_exit_code(self, monkeypatch, tmp_path, capsys):
        output = tmp_path / "out.csv"
        monkeypatch.setattr("sys.argv", ["harness", "planted", "failure", "--output", str(output)])
        with pytest.raises(SystemExit) as exit_info:
            harness.main()
        assert exit_info.value.code == 1
        assert "0 checks passed, 1 failed" in capsys.readouterr().out
        assert output.exists()

    def test_passing_experiment_exit_code(self, monkeypatch):
        monkeypatch.setattr("sys.argv", ["harness", "qpotp", "efi", "--seed", "1"])
        with pytest.raises(SystemExit) as exit_info:
            harness.main()
        assert exit_info.value.code == 0

    def test_unknown_experiment_exit_code(self, monkeypatch, capsys):
        monkeypatch.setattr("sys.argv", ["harness", "nonexistent"])
        with pytest.raises(SystemExit) as exit_info:
            harness.main()
        assert exit_info.value.code == 2
        assert "Error: Unknown experiment" in capsys.readouterr().out

    def test_scalar_flags_reach_the_report(self, monkeypatch, tmp_path):
        output = tmp_path / "clone.csv"
        argv = ["harness", "money", "clone", "--p", "2", "--t", "1", "--output", str(output)]
        monkeypatch.setattr("sys.argv", argv)
        with pytest.raises(SystemExit):
            harness.main()
        rows = read_report(output)
        assert {json.loads(row.param_json)["grid"] for row in rows} == {"2.0,1"}
        assert all(row.metric.endswith("[p=2.0,t=1]") for row in rows if "[" in row.metric)

    def test_unused_flag_exit_code(self, monkeypatch, capsys):
        monkeypatch.setattr("sys.argv", ["harness", "qpotp", "efi", "--p", "2"])
        with pytest.raises(SystemExit) as exit_info:
            harness.main()
        assert exit_info.value.code == 2
        assert "qpotp-efi does not use p" in capsys.readouterr().out
