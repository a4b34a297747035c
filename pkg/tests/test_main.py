"""
Tests for the command-line entry point
"""

import json

import pytest

from src.errors import MluflError
from src.instance import read_instance, write_instance
from src.main import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main

from .conftest import desk1


@pytest.fixture
def desk_file(tmp_path):
    path = tmp_path / "desk.json"
    write_instance(desk1(), path)
    return str(path)


class TestParsing:
    """Test argument handling"""

    def test_missing_command(self):
        assert main([]) == EXIT_USAGE

    def test_unknown_flag(self):
        assert main(["validate", "--bogus"]) == EXIT_USAGE

    def test_bad_config_value(self, mocker, capsys):
        mocker.patch("src.main.Config.validate", return_value=["MLUFL_EPSILON must lie in (0, 1]"])
        assert main(["validate", "--instance", "x.json"]) == EXIT_USAGE
        assert "MLUFL_EPSILON" in capsys.readouterr().out


class TestCommands:
    """Test each subcommand"""

    def test_validate(self, desk_file, capsys):
        assert main(["validate", "--instance", desk_file]) == EXIT_OK
        assert "valid instance" in capsys.readouterr().out

    def test_validate_missing_file(self, tmp_path):
        assert main(["validate", "--instance", str(tmp_path / "none.json")]) == EXIT_USAGE

    def test_validate_bad_instance(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"facility_cost": [1.0]}))
        assert main(["validate", "--instance", str(path)]) == EXIT_USAGE

    def test_generate(self, tmp_path):
        out = tmp_path / "gen.json"
        code = main(["generate", "--family", "euclidean", "--n", "3", "--m", "2", "--seed", "4", "--out", str(out)])
        assert code == EXIT_OK
        inst = read_instance(out)
        assert (inst.n, inst.m) == (3, 2)

    def test_generate_default_location(self, tmp_path, mocker):
        mocker.patch("src.main.Config.OUTPUT_DIR", tmp_path)
        assert main(["generate", "--family", "zfc", "--n", "2", "--m", "2", "--seed", "1"]) == EXIT_OK
        assert (tmp_path / "zfc_n2_m2_s1.json").exists()

    def test_debug_prints_config(self, desk_file, mocker, capsys):
        mocker.patch("src.main.Config.DEBUG", True)
        assert main(["validate", "--instance", desk_file]) == EXIT_OK
        assert "CONFIGURATION" in capsys.readouterr().out

    def test_generate_bad_spec(self, tmp_path):
        code = main([
            "generate", "--family", "related", "--n", "2", "--m", "2",
            "--related-scale", "0.5", "--out", str(tmp_path / "g.json"),
        ])
        assert code == EXIT_USAGE

    def test_exact(self, desk_file, capsys):
        assert main(["exact", "--instance", desk_file]) == EXIT_OK
        assert "Optimum: 8" in capsys.readouterr().out

    def test_exact_ml(self, desk_file, capsys):
        assert main(["exact", "--instance", desk_file, "--ml"]) == EXIT_OK
        assert "Minimum latency: 3" in capsys.readouterr().out

    def test_solve(self, desk_file, capsys):
        assert main(["solve", "--instance", desk_file]) == EXIT_OK
        assert "LP value" in capsys.readouterr().out

    def test_round_writes_record(self, desk_file, tmp_path):
        out = tmp_path / "out"
        assert main(["round", "--instance", desk_file, "--seed", "2", "--out", str(out)]) == EXIT_OK
        assert (out / "trials_general.csv").exists()

    def test_round_failure(self, desk_file):
        assert main(["round", "--instance", desk_file, "--algo", "related"]) == EXIT_FAILURE

    def test_bench(self, tmp_path, capsys):
        out = tmp_path / "bench"
        code = main([
            "bench", "--algo", "zfc", "--family", "zfc", "--n", "3", "--m", "3",
            "--trials", "2", "--out", str(out), "--format", "md",
        ])
        assert code == EXIT_OK
        assert "| zfc | zfc |" in capsys.readouterr().out
        assert len((out / "trials_zfc.csv").read_text().splitlines()) == 3

    def test_bench_config_file_with_override(self, tmp_path):
        config = tmp_path / "exp.json"
        config.write_text(json.dumps({
            "algorithm": "general",
            "instance": {"family": "euclidean", "n": 3, "m": 3},
            "trials": 5,
        }))
        out = tmp_path / "bench"
        assert main(["bench", "--config", str(config), "--trials", "1", "--out", str(out)]) == EXIT_OK
        assert len((out / "trials_general.csv").read_text().splitlines()) == 2

    def test_bench_violation(self, mocker):
        mocker.patch("src.bench.ReportBundle.exit_code", new_callable=mocker.PropertyMock, return_value=1)
        code = main(["bench", "--algo", "zfc", "--family", "zfc", "--n", "3", "--m", "3"])
        assert code == EXIT_VIOLATION

    def test_bench_incompatible_family(self):
        assert main(["bench", "--algo", "zfc", "--family", "euclidean", "--n", "3", "--m", "3"]) == EXIT_USAGE

    def test_solver_error_maps_to_failure(self, desk_file, mocker, capsys):
        mocker.patch("src.main.exact_mlufl", side_effect=MluflError("BOOM", "solver broke", "retry"))
        assert main(["exact", "--instance", desk_file]) == EXIT_FAILURE
        assert "Suggestion: retry" in capsys.readouterr().out

    def test_unexpected_error(self, desk_file, mocker):
        mocker.patch("src.main.read_instance", side_effect=RuntimeError("disk on fire"))
        assert main(["validate", "--instance", desk_file]) == EXIT_FAILURE
