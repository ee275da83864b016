"""
Integration tests for the graphdream command line
"""

import json
import logging

import pytest
import structlog

from graphdream.exceptions import CheckpointError, DivergenceDetected, MalformedGraph, RuleFormatError
from graphdream.main import EXIT_DIVERGENCE, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, exit_code_for, run
from graphdream.rules.library import DEFAULT_LIBRARY

pytestmark = pytest.mark.integration


class TestCommandLine:
    """Exit codes and artifacts of real invocations"""

    def setup_method(self):
        structlog.reset_defaults()

    def teardown_method(self):
        structlog.reset_defaults()
        logging.getLogger().handlers.clear()

    def test_export_graph(self, tiny_config_file, tmp_path, capsys):
        code = run(["export-graph", "--graph", "mlp_toy", "--config", str(tiny_config_file), "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert (tmp_path / "mlp_toy.json").exists()
        summary = json.loads(capsys.readouterr().out)
        assert summary["graph"] == "mlp_toy"

    def test_optimize_greedy(self, tiny_config_file, tmp_path, capsys):
        code = run(["optimize", "--graph", "mlp_toy", "--method", "greedy",
                    "--config", str(tiny_config_file), "--out", str(tmp_path)])
        assert code == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        assert summary["equivalent"] is True
        assert summary["best_final_cost"] < summary["initial_cost"]
        assert (tmp_path / "optimized_graph.json").exists()

    def test_seed_flag_lands_in_snapshot(self, tiny_config_file, tmp_path):
        run(["export-graph", "--graph", "mlp_toy", "--config", str(tiny_config_file),
             "--seed", "11", "--out", str(tmp_path)])
        assert json.loads((tmp_path / "config.json").read_text())["seed"] == 11

    def test_verify_rules_with_wrong_rule(self, tiny_config_file, tmp_path):
        document = json.loads(DEFAULT_LIBRARY.read_text())
        document["rules"].append({
            "name": "relu_over_add",
            "variables": {"a": {}, "b": {"same_as": "a"}},
            "source": {"nodes": [{"name": "s", "kind": "Add", "inputs": ["a", "b"]},
                                 {"name": "r", "kind": "Relu", "inputs": ["s"]}], "output": "r"},
            "target": {"nodes": [{"name": "ra", "kind": "Relu", "inputs": ["a"]},
                                 {"name": "rb", "kind": "Relu", "inputs": ["b"]},
                                 {"name": "s", "kind": "Add", "inputs": ["ra", "rb"]}], "output": "s"},
        })
        library = tmp_path / "rules.json"
        library.write_text(json.dumps(document))
        code = run(["verify-rules", "--library", str(library), "--config", str(tiny_config_file),
                    "--out", str(tmp_path / "out")])
        assert code == EXIT_VALIDATION

    def test_unparseable_library(self, tiny_config_file, tmp_path):
        library = tmp_path / "rules.json"
        library.write_text("{not json")
        code = run(["verify-rules", "--library", str(library), "--config", str(tiny_config_file),
                    "--out", str(tmp_path / "out")])
        assert code == EXIT_VALIDATION

    def test_missing_graph_file(self, tiny_config_file, tmp_path):
        code = run(["optimize", "--graph", str(tmp_path / "absent.json"), "--method", "greedy",
                    "--config", str(tiny_config_file), "--out", str(tmp_path)])
        assert code == EXIT_USAGE

    def test_missing_config_file(self, tmp_path):
        code = run(["export-graph", "--graph", "mlp_toy", "--config", str(tmp_path / "absent.json"),
                    "--out", str(tmp_path)])
        assert code == EXIT_USAGE

    def test_controller_for_other_graph(self, tiny_config_file, tmp_path):
        config = str(tiny_config_file)
        run(["export-graph", "--graph", "mlp_toy", "--config", config, "--out", str(tmp_path / "g")])
        run(["train-controller", "--graph", str(tmp_path / "g" / "mlp_toy.json"), "--config", config,
             "--out", str(tmp_path / "ctrl")])
        code = run(["optimize", "--graph", "mlp_toy", "--method", "rl", "--controller",
                    str(tmp_path / "ctrl" / "controller.pt"), "--config", config, "--out", str(tmp_path / "opt")])
        assert code == EXIT_USAGE

    def test_invalid_config(self, tmp_path):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"env": {"invalid_penalty": 1.0}}))
        code = run(["export-graph", "--graph", "mlp_toy", "--config", str(config), "--out", str(tmp_path)])
        assert code == EXIT_USAGE


class TestUsageErrors:
    """argparse failures exit with 1"""

    @pytest.mark.parametrize("argv", [
        [],
        ["no-such-command"],
        ["optimize", "--method", "greedy"],
        ["optimize", "--graph", "mlp_toy", "--method", "annealing"],
        ["verify-rules", "--trials", "0"],
        ["sweep-temperature", "--graph", "mlp_toy", "--tau", "0.5,-1"],
        ["train-controller", "--graph", "mlp_toy", "--tau", "0.5,1.0"],
    ])
    def test_usage_error_exit_code(self, argv, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run(argv)
        assert excinfo.value.code == EXIT_USAGE
        assert "usage" in capsys.readouterr().err


class TestExitCodeMapping:
    """Exception to exit code"""

    @pytest.mark.parametrize("error, code", [
        (DivergenceDetected("nan loss"), EXIT_DIVERGENCE),
        (FileNotFoundError("x"), EXIT_USAGE),
        (CheckpointError("x"), EXIT_USAGE),
        (ValueError("x"), EXIT_USAGE),
        (RuleFormatError("x"), EXIT_VALIDATION),
        (MalformedGraph("x"), EXIT_VALIDATION),
    ])
    def test_mapping(self, error, code):
        assert exit_code_for(error) == code
