from pathlib import Path

import pytest
from click.testing import CliRunner

from cli import pgcl
from services.parser import load_file
from utils.helpers import from_json

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture_path(name):
    return str(FIXTURES / f"{name}.pgcl")


@pytest.fixture
def runner():
    return CliRunner()


def invoke_json(runner, *args):
    result = runner.invoke(pgcl, ["--json", *args])
    return result, from_json(result.stdout)


def test_wp_json(runner):
    result, report = invoke_json(runner, "wp", fixture_path("random_shift"), "--eval", "x=0,y=1")
    assert result.exit_code == 0
    assert report["preexpectation"] == "y + 3"
    assert report["values"][0]["value"] == "4"


def test_wp_table(runner):
    result = runner.invoke(pgcl, ["wp", fixture_path("choose_then_shift"), "-t", "awp", "--eval", "x=0,y=0"])
    assert result.exit_code == 0
    assert "7" in result.stdout
    assert "PASS" in result.stdout


def test_wp_rejects_malformed_state(runner):
    result = runner.invoke(pgcl, ["wp", fixture_path("random_shift"), "--eval", "x"])
    assert result.exit_code == 2


def test_wp_of_a_loop_is_a_usage_error(runner):
    result, report = invoke_json(runner, "wp", fixture_path("square_or_increment"))
    assert result.exit_code == 2
    assert report["verdict"] is False
    assert report["kind"] == "LoopPresent"


def test_check_exit_codes(runner):
    assert runner.invoke(pgcl, ["check", fixture_path("square_or_increment")]).exit_code == 0
    result, report = invoke_json(runner, "check", fixture_path("square_or_increment_tampered"))
    assert result.exit_code == 1
    assert report["verdict"] is False
    assert report["counterexamples"][0]["counterexample"] == {"c": "1", "x": "2"}


def test_check_pairing_mismatch(runner):
    result, report = invoke_json(runner, "check", fixture_path("nim"), "--provider", "superinv")
    assert result.exit_code == 2
    assert report["kind"] == "PairingMismatch"


def test_check_threshold_override(runner):
    result = runner.invoke(pgcl, ["check", fixture_path("square_or_increment"), "--threshold", "x"])
    assert result.exit_code == 1


def test_transform_writes_a_parseable_file(runner, tmp_path):
    output = tmp_path / "refined.pgcl"
    result = runner.invoke(pgcl, ["transform", fixture_path("copy_either"), "--determinize", "-o", str(output)])
    assert result.exit_code == 0
    refined = load_file(output)
    assert refined.direction == "upper"
    assert refined.domain == load_file(fixture_path("copy_either")).domain


def test_transform_escape_needs_stop_mode(runner):
    assert runner.invoke(pgcl, ["transform", fixture_path("square_or_increment")]).exit_code == 3
    assert runner.invoke(pgcl, ["transform", fixture_path("square_or_increment"), "--no-oracle"]).exit_code == 0
    assert runner.invoke(pgcl, ["--escape", "stop", "transform", fixture_path("square_or_increment")]).exit_code == 0


def test_mdp_export(runner, tmp_path):
    target = tmp_path / "monty.txt"
    result, report = invoke_json(runner, "mdp", fixture_path("monty_hall"), "--export", str(target), "--strategy")
    assert result.exit_code == 0
    assert "export" not in report
    assert report["export_path"] == str(target)
    lines = target.read_text(encoding="utf-8").splitlines()
    assert lines[0] == f"states {report['model']['states']}"
    assert sum(line.startswith("initial ") for line in lines) == 54
    assert report["strategy"]


def test_mdp_escape(runner):
    result, report = invoke_json(runner, "mdp", fixture_path("coin_increment"))
    assert result.exit_code == 3
    assert report["kind"] == "DomainEscape"
    result = runner.invoke(pgcl, ["--escape", "stop", "mdp", fixture_path("coin_increment"), "--escape-reward", "x"])
    assert result.exit_code == 0
    assert "escape" in result.stdout


def test_budget_is_a_resource_error(runner):
    result = runner.invoke(pgcl, ["--budget", "5", "mdp", fixture_path("monty_hall")])
    assert result.exit_code == 3


def test_parse_errors_are_usage_errors(runner, tmp_path):
    broken = tmp_path / "broken.pgcl"
    broken.write_text("domain x: 0..2;\nprogram { x := }\n", encoding="utf-8")
    result, report = invoke_json(runner, "wp", str(broken))
    assert result.exit_code == 2
    assert report["kind"] == "ParseError"
    assert report["line"] == 2


def test_missing_file(runner):
    assert runner.invoke(pgcl, ["check", "does-not-exist.pgcl"]).exit_code == 2


def test_probability_out_of_range_is_a_resource_error(runner, tmp_path):
    program = tmp_path / "biased.pgcl"
    program.write_text("domain x: 0..2;\npost x;\nprogram { {x := 0} [x / 1] {skip} }\n", encoding="utf-8")
    for command in ("wp", "transform", "mdp"):
        result, report = invoke_json(runner, command, str(program))
        assert result.exit_code == 3, command
        assert report["kind"] == "ProbabilityOutOfRange"


def test_zero_denominator_is_a_parse_error(runner, tmp_path):
    program = tmp_path / "zero.pgcl"
    program.write_text("domain x: 0..2;\nprogram { x := 1/0 }\n", encoding="utf-8")
    result, report = invoke_json(runner, "wp", str(program))
    assert result.exit_code == 2
    assert report["kind"] == "ParseError"
    assert report["line"] == 2
