from fractions import Fraction

import pytest

from models.domain import FiniteDomain, ProgState
from models.expressions import Var
from services.mdp import (
    Action, build_mdp, conservation_violations, expected_reward, expected_steps, export_mdp,
    extract_strategy, restrict_by_program, strategy_value,
)
from services.parser import parse_expectation, parse_statement
from services.transform import dtrans
from utils.errors import BudgetExceeded, DomainEscape, GuardsNotExhaustive


def choice_states(mdp, strategy):
    for s, action in strategy.items():
        if len(mdp.enabled(s)) >= 2:
            yield mdp.configurations[s].state, action


@pytest.mark.parametrize("name", ["random_shift", "choose_then_shift", "copy_either", "monty_hall", "nim"])
def test_probabilities_are_conserved(fixture_source, name):
    source = fixture_source(name)
    mdp = build_mdp(source.program, source.domain)
    assert conservation_violations(mdp) == []


def test_small_model_export():
    domain = FiniteDomain.of(x=range(2))
    mdp = build_mdp(parse_statement("x := 1"), domain)
    assert export_mdp(mdp, Var("x")) == (
        "states 3\n"
        "initial 0\n"
        "initial 1\n"
        "0 tau 1 2\n"
        "1 tau 1 2\n"
        "2 tau 1 2\n"
        "target 2\n"
        "reward 2 1\n"
    )
    assert mdp.describe() == {
        "states": 3, "initial": 2, "transitions": 3, "terminated": 1, "escaped": 0, "acyclic": True,
    }


def test_monty_hall_switching_wins_two_thirds(fixture_source):
    source = fixture_source("monty_hall")
    mdp = build_mdp(source.program, source.domain)
    result = expected_reward(mdp, source.post, "max")
    assert result.exact
    assert len(result.values) == source.domain.size
    assert set(result.values.values()) == {Fraction(2, 3)}

    strategy = extract_strategy(mdp, result, "max")
    assert all(strategy[s] is Action.ALPHA for s in mdp.initial)
    chain = strategy_value(mdp, strategy, source.post)
    assert set(chain.values.values()) == {Fraction(2, 3)}

    minimum = expected_reward(mdp, source.post, "min")
    assert set(minimum.values.values()) == {Fraction(1, 3)}


def test_increment_game_strategies(fixture_source, stop_options):
    source = fixture_source("coin_increment")
    mdp = build_mdp(source.program, source.domain, escape=stop_options.escape)
    assert mdp.escaped
    best = expected_reward(mdp, source.post, "max", escape_reward=Var("x"))
    start = ProgState({"c": Fraction(0), "x": Fraction(0)})
    assert abs(float(best.values[start]) - 2) < 1e-5
    assert best.values[ProgState({"c": Fraction(1), "x": Fraction(7)})] == 7
    assert best.escape_mass[start] > 0
    assert any("leave the declared domain" in w for w in best.warnings)
    for state, action in choice_states(mdp, extract_strategy(mdp, best, "max")):
        if state["x"] <= 30:
            assert action is Action.BETA

    worst = expected_reward(mdp, source.post, "min", escape_reward=Var("x"))
    assert abs(float(worst.values[start]) - 1) < 1e-5
    for state, action in choice_states(mdp, extract_strategy(mdp, worst, "min")):
        if state["x"] <= 30:
            assert action is Action.ALPHA


def test_escape_is_an_error_by_default(fixture_source):
    source = fixture_source("coin_increment")
    with pytest.raises(DomainEscape) as excinfo:
        build_mdp(source.program, source.domain)
    assert excinfo.value.exit_code == 3
    assert excinfo.value.statement is not None


def test_state_budget(fixture_source):
    source = fixture_source("random_shift")
    with pytest.raises(BudgetExceeded):
        build_mdp(source.program, source.domain, budget=2)


def test_disabled_guards_are_reported():
    domain = FiniteDomain.of(x=range(3))
    program = parse_statement("if x = 0 -> {skip} [] x = 1 -> {skip} fi")
    with pytest.raises(GuardsNotExhaustive) as excinfo:
        build_mdp(program, domain)
    assert excinfo.value.context["state"]["x"] == 2


def test_restriction_follows_the_refined_program(fixture_source):
    source = fixture_source("copy_either")
    mdp = build_mdp(source.program, source.domain)
    restricted = restrict_by_program(mdp, dtrans(source.program, source.post))
    original = expected_reward(mdp, source.post, "min")
    refined_worst = expected_reward(restricted, source.post, "max")
    for state, value in original.values.items():
        assert value == min(state["y"], state["z"])
        assert refined_worst.values[state] == value
    unrestricted_worst = expected_reward(mdp, source.post, "max")
    assert any(unrestricted_worst.values[s] > v for s, v in original.values.items())


def test_expected_steps_on_straight_line_code():
    domain = FiniteDomain.of(x=range(2))
    mdp = build_mdp(parse_statement("x := 1; x := 0"), domain)
    steps = expected_steps(mdp, "max")
    assert steps.exact
    assert set(steps.values.values()) == {2}


def test_expected_steps_detect_divergence(fixture_source):
    source = fixture_source("nonterminating")
    mdp = build_mdp(source.program, source.domain)
    steps = expected_steps(mdp, "max")
    assert steps.values[ProgState({"c": Fraction(0)})] == float("inf")
    assert steps.values[ProgState({"c": Fraction(1)})] == 1


def test_cyclic_models_use_value_iteration():
    domain = FiniteDomain.of(c=range(2))
    program = parse_statement("while c = 0 inv 0 { {c := 1} [1/2] {skip} }")
    mdp = build_mdp(program, domain)
    assert not mdp.is_acyclic
    result = expected_reward(mdp, parse_expectation("[c = 1]"), "max", epsilon=1e-12)
    assert not result.exact
    assert abs(result.values[ProgState({"c": Fraction(0)})] - 1) < 1e-9
    assert result.to_dict()["epsilon"] == 1e-12


def test_escaped_configurations_are_exported(fixture_source, stop_options):
    source = fixture_source("coin_increment")
    mdp = build_mdp(source.program, source.domain, escape=stop_options.escape)
    lines = export_mdp(mdp).splitlines()
    assert lines[0] == f"states {mdp.size}"
    assert any(line.startswith("escaped ") for line in lines)
    assert not any(line.startswith("reward ") for line in lines)


def test_max_strategy_leaves_an_optimal_self_loop():
    domain = FiniteDomain.of(c=range(2))
    program = parse_statement("while c = 0 inv 1 { if true -> {skip} [] true -> {c := 1} fi }")
    post = parse_expectation("[c = 1]")
    mdp = build_mdp(program, domain)
    best = expected_reward(mdp, post, "max")
    start = ProgState({"c": Fraction(0)})
    assert best.values[start] == 1
    strategy = extract_strategy(mdp, best, "max")
    assert [action for _, action in choice_states(mdp, strategy)] == [Action.BETA]
    assert strategy_value(mdp, strategy, post).values[start] == 1


RESTART_WALK = "while x < 3 inv 1 { if true -> {skip} [] true -> {{x := x + 1} [1/2] {x := 0}} fi }"


@pytest.mark.parametrize("mode, expected", [("max", 1), ("min", 0)])
def test_strategies_attain_the_optimum_on_cyclic_models(mode, expected):
    domain = FiniteDomain.of(x=range(4))
    post = parse_expectation("[x = 3]")
    mdp = build_mdp(parse_statement(RESTART_WALK), domain)
    assert not mdp.is_acyclic
    result = expected_reward(mdp, post, mode, epsilon=1e-12)
    chain = strategy_value(mdp, extract_strategy(mdp, result, mode), post, epsilon=1e-12)
    for state, value in result.values.items():
        if state["x"] < 3:
            assert abs(value - expected) < 1e-6
        assert abs(chain.values[state] - value) < 1e-6, state


def test_unreachable_rewards_are_decided_exactly():
    domain = FiniteDomain.of(c=range(2))
    mdp = build_mdp(parse_statement("while c = 0 inv 0 { skip }"), domain)
    assert not mdp.is_acyclic
    result = expected_reward(mdp, parse_expectation("[c = 1]"), "max")
    assert result.exact
    assert result.values == {ProgState({"c": Fraction(0)}): 0, ProgState({"c": Fraction(1)}): 1}


def test_infinite_rewards_are_decided_exactly():
    domain = FiniteDomain.of(c=range(2))
    mdp = build_mdp(parse_statement("while c = 0 inv 0 { {c := 1} [1/2] {skip} }"), domain)
    result = expected_reward(mdp, parse_expectation("[c = 1] * infinity"), "max")
    assert result.exact
    assert result.values[ProgState({"c": Fraction(0)})] == float("inf")


def test_exactness_is_reported_per_state():
    domain = FiniteDomain.of(c=range(2))
    mdp = build_mdp(parse_statement("while c = 0 inv 0 { {c := 1} [1/2] {skip} }"), domain)
    result = expected_reward(mdp, parse_expectation("[c = 1]"), "max")
    assert not result.exact
    assert not result.is_exact(ProgState({"c": Fraction(0)}))
    assert result.is_exact(ProgState({"c": Fraction(1)}))
    assert [row["exact"] for row in result.to_dict()["values"]] == [False, True]
