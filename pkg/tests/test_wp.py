from fractions import Fraction

import pytest

from models.domain import FiniteDomain
from models.expressions import Min, Mul, Var, const, eval_exp
from services.algebra import eq_on_domain
from services.parser import parse_expectation, parse_statement
from services.printer import print_expr
from services.wp import (
    Transformer, char_functional, check_guards, check_probabilities, check_well_formed, wp_exact, wpre,
)
from utils.errors import GuardsNotExhaustive, LoopPresent, ProbabilityOutOfRange


def test_probabilistic_assignment_simplifies(fixture_source):
    source = fixture_source("random_shift")
    assert print_expr(wp_exact(Transformer.DWP, source.program, source.post)) == "y + 3"
    assert print_expr(wp_exact(Transformer.AWP, source.program, source.post)) == "y + 3"


def test_demonic_and_angelic_values_differ(fixture_source):
    source = fixture_source("choose_then_shift")
    dwp = wp_exact(Transformer.DWP, source.program, source.post)
    awp = wp_exact(Transformer.AWP, source.program, source.post)
    for state in source.domain.states():
        assert eval_exp(dwp, state) == 4
        assert eval_exp(awp, state) == 7


def test_minimum_of_branches(fixture_source):
    source = fixture_source("copy_either")
    result = wp_exact(Transformer.DWP, source.program, source.post)
    assert eq_on_domain(result, Min(Var("y"), Var("z")), source.domain).holds
    angelic = wp_exact(Transformer.AWP, source.program, source.post)
    assert eval_exp(angelic, {"x": 0, "y": 1, "z": 3}) == 3


def test_loops_need_invariants(fixture_source):
    source = fixture_source("square_or_increment")
    with pytest.raises(LoopPresent):
        wp_exact(Transformer.DWP, source.program, source.post)
    assert wpre(Transformer.DWP, source.program, source.post) == source.program.invariant


def test_nested_loops_bound(fixture_source):
    source = fixture_source("nested")
    bound = wpre(Transformer.DWP, source.program, source.post)
    expected = Min(Mul(const(3), Var("y")), Var("z"))
    assert eq_on_domain(bound, expected, source.domain, respect_init=False).holds


def test_characteristic_functional(fixture_source):
    loop = fixture_source("square_or_increment").program
    functional = char_functional(Transformer.DWP, loop, Var("x"))
    # at c = 1: x/2 + min(x^2 + 1, x + 2)/2
    assert eval_exp(functional, {"c": Fraction(1), "x": Fraction(3)}) == Fraction(3, 2) + Fraction(5, 2)
    assert eval_exp(functional, {"c": Fraction(0), "x": Fraction(3)}) == 3


def test_guarded_choice_respects_guards():
    program = parse_statement("if x = 0 -> {x := 5} [] true -> {x := 1} fi")
    post = parse_expectation("x")
    dwp = wp_exact(Transformer.DWP, program, post)
    awp = wp_exact(Transformer.AWP, program, post)
    assert eval_exp(dwp, {"x": Fraction(0)}) == 1
    assert eval_exp(dwp, {"x": Fraction(2)}) == 1
    assert eval_exp(awp, {"x": Fraction(0)}) == 5
    assert eval_exp(awp, {"x": Fraction(2)}) == 1


def test_probability_range_is_checked():
    domain = FiniteDomain.of(x=range(3))
    program = parse_statement("{x := 0} [x / 1] {skip}")
    with pytest.raises(ProbabilityOutOfRange) as excinfo:
        check_probabilities(program, domain)
    assert excinfo.value.state["x"] == 2
    assert check_probabilities(parse_statement("{x := 0} [x / 2] {skip}"), domain) == 1


def test_transformer_modes():
    assert Transformer.DWP.mode == "min"
    assert Transformer("awp").mode == "max"


def test_guards_must_cover_every_state():
    domain = FiniteDomain.of(x=range(3))
    program = parse_statement("if x = 0 -> {x := 1} [] x = 1 -> {x := 2} fi")
    with pytest.raises(GuardsNotExhaustive) as excinfo:
        check_guards(program, domain)
    assert excinfo.value.context["state"]["x"] == 2
    covered = parse_statement("if x = 0 -> {skip} [] x != 0 -> {skip} fi; if x < 1 {skip} else {skip}")
    assert check_guards(covered, domain) == 2
    with pytest.raises(GuardsNotExhaustive):
        check_well_formed(parse_statement("{skip} [1/2] {if x = 0 -> {skip} [] x = 1 -> {skip} fi}"), domain)
