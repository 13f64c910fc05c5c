import math
from fractions import Fraction

import pytest

from models.domain import FiniteDomain, ProgState
from models.expressions import (
    AbsDiff, Add, Compare, Congruent, Const, Div, ExpCmp, Floor, GuardImp, Infinity, Iverson, Max, Min,
    Mod, Monus, Mul, Pow, TRUE, Var, const, eval_exp, eval_pred, free_vars, is_arithmetic, subst,
    substitute,
)
from utils.errors import EvaluationError, UndeclaredVariable

x, y = Var("x"), Var("y")


def state(**values):
    return ProgState({k: Fraction(v) for k, v in values.items()})


def test_monus_truncates_at_zero():
    assert eval_exp(Monus(x, y), state(x=2, y=5)) == 0
    assert eval_exp(Monus(x, y), state(x=5, y=2)) == 3


def test_infinity_arithmetic():
    inf = Infinity()
    assert eval_exp(Mul(const(0), inf), {}) == 0
    assert eval_exp(Mul(inf, const(0)), {}) == 0
    assert eval_exp(Add(inf, const(1)), {}) == math.inf
    assert eval_exp(Monus(inf, inf), {}) == 0
    assert eval_exp(Min(inf, const(3)), {}) == 3


def test_guard_implication_is_infinite_outside_the_guard():
    e = GuardImp(Compare("<", x, const(2)), x)
    assert eval_exp(e, state(x=1)) == 1
    assert eval_exp(e, state(x=3)) == math.inf


def test_iverson_and_congruence():
    assert eval_exp(Iverson(Congruent(Add(x, const(1)), y, const(4))), state(x=3, y=8)) == 1
    assert eval_exp(Iverson(Congruent(x, y, const(4))), state(x=3, y=8)) == 0


def test_power_needs_integer_exponent():
    assert eval_exp(Pow(const(Fraction(1, 2)), x), state(x=3)) == Fraction(1, 8)
    with pytest.raises(EvaluationError):
        eval_exp(Pow(const(2), const(Fraction(1, 2))), {})


def test_division_by_zero_raises():
    with pytest.raises(EvaluationError, match="division by zero"):
        eval_exp(Div(x, y), state(x=1, y=0))


def test_mod_and_floor():
    assert eval_exp(Mod(x, const(3)), state(x=7)) == 1
    assert eval_exp(Floor(Div(x, const(2))), state(x=7)) == 3


def test_absdiff():
    assert eval_exp(AbsDiff(x, y), state(x=1, y=4)) == 3


def test_unbound_variable():
    with pytest.raises(EvaluationError, match="unbound variable 'z'"):
        eval_exp(Var("z"), state(x=1))


def test_expcmp_direction():
    assert eval_pred(ExpCmp("le", x, y), state(x=1, y=2))
    assert not eval_pred(ExpCmp("ge", x, y), state(x=1, y=2))
    with pytest.raises(ValueError):
        ExpCmp("lt", x, y)


def test_negative_constants_are_rejected():
    with pytest.raises(ValueError):
        Const(Fraction(-1))


def test_substitution_is_simultaneous():
    swapped = substitute(Add(x, Mul(const(2), y)), {"x": y, "y": x})
    assert swapped == Add(y, Mul(const(2), x))
    assert subst(Iverson(Compare("=", x, y)), "x", const(3)) == Iverson(Compare("=", const(3), y))


def test_free_vars_and_arithmetic_subset():
    assert free_vars(Max(x, Iverson(Compare("<", y, const(1))))) == {"x", "y"}
    assert is_arithmetic(Mod(Add(x, const(1)), const(3)))
    assert not is_arithmetic(Min(x, y))
    assert not is_arithmetic(Iverson(TRUE))


def test_nodes_hash_structurally():
    assert hash(Add(x, const(1))) == hash(Add(Var("x"), const(1)))
    assert len({Add(x, const(1)), Add(Var("x"), Const(Fraction(1)))}) == 1


def test_state_enumeration_order_and_init():
    domain = FiniteDomain.of(init=Compare("<=", x, y), x=range(2), y=range(2))
    assert [s.to_dict() for s in domain.states()] == [
        {"x": "0", "y": "0"}, {"x": "0", "y": "1"}, {"x": "1", "y": "0"}, {"x": "1", "y": "1"},
    ]
    assert len(list(domain.initial_states())) == 3
    assert domain.size == 4


def test_progstate_is_hashable_and_immutable():
    s = state(x=1)
    t = s.set("x", Fraction(2))
    assert s["x"] == 1 and t["x"] == 2
    assert {s: "a"}[state(x=1)] == "a"


def test_domain_require_reports_missing_names():
    domain = FiniteDomain.of(x=range(2))
    with pytest.raises(UndeclaredVariable, match="y"):
        domain.require({"x", "y"})


def test_sampled_domains_keep_given_values():
    domain = FiniteDomain.of(sampled=["p"], p=[Fraction(1, 2), Fraction(1, 4)])
    assert domain.variables["p"] == (Fraction(1, 4), Fraction(1, 2))
    assert domain.is_sampled
    assert domain.contains("p", Fraction(1, 2))
    assert not domain.contains("p", Fraction(1, 3))
