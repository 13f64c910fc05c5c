"""Arithmetic expressions, guard predicates and expectations.

All three languages share one immutable node family. Arithmetic expressions
(assignment right-hand sides and probabilities) are the subset without
``Infinity``, ``Iverson``, ``GuardImp``, ``Min``, ``Max``, ``Pow`` and
``AbsDiff``; :func:`is_arithmetic` checks membership.

Values live in the nonnegative rationals extended with ``INFINITY``. They are
represented as :class:`fractions.Fraction` plus ``math.inf``, and every
operation keeps the convention ``0 * inf = inf * 0 = 0``.
"""
from __future__ import annotations

import math
import operator
from dataclasses import dataclass, fields
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, FrozenSet, Iterator, Mapping, Union

from utils.errors import EvaluationError

INFINITY = math.inf
Value = Union[Fraction, float]

ZERO_VALUE = Fraction(0)
ONE_VALUE = Fraction(1)


def value_add(a: Value, b: Value) -> Value:
    if a == INFINITY or b == INFINITY:
        return INFINITY
    return a + b


def value_mul(a: Value, b: Value) -> Value:
    if a == 0 or b == 0:
        return ZERO_VALUE
    if a == INFINITY or b == INFINITY:
        return INFINITY
    return a * b


def value_monus(a: Value, b: Value) -> Value:
    """Truncated subtraction; ``inf - inf`` is taken to be 0."""
    if b == INFINITY:
        return ZERO_VALUE
    if a == INFINITY:
        return INFINITY
    return a - b if a > b else ZERO_VALUE


def value_absdiff(a: Value, b: Value) -> Value:
    if a == INFINITY and b == INFINITY:
        return ZERO_VALUE
    if a == INFINITY or b == INFINITY:
        return INFINITY
    return abs(a - b)


# ---------------------------------------------------------------------------
# Node machinery
# ---------------------------------------------------------------------------

class Node:
    """Base class of every syntax tree node (expressions, predicates, statements)."""

    _field_names: tuple = ()
    _hash_fields: tuple = ()
    # string-valued fields naming program variables (read or written)
    _var_fields: tuple = ()

    def children(self) -> Iterator["Node"]:
        for name in self._field_names:
            value = getattr(self, name)
            if isinstance(value, Node):
                yield value
            elif isinstance(value, tuple):
                for item in value:
                    if isinstance(item, Node):
                        yield item


def _cached_hash(self) -> int:
    cached = self.__dict__.get("_hash")
    if cached is None:
        cached = hash((type(self).__name__,) + tuple(getattr(self, name) for name in self._hash_fields))
        self.__dict__["_hash"] = cached
    return cached


def node(cls):
    """Turn ``cls`` into a frozen dataclass with a memoized structural hash."""
    cls = dataclass(frozen=True)(cls)
    cls._field_names = tuple(f.name for f in fields(cls))
    cls._hash_fields = tuple(f.name for f in fields(cls) if f.compare)
    cls.__hash__ = _cached_hash
    return cls


class Expr(Node):
    pass


class Pred(Node):
    pass


@node
class Const(Expr):
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))
        if self.value < 0:
            raise ValueError(f"negative constant {self.value}")


@node
class Infinity(Expr):
    pass


@node
class Var(Expr):
    name: str
    _var_fields = ("name",)


@node
class Add(Expr):
    left: Expr
    right: Expr


@node
class Monus(Expr):
    left: Expr
    right: Expr


@node
class Mul(Expr):
    left: Expr
    right: Expr


@node
class Div(Expr):
    left: Expr
    right: Expr


@node
class Mod(Expr):
    left: Expr
    right: Expr


@node
class Pow(Expr):
    base: Expr
    exponent: Expr


@node
class Floor(Expr):
    arg: Expr


@node
class Ceil(Expr):
    arg: Expr


@node
class Min(Expr):
    left: Expr
    right: Expr


@node
class Max(Expr):
    left: Expr
    right: Expr


@node
class AbsDiff(Expr):
    left: Expr
    right: Expr


@node
class Iverson(Expr):
    pred: Pred


@node
class GuardImp(Expr):
    """Quantitative implication: ``body`` where ``pred`` holds, infinity elsewhere."""

    pred: Pred
    body: Expr


@node
class BoolConst(Pred):
    value: bool


@node
class Compare(Pred):
    op: str
    left: Expr
    right: Expr


@node
class Congruent(Pred):
    """``left`` and ``right`` agree modulo ``modulus``."""

    left: Expr
    right: Expr
    modulus: Expr


@node
class And(Pred):
    left: Pred
    right: Pred


@node
class Or(Pred):
    left: Pred
    right: Pred


@node
class Implies(Pred):
    left: Pred
    right: Pred


@node
class Not(Pred):
    arg: Pred


@node
class ExpCmp(Pred):
    """Pointwise comparison of two expectations; ``direction`` is ``le`` or ``ge``."""

    direction: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.direction not in ("le", "ge"):
            raise ValueError(f"unknown comparison direction {self.direction!r}")


TRUE = BoolConst(True)
FALSE = BoolConst(False)
ZERO = Const(ZERO_VALUE)
ONE = Const(ONE_VALUE)

COMPARISON_OPS: Dict[str, Callable] = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}

ARITHMETIC_NODES = (Const, Var, Add, Monus, Mul, Div, Mod, Floor, Ceil)


def const(value) -> Const:
    return Const(Fraction(value))


def is_arithmetic(expr: Expr) -> bool:
    """True iff ``expr`` only uses the operators allowed in assignments and probabilities."""
    if not isinstance(expr, ARITHMETIC_NODES):
        return False
    return all(is_arithmetic(child) for child in expr.children())


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _integer_exponent(value: Value) -> int:
    if value == INFINITY or value.denominator != 1:
        raise EvaluationError(f"exponent {value} is not a nonnegative integer")
    return int(value)


def _binary(fn):
    def build(n):
        left, right = evaluator(n.left), evaluator(n.right)
        return lambda state: fn(left(state), right(state))
    return build


def _build_const(n):
    value = n.value
    return lambda state: value


def _build_var(n):
    name = n.name

    def run(state):
        try:
            return state[name]
        except KeyError:
            raise EvaluationError(f"unbound variable '{name}'") from None
    return run


def _div(a: Value, b: Value) -> Value:
    if b == 0:
        raise EvaluationError("division by zero")
    if a == INFINITY:
        return INFINITY
    if b == INFINITY:
        return ZERO_VALUE
    return a / b


def _mod(a: Value, b: Value) -> Value:
    if b == 0 or b == INFINITY or a == INFINITY:
        raise EvaluationError(f"mod undefined for {a} and {b}")
    return a % b


def _pow(base: Value, exponent: Value) -> Value:
    k = _integer_exponent(exponent)
    if k == 0:
        return ONE_VALUE
    if base == INFINITY:
        return INFINITY
    return base ** k


def _build_unary(fn):
    def build(n):
        arg = evaluator(n.arg)

        def run(state):
            value = arg(state)
            return value if value == INFINITY else Fraction(fn(value))
        return run
    return build


def _build_iverson(n):
    pred = evaluator(n.pred)
    return lambda state: ONE_VALUE if pred(state) else ZERO_VALUE


def _build_guard_imp(n):
    pred, body = evaluator(n.pred), evaluator(n.body)
    return lambda state: body(state) if pred(state) else INFINITY


def _build_bool(n):
    value = n.value
    return lambda state: value


def _build_compare(n):
    op = COMPARISON_OPS[n.op]
    left, right = evaluator(n.left), evaluator(n.right)
    return lambda state: op(left(state), right(state))


def _build_congruent(n):
    left, right, modulus = evaluator(n.left), evaluator(n.right), evaluator(n.modulus)

    def run(state):
        k = modulus(state)
        return _mod(left(state), k) == _mod(right(state), k)
    return run


def _build_and(n):
    left, right = evaluator(n.left), evaluator(n.right)
    return lambda state: left(state) and right(state)


def _build_or(n):
    left, right = evaluator(n.left), evaluator(n.right)
    return lambda state: left(state) or right(state)


def _build_implies(n):
    left, right = evaluator(n.left), evaluator(n.right)
    return lambda state: (not left(state)) or right(state)


def _build_not(n):
    arg = evaluator(n.arg)
    return lambda state: not arg(state)


def _build_expcmp(n):
    op = operator.le if n.direction == "le" else operator.ge
    left, right = evaluator(n.left), evaluator(n.right)
    return lambda state: op(left(state), right(state))


_BUILDERS = {
    Const: _build_const,
    Infinity: lambda n: (lambda state: INFINITY),
    Var: _build_var,
    Add: _binary(value_add),
    Monus: _binary(value_monus),
    Mul: _binary(value_mul),
    Div: _binary(_div),
    Mod: _binary(_mod),
    Pow: lambda n: _binary(_pow)(_PowView(n)),
    Floor: _build_unary(math.floor),
    Ceil: _build_unary(math.ceil),
    Min: _binary(min),
    Max: _binary(max),
    AbsDiff: _binary(value_absdiff),
    Iverson: _build_iverson,
    GuardImp: _build_guard_imp,
    BoolConst: _build_bool,
    Compare: _build_compare,
    Congruent: _build_congruent,
    And: _build_and,
    Or: _build_or,
    Implies: _build_implies,
    Not: _build_not,
    ExpCmp: _build_expcmp,
}


class _PowView:
    """Adapts ``Pow`` to the ``left``/``right`` shape used by ``_binary``."""

    def __init__(self, n: Pow):
        self.left = n.base
        self.right = n.exponent


@lru_cache(maxsize=1 << 16)
def evaluator(n: Node) -> Callable[[Mapping[str, Value]], Union[Value, bool]]:
    """Compile ``n`` into a closure over states; shared subtrees compile once."""
    try:
        builder = _BUILDERS[type(n)]
    except KeyError:
        raise TypeError(f"cannot evaluate {type(n).__name__}") from None
    return builder(n)


def eval_exp(f: Expr, state: Mapping[str, Value]) -> Value:
    return evaluator(f)(state)


def eval_pred(phi: Pred, state: Mapping[str, Value]) -> bool:
    return bool(evaluator(phi)(state))


# ---------------------------------------------------------------------------
# Structural operations
# ---------------------------------------------------------------------------

def rebuild(n: Node, visit: Callable[[Node], Node]) -> Node:
    """Apply ``visit`` to the direct children of ``n``; reuse ``n`` when nothing changed."""
    changed = False
    values = {}
    for name in n._field_names:
        value = getattr(n, name)
        if isinstance(value, Node):
            new = visit(value)
        elif isinstance(value, tuple) and any(isinstance(item, Node) for item in value):
            new = tuple(visit(item) if isinstance(item, Node) else item for item in value)
        else:
            new = value
        changed = changed or new is not value
        values[name] = new
    return type(n)(**values) if changed else n


def substitute(n: Node, mapping: Mapping[str, Expr]) -> Node:
    """Simultaneous substitution of variables by expressions."""
    memo: Dict[Node, Node] = {}

    def visit(m: Node) -> Node:
        if isinstance(m, Var):
            return mapping.get(m.name, m)
        if m in memo:
            return memo[m]
        result = rebuild(m, visit)
        memo[m] = result
        return result

    return visit(n)


def subst(f: Node, var: str, replacement: Expr) -> Node:
    """``f[var := replacement]``."""
    return substitute(f, {var: replacement})


@lru_cache(maxsize=1 << 14)
def free_vars(n: Node) -> FrozenSet[str]:
    names = {getattr(n, name) for name in n._var_fields}
    for child in n.children():
        names |= free_vars(child)
    return frozenset(names)


def walk(n: Node) -> Iterator[Node]:
    """Preorder traversal."""
    yield n
    for child in n.children():
        yield from walk(child)
