"""Simplification of expectations and predicates, comparison guards and
bounded-domain entailment.

Entailments are decided by enumerating the declared finite domain in a fixed
order (first declared variable outermost, values ascending); the first
violating state is the reported counterexample.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Tuple

from models.domain import FiniteDomain, ProgState
from models.expressions import (
    INFINITY, ONE, ZERO, AbsDiff, Add, And, BoolConst, Ceil, Compare, COMPARISON_OPS, Congruent,
    Const, Div, ExpCmp, Expr, FALSE, Floor, GuardImp, Implies, Infinity, Iverson, Max, Min, Mod,
    Monus, Mul, Node, Not, Or, Pow, Pred, TRUE, Value, Var, evaluator, rebuild,
)
from utils.errors import EvaluationError
from utils.helpers import format_value

logger = logging.getLogger(__name__)

NEGATED_OPS = {"=": "!=", "!=": "=", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}


# ---------------------------------------------------------------------------
# Simplification
# ---------------------------------------------------------------------------

def _is_const(e: Node) -> bool:
    return type(e) is Const


def _fold(e: Node) -> Optional[Expr]:
    """Evaluate a closed node, or ``None`` when evaluation fails."""
    try:
        value = evaluator(e)({})
    except EvaluationError:
        return None
    return Infinity() if value == INFINITY else Const(value)


def _split_coefficient(term: Expr) -> Tuple[Fraction, Optional[Expr]]:
    if type(term) is Const:
        return term.value, None
    if type(term) is Mul and type(term.left) is Const:
        return term.left.value, term.right
    return Fraction(1), term


def _flatten_sum(e: Expr, out: List[Expr]) -> None:
    if type(e) is Add:
        _flatten_sum(e.left, out)
        _flatten_sum(e.right, out)
    else:
        out.append(e)


def _simplify_add(left: Expr, right: Expr) -> Expr:
    terms: List[Expr] = []
    _flatten_sum(left, terms)
    _flatten_sum(right, terms)
    constant = Fraction(0)
    coefficients: Dict[Expr, Fraction] = {}
    for term in terms:
        if type(term) is Infinity:
            return Infinity()
        coefficient, rest = _split_coefficient(term)
        if rest is None:
            constant += coefficient
        else:
            coefficients[rest] = coefficients.get(rest, Fraction(0)) + coefficient
    parts: List[Expr] = []
    for rest, coefficient in coefficients.items():
        if coefficient == 0:
            continue
        parts.append(rest if coefficient == 1 else Mul(Const(coefficient), rest))
    if constant != 0 or not parts:
        parts.append(Const(constant))
    result = parts[0]
    for part in parts[1:]:
        result = Add(result, part)
    return result


def _scale(c: Fraction, e: Expr) -> Expr:
    """``c * e`` for a finite positive constant, distributed over sums."""
    if c == 1:
        return e
    kind = type(e)
    if kind is Const:
        return Const(c * e.value)
    if kind is Infinity:
        return e
    if kind is Add:
        return _simplify_add(_scale(c, e.left), _scale(c, e.right))
    if kind is Mul and type(e.left) is Const:
        return _scale(c * e.left.value, e.right)
    return Mul(Const(c), e)


def _guard_of(term: Expr) -> Optional[Iverson]:
    _, rest = _split_coefficient(term)
    if type(rest) is Iverson:
        return rest
    if type(rest) is Mul and type(rest.left) is Iverson:
        return rest.left
    return None


def _is_partitioned(e: Expr) -> bool:
    """A sum with at least one Iverson-guarded term."""
    if type(e) is not Add:
        return False
    terms: List[Expr] = []
    _flatten_sum(e, terms)
    return any(_guard_of(term) is not None for term in terms)


def _simplify_mul(left: Expr, right: Expr) -> Expr:
    if _is_const(right) and not _is_const(left):
        left, right = right, left
    if _is_const(left):
        c = left.value
        if c == 0:
            return ZERO
        if type(right) is Infinity:
            return Infinity()
        return _scale(c, right)
    if type(right) is Const and right.value == 0:
        return ZERO
    if type(left) is Infinity and type(right) is Infinity:
        return Infinity()
    if type(left) is Iverson and type(right) is Iverson:
        return _simplify_iverson(And(left.pred, right.pred))
    if type(left) is Iverson and type(right) is Mul and type(right.left) is Iverson:
        return _simplify_mul(_simplify_mul(left, right.left), right.right)
    for guard, other in ((left, right), (right, left)):
        if type(guard) is Iverson and _is_partitioned(other):
            terms: List[Expr] = []
            _flatten_sum(other, terms)
            result = ZERO
            for term in terms:
                result = _simplify_add(result, _simplify_mul(guard, term))
            return result
    if type(right) is Mul and type(right.left) is Const:
        return _scale(right.left.value, _simplify_mul(left, right.right))
    if type(left) is Mul and type(left.left) is Const:
        return _scale(left.left.value, _simplify_mul(left.right, right))
    return Mul(left, right)


def _simplify_iverson(pred: Pred) -> Expr:
    pred = simplify_pred(pred)
    if type(pred) is BoolConst:
        return ONE if pred.value else ZERO
    return Iverson(pred)


def _simplify_node(e: Expr, left: Expr = None, right: Expr = None) -> Expr:
    kind = type(e)
    if kind is Add:
        return _simplify_add(left, right)
    if kind is Mul:
        return _simplify_mul(left, right)
    if kind is Monus:
        if _is_const(right) and right.value == 0:
            return left
        if _is_const(left) and left.value == 0:
            return ZERO
        if left == right or type(right) is Infinity:
            return ZERO
    if kind is Min:
        if left == right:
            return left
        for a, b in ((left, right), (right, left)):
            if type(a) is Infinity:
                return b
            if _is_const(a) and a.value == 0:
                return ZERO
    if kind is Max:
        if left == right:
            return left
        for a, b in ((left, right), (right, left)):
            if type(a) is Infinity:
                return a
            if _is_const(a) and a.value == 0:
                return b
    if kind is Div and _is_const(right) and right.value == 1:
        return left
    if kind is AbsDiff and left == right:
        return ZERO
    rebuilt = e if (left is getattr(e, "left", None) and right is getattr(e, "right", None)) else kind(left, right)
    if all(type(x) in (Const, Infinity) for x in (left, right)):
        folded = _fold(rebuilt)
        if folded is not None:
            return folded
    return rebuilt


@lru_cache(maxsize=1 << 15)
def simplify(e: Expr) -> Expr:
    """Semantics-preserving cleanup: folding, neutral and absorbing elements,
    Iverson algebra and collection of like terms. Not a normal form."""
    kind = type(e)
    if kind in (Const, Infinity, Var):
        return e
    if kind is Iverson:
        return _simplify_iverson(e.pred)
    if kind is GuardImp:
        pred = simplify_pred(e.pred)
        if pred == TRUE:
            return simplify(e.body)
        if pred == FALSE:
            return Infinity()
        body = simplify(e.body)
        return Infinity() if type(body) is Infinity else GuardImp(pred, body)
    if kind in (Floor, Ceil):
        arg = simplify(e.arg)
        if type(arg) in (Const, Infinity):
            return _fold(kind(arg)) or kind(arg)
        return kind(arg)
    if kind is Pow:
        base, exponent = simplify(e.base), simplify(e.exponent)
        if _is_const(exponent) and exponent.value == 0:
            return ONE
        if _is_const(exponent) and exponent.value == 1:
            return base
        rebuilt = Pow(base, exponent)
        if type(base) in (Const, Infinity) and _is_const(exponent):
            return _fold(rebuilt) or rebuilt
        return rebuilt
    if hasattr(e, "left") and hasattr(e, "right") and isinstance(e, Expr):
        return _simplify_node(e, simplify(e.left), simplify(e.right))
    return rebuild(e, simplify)


def _compare_consts(op: str, left: Expr, right: Expr) -> Optional[bool]:
    values = []
    for side in (left, right):
        if type(side) is Const:
            values.append(side.value)
        elif type(side) is Infinity:
            values.append(INFINITY)
        else:
            return None
    return COMPARISON_OPS[op](values[0], values[1])


@lru_cache(maxsize=1 << 15)
def simplify_pred(p: Pred) -> Pred:
    kind = type(p)
    if kind is BoolConst:
        return p
    if kind is Compare:
        left, right = simplify(p.left), simplify(p.right)
        if left == right and type(left) is not Infinity:
            return BoolConst(p.op in ("=", "<=", ">="))
        folded = _compare_consts(p.op, left, right)
        if folded is not None:
            return BoolConst(folded)
        return Compare(p.op, left, right)
    if kind is ExpCmp:
        left, right = simplify(p.left), simplify(p.right)
        if left == right:
            return TRUE
        folded = _compare_consts("<=" if p.direction == "le" else ">=", left, right)
        if folded is not None:
            return BoolConst(folded)
        return ExpCmp(p.direction, left, right)
    if kind is Congruent:
        rebuilt = Congruent(simplify(p.left), simplify(p.right), simplify(p.modulus))
        if all(type(x) is Const for x in (rebuilt.left, rebuilt.right, rebuilt.modulus)):
            try:
                return BoolConst(evaluator(rebuilt)({}))
            except EvaluationError:
                return rebuilt
        return rebuilt
    if kind is Not:
        arg = simplify_pred(p.arg)
        if type(arg) is BoolConst:
            return BoolConst(not arg.value)
        if type(arg) is Not:
            return arg.arg
        if type(arg) is Compare:
            return Compare(NEGATED_OPS[arg.op], arg.left, arg.right)
        return Not(arg)
    if kind is And:
        left, right = simplify_pred(p.left), simplify_pred(p.right)
        if left == FALSE or right == FALSE:
            return FALSE
        if left == TRUE:
            return right
        if right == TRUE or left == right:
            return left
        if simplify_pred(Not(left)) == right:
            return FALSE
        return And(left, right)
    if kind is Or:
        left, right = simplify_pred(p.left), simplify_pred(p.right)
        if left == TRUE or right == TRUE:
            return TRUE
        if left == FALSE:
            return right
        if right == FALSE or left == right:
            return left
        if simplify_pred(Not(left)) == right:
            return TRUE
        return Or(left, right)
    if kind is Implies:
        left, right = simplify_pred(p.left), simplify_pred(p.right)
        if left == FALSE or right == TRUE or left == right:
            return TRUE
        if left == TRUE:
            return right
        if right == FALSE:
            return simplify_pred(Not(left))
        return Implies(left, right)
    return p


def cmp_guard(f: Expr, g: Expr, direction: str) -> ExpCmp:
    """The comparison guard ``f <= g`` (``le``) or ``f >= g`` (``ge``), verbatim."""
    return ExpCmp(direction, f, g)


# ---------------------------------------------------------------------------
# Bounded-domain checks
# ---------------------------------------------------------------------------

@dataclass
class EntailmentReport:
    """Outcome of an exhaustive check over a finite domain."""

    holds: bool
    counterexample: Optional[ProgState] = None
    states_checked: int = 0
    sampled: bool = False
    lhs: Optional[Value] = None
    rhs: Optional[Value] = None
    description: str = ""

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> Dict[str, Any]:
        return {
            "holds": self.holds,
            "description": self.description,
            "counterexample": self.counterexample.to_dict() if self.counterexample is not None else None,
            "lhs": format_value(self.lhs) if self.lhs is not None else None,
            "rhs": format_value(self.rhs) if self.rhs is not None else None,
            "states_checked": self.states_checked,
            "sampled": self.sampled,
        }


def _scan(
    domain: FiniteDomain,
    respect_init: bool,
    violated: Callable[[ProgState], Optional[Tuple[Value, Value]]],
    description: str,
) -> EntailmentReport:
    checked = 0
    for state in domain.states(respect_init=respect_init):
        checked += 1
        try:
            witness = violated(state)
        except EvaluationError as exc:
            raise exc.at(state)
        if witness is not None:
            lhs, rhs = witness
            logger.debug(f"{description} fails at {state}: {format_value(lhs)} vs {format_value(rhs)}")
            return EntailmentReport(False, state, checked, domain.is_sampled, lhs, rhs, description)
    return EntailmentReport(True, None, checked, domain.is_sampled, description=description)


def le_on_domain(f: Expr, g: Expr, domain: FiniteDomain, respect_init: bool = True,
                 description: str = "f <= g") -> EntailmentReport:
    """Check ``f(s) <= g(s)`` for every state ``s`` of ``domain``."""
    lhs, rhs = evaluator(f), evaluator(g)

    def violated(state):
        a, b = lhs(state), rhs(state)
        return None if a <= b else (a, b)

    return _scan(domain, respect_init, violated, description)


def eq_on_domain(f: Expr, g: Expr, domain: FiniteDomain, respect_init: bool = True,
                 description: str = "f = g") -> EntailmentReport:
    lhs, rhs = evaluator(f), evaluator(g)

    def violated(state):
        a, b = lhs(state), rhs(state)
        return None if a == b else (a, b)

    return _scan(domain, respect_init, violated, description)


def pred_entails(phi: Pred, psi: Pred, domain: FiniteDomain, respect_init: bool = True,
                 description: str = "phi |= psi") -> EntailmentReport:
    """No state of ``domain`` satisfies ``phi`` but not ``psi``."""
    premise, conclusion = evaluator(phi), evaluator(psi)

    def violated(state):
        if premise(state) and not conclusion(state):
            return (True, False)
        return None

    report = _scan(domain, respect_init, violated, description)
    report.lhs = report.rhs = None
    return report


def valid_on_domain(phi: Pred, domain: FiniteDomain, respect_init: bool = True,
                    description: str = "valid") -> EntailmentReport:
    return pred_entails(TRUE, phi, domain, respect_init, description)


def satisfying_state(phi: Pred, domain: FiniteDomain, respect_init: bool = False) -> Optional[ProgState]:
    """First state of ``domain`` satisfying ``phi``, if any."""
    check = evaluator(phi)
    for state in domain.states(respect_init=respect_init):
        try:
            if check(state):
                return state
        except EvaluationError as exc:
            raise exc.at(state)
    return None


def max_on_domain(f: Expr, domain: FiniteDomain, where: Optional[Pred] = None,
                  respect_init: bool = False) -> Tuple[Value, Optional[ProgState]]:
    """Largest value of ``f`` over the states satisfying ``where``; ``(0, None)`` if there are none."""
    value_of = evaluator(f)
    guard = evaluator(where) if where is not None else None
    best: Value = Fraction(0)
    best_state = None
    for state in domain.states(respect_init=respect_init):
        try:
            if guard is not None and not guard(state):
                continue
            value = value_of(state)
        except EvaluationError as exc:
            raise exc.at(state)
        if best_state is None or value > best:
            best, best_state = value, state
            if value == math.inf:
                break
    return best, best_state
