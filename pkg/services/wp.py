"""Demonic and angelic weakest preexpectations.

``wp_exact`` covers loop-free programs. ``wpre`` is the invariant-based
variant: every loop contributes its annotated invariant instead of a fixpoint.
"""
import logging
from enum import Enum
from functools import lru_cache

from models.domain import FiniteDomain
from models.expressions import (
    ONE, Add, Expr, GuardImp, Iverson, Max, Min, Monus, Mul, Not, Or, eval_exp, subst, walk,
)
from models.program import (
    Assign, GuardedChoice, IfElse, ProbChoice, Seq, Skip, Stmt, UniformAssign, While, desugar,
)
from services.algebra import simplify, valid_on_domain
from services.printer import print_pred
from utils.errors import EvaluationError, GuardsNotExhaustive, LoopPresent, ProbabilityOutOfRange

logger = logging.getLogger(__name__)


class Transformer(str, Enum):
    DWP = "dwp"
    AWP = "awp"

    @property
    def mode(self) -> str:
        """Matching MDP objective."""
        return "min" if self is Transformer.DWP else "max"


def _choice(kind: Transformer, guard1, left: Expr, guard2, right: Expr) -> Expr:
    if kind is Transformer.DWP:
        return Min(GuardImp(guard1, left), GuardImp(guard2, right))
    return Max(Mul(Iverson(guard1), left), Mul(Iverson(guard2), right))


@lru_cache(maxsize=1 << 14)
def _transform(kind: Transformer, stmt: Stmt, post: Expr, exact: bool) -> Expr:
    if isinstance(stmt, Skip):
        return post
    if isinstance(stmt, Assign):
        return simplify(subst(post, stmt.var, stmt.expr))
    if isinstance(stmt, Seq):
        middle = _transform(kind, stmt.second, post, exact)
        return _transform(kind, stmt.first, middle, exact)
    if isinstance(stmt, GuardedChoice):
        left = _transform(kind, stmt.left, post, exact)
        right = _transform(kind, stmt.right, post, exact)
        return simplify(_choice(kind, stmt.guard1, left, stmt.guard2, right))
    if isinstance(stmt, ProbChoice):
        left = _transform(kind, stmt.left, post, exact)
        right = _transform(kind, stmt.right, post, exact)
        return simplify(Add(Mul(stmt.prob, left), Mul(Monus(ONE, stmt.prob), right)))
    if isinstance(stmt, While):
        if exact:
            raise LoopPresent(f"{stmt.label} has no exact loop-free preexpectation; use wpre")
        return stmt.invariant
    if isinstance(stmt, (IfElse, UniformAssign)):
        return _transform(kind, desugar(stmt), post, exact)
    raise TypeError(f"unsupported statement {type(stmt).__name__}")


def wp_exact(kind: Transformer, program: Stmt, post: Expr) -> Expr:
    """Exact dwp/awp of a loop-free program.

    Raises:
        LoopPresent: if ``program`` contains a loop.
    """
    return _transform(Transformer(kind), program, post, True)


def wpre(kind: Transformer, program: Stmt, post: Expr) -> Expr:
    """Invariant-based preexpectation; each loop yields its annotation."""
    return _transform(Transformer(kind), program, post, False)


def char_functional(kind: Transformer, loop: While, post: Expr) -> Expr:
    """``[guard] * wpre(body, I) + [!guard] * post`` for the loop's invariant ``I``."""
    body = wpre(kind, loop.body, loop.invariant)
    return simplify(Add(Mul(Iverson(loop.guard), body), Mul(Iverson(Not(loop.guard)), post)))


def check_probabilities(program: Stmt, domain: FiniteDomain) -> int:
    """Verify every probability expression lies in [0, 1] on every state of ``domain``.

    Returns the number of probability expressions checked.
    """
    probabilities = {node.prob for node in walk(desugar(program)) if isinstance(node, ProbChoice)}
    for prob in probabilities:
        for state in domain.states():
            try:
                value = eval_exp(prob, state)
            except EvaluationError as exc:
                raise exc.at(state)
            if not 0 <= value <= 1:
                raise ProbabilityOutOfRange(f"probability evaluates to {value} at {state}", state=state)
    logger.debug(f"Checked {len(probabilities)} probability expressions on {domain.size} states")
    return len(probabilities)


def check_guards(program: Stmt, domain: FiniteDomain) -> int:
    """Verify some guard of every guarded choice holds on every state of ``domain``.

    Returns the number of guarded choices checked.

    Raises:
        GuardsNotExhaustive: at the first state where neither guard holds.
    """
    choices = {(node.guard1, node.guard2) for node in walk(desugar(program)) if isinstance(node, GuardedChoice)}
    for guard1, guard2 in choices:
        report = valid_on_domain(Or(guard1, guard2), domain, respect_init=False, description="guards exhaustive")
        if not report.holds:
            state = report.counterexample
            raise GuardsNotExhaustive(
                f"neither '{print_pred(guard1)}' nor '{print_pred(guard2)}' holds at {state}", state=state,
            )
    return len(choices)


def check_well_formed(program: Stmt, domain: FiniteDomain) -> None:
    """Static checks every analysis needs before it starts."""
    check_probabilities(program, domain)
    check_guards(program, domain)
