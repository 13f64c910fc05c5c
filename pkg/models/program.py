"""pGCL statements.

Core statements are ``Skip``, ``Assign``, ``Seq``, ``GuardedChoice``,
``ProbChoice`` and ``While``. ``IfElse`` and ``UniformAssign`` are surface
sugar the parser keeps until :func:`desugar` rewrites them.
"""
from __future__ import annotations

from dataclasses import field
from fractions import Fraction
from typing import Iterable, Iterator, List, Optional, Tuple

from models.expressions import Expr, Node, Not, Pred, const, node, walk
from utils.errors import EmptyUniform


class Stmt(Node):
    pass


@node
class Skip(Stmt):
    pass


@node
class Assign(Stmt):
    var: str
    expr: Expr
    _var_fields = ("var",)


@node
class UniformAssign(Stmt):
    var: str
    exprs: Tuple[Expr, ...]
    _var_fields = ("var",)


@node
class Seq(Stmt):
    first: Stmt
    second: Stmt


@node
class GuardedChoice(Stmt):
    """``if guard1 -> left [] guard2 -> right fi``; action alpha picks ``left``."""

    guard1: Pred
    left: Stmt
    guard2: Pred
    right: Stmt


@node
class ProbChoice(Stmt):
    """``{left}[prob]{right}``: ``left`` with probability ``prob``."""

    left: Stmt
    prob: Expr
    right: Stmt


@node
class IfElse(Stmt):
    guard: Pred
    then: Stmt
    orelse: Stmt


@node
class While(Stmt):
    guard: Pred
    body: Stmt
    invariant: Expr
    line: Optional[int] = field(default=None, compare=False, repr=False)

    @property
    def label(self) -> str:
        return f"while@{self.line}" if self.line is not None else "while"


def seq(statements: Iterable[Stmt]) -> Stmt:
    """Right-nested sequence of ``statements``; ``Skip`` when empty."""
    items: List[Stmt] = list(statements)
    if not items:
        return Skip()
    result = items[-1]
    for stmt in reversed(items[:-1]):
        result = Seq(stmt, result)
    return result


def _uniform_chain(var: str, exprs: Tuple[Expr, ...]) -> Stmt:
    n = len(exprs)
    if n == 1:
        return Assign(var, exprs[0])
    return ProbChoice(Assign(var, exprs[0]), const(Fraction(1, n)), _uniform_chain(var, exprs[1:]))


def desugar(stmt: Stmt) -> Stmt:
    """Rewrite ``IfElse`` and ``UniformAssign`` into the core grammar."""
    if isinstance(stmt, IfElse):
        return GuardedChoice(stmt.guard, desugar(stmt.then), Not(stmt.guard), desugar(stmt.orelse))
    if isinstance(stmt, UniformAssign):
        if not stmt.exprs:
            raise EmptyUniform(f"uniform assignment to '{stmt.var}' has no alternatives")
        return _uniform_chain(stmt.var, stmt.exprs)
    if isinstance(stmt, Seq):
        return Seq(desugar(stmt.first), desugar(stmt.second))
    if isinstance(stmt, GuardedChoice):
        return GuardedChoice(stmt.guard1, desugar(stmt.left), stmt.guard2, desugar(stmt.right))
    if isinstance(stmt, ProbChoice):
        return ProbChoice(desugar(stmt.left), stmt.prob, desugar(stmt.right))
    if isinstance(stmt, While):
        return While(stmt.guard, desugar(stmt.body), stmt.invariant, stmt.line)
    return stmt


def loops(stmt: Stmt) -> Iterator[While]:
    """Every ``While`` in ``stmt``, outermost first."""
    for item in walk(stmt):
        if isinstance(item, While):
            yield item


def has_loops(stmt: Stmt) -> bool:
    return next(loops(stmt), None) is not None


def guarded_choices(stmt: Stmt) -> Iterator[GuardedChoice]:
    for item in walk(stmt):
        if isinstance(item, GuardedChoice):
            yield item
