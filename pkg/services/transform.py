"""Guard strengthening, the implements relation and determinization."""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from models.domain import FiniteDomain, ProgState
from models.expressions import And, Expr, Implies, Not, Or
from models.program import (
    Assign, GuardedChoice, IfElse, ProbChoice, Seq, Skip, Stmt, UniformAssign, While,
)
from services.algebra import cmp_guard, pred_entails, satisfying_state, simplify_pred, valid_on_domain
from services.printer import print_pred
from services.wp import Transformer, wpre

logger = logging.getLogger(__name__)


class Comparison(str, Enum):
    LE = "le"
    GE = "ge"

    def flipped(self) -> "Comparison":
        return Comparison.GE if self is Comparison.LE else Comparison.LE


def trans(direction: Comparison, kind: Transformer, program: Stmt, post: Expr) -> Stmt:
    """Strengthen every guarded choice so only branches optimal for ``post`` stay enabled.

    A guard ``g1`` becomes ``g1 && (g2 ==> wpcmp(dir, A, B))`` where ``A`` and
    ``B`` are the branch preexpectations; symmetrically for ``g2``.
    """
    direction, kind = Comparison(direction), Transformer(kind)
    if isinstance(program, (Skip, Assign, UniformAssign)):
        return program
    if isinstance(program, Seq):
        second = trans(direction, kind, program.second, post)
        first = trans(direction, kind, program.first, wpre(kind, program.second, post))
        return Seq(first, second)
    if isinstance(program, GuardedChoice):
        left_value = wpre(kind, program.left, post)
        right_value = wpre(kind, program.right, post)
        guard1 = And(program.guard1, Implies(program.guard2, cmp_guard(left_value, right_value, direction.value)))
        guard2 = And(program.guard2, Implies(program.guard1, cmp_guard(right_value, left_value, direction.value)))
        return GuardedChoice(
            guard1, trans(direction, kind, program.left, post),
            guard2, trans(direction, kind, program.right, post),
        )
    if isinstance(program, ProbChoice):
        return ProbChoice(trans(direction, kind, program.left, post), program.prob,
                          trans(direction, kind, program.right, post))
    if isinstance(program, IfElse):
        return IfElse(program.guard, trans(direction, kind, program.then, post),
                      trans(direction, kind, program.orelse, post))
    if isinstance(program, While):
        return While(program.guard, trans(direction, kind, program.body, program.invariant),
                     program.invariant, program.line)
    raise TypeError(f"unsupported statement {type(program).__name__}")


def dtrans(program: Stmt, post: Expr) -> Stmt:
    return trans(Comparison.LE, Transformer.DWP, program, post)


def atrans(program: Stmt, post: Expr) -> Stmt:
    return trans(Comparison.GE, Transformer.AWP, program, post)


def map_guards(program: Stmt, fn) -> Stmt:
    """Rebuild ``program`` with ``fn(guard1, guard2) -> (guard1, guard2)`` applied to every guarded choice."""
    if isinstance(program, GuardedChoice):
        guard1, guard2 = fn(program.guard1, program.guard2)
        return GuardedChoice(guard1, map_guards(program.left, fn), guard2, map_guards(program.right, fn))
    if isinstance(program, Seq):
        return Seq(map_guards(program.first, fn), map_guards(program.second, fn))
    if isinstance(program, ProbChoice):
        return ProbChoice(map_guards(program.left, fn), program.prob, map_guards(program.right, fn))
    if isinstance(program, IfElse):
        return IfElse(program.guard, map_guards(program.then, fn), map_guards(program.orelse, fn))
    if isinstance(program, While):
        return While(program.guard, map_guards(program.body, fn), program.invariant, program.line)
    return program


def simplify_guards(program: Stmt) -> Stmt:
    """Display form of a transformed program; comparison guards are simplified where possible."""
    return map_guards(program, lambda g1, g2: (simplify_pred(g1), simplify_pred(g2)))


def determinize(program: Stmt, bias: str = "left") -> Stmt:
    """Break ties between simultaneously enabled branches.

    ``left`` keeps the first branch (``g2`` becomes ``g2 && !g1``); ``right``
    keeps the second.
    """
    if bias == "left":
        return map_guards(program, lambda g1, g2: (g1, And(g2, Not(g1))))
    if bias == "right":
        return map_guards(program, lambda g1, g2: (And(g1, Not(g2)), g2))
    raise ValueError(f"bias must be 'left' or 'right', not {bias!r}")


@dataclass
class ImplementsReport:
    holds: bool
    locus: str = ""
    reason: str = ""
    counterexample: Optional[ProgState] = None
    choices_checked: int = 0

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> Dict[str, Any]:
        return {
            "holds": self.holds,
            "locus": self.locus or None,
            "reason": self.reason or None,
            "counterexample": self.counterexample.to_dict() if self.counterexample is not None else None,
            "choices_checked": self.choices_checked,
        }


class _Mismatch(Exception):
    def __init__(self, locus: str, reason: str, state: Optional[ProgState] = None):
        super().__init__(reason)
        self.locus = locus
        self.reason = reason
        self.state = state


class _ImplementsChecker:
    def __init__(self, domain: FiniteDomain):
        self.domain = domain
        self.choices = 0

    def check(self, refined: Stmt, original: Stmt, locus: str) -> None:
        if type(refined) is not type(original):
            raise _Mismatch(locus, f"{type(refined).__name__} where the original has {type(original).__name__}")
        if isinstance(original, (Skip, Assign, UniformAssign)):
            if refined != original:
                raise _Mismatch(locus, "statements differ")
        elif isinstance(original, Seq):
            self.check(refined.first, original.first, f"{locus}.first")
            self.check(refined.second, original.second, f"{locus}.second")
        elif isinstance(original, ProbChoice):
            if refined.prob != original.prob:
                raise _Mismatch(locus, "probabilities differ")
            self.check(refined.left, original.left, f"{locus}.left")
            self.check(refined.right, original.right, f"{locus}.right")
        elif isinstance(original, IfElse):
            if refined.guard != original.guard:
                raise _Mismatch(locus, "conditions differ")
            self.check(refined.then, original.then, f"{locus}.then")
            self.check(refined.orelse, original.orelse, f"{locus}.else")
        elif isinstance(original, While):
            if refined.guard != original.guard:
                raise _Mismatch(locus, "loop guards differ")
            self.check(refined.body, original.body, f"{locus}.body")
        elif isinstance(original, GuardedChoice):
            self.choices += 1
            for index, (mine, theirs) in enumerate(((refined.guard1, original.guard1),
                                                    (refined.guard2, original.guard2)), start=1):
                report = pred_entails(mine, theirs, self.domain, respect_init=False)
                if not report.holds:
                    raise _Mismatch(locus, f"guard {index} is not a strengthening", report.counterexample)
            report = valid_on_domain(Or(refined.guard1, refined.guard2), self.domain, respect_init=False)
            if not report.holds:
                raise _Mismatch(locus, "no guard enabled", report.counterexample)
            self.check(refined.left, original.left, f"{locus}.left")
            self.check(refined.right, original.right, f"{locus}.right")
        else:
            raise TypeError(f"unsupported statement {type(original).__name__}")


def implements(refined: Stmt, original: Stmt, domain: FiniteDomain) -> ImplementsReport:
    """Does ``refined`` only strengthen guards of ``original`` while keeping some guard enabled?"""
    checker = _ImplementsChecker(domain)
    try:
        checker.check(refined, original, "program")
    except _Mismatch as mismatch:
        logger.debug(f"implements fails at {mismatch.locus}: {mismatch.reason}")
        return ImplementsReport(False, mismatch.locus, mismatch.reason, mismatch.state, checker.choices)
    return ImplementsReport(True, choices_checked=checker.choices)


@dataclass
class DeterminismReport:
    holds: bool
    witness: Optional[ProgState] = None
    guards: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> Dict[str, Any]:
        return {
            "holds": self.holds,
            "witness": self.witness.to_dict() if self.witness is not None else None,
            "guards": list(self.guards),
        }


def _choices(program: Stmt, locus: str = "program"):
    if isinstance(program, GuardedChoice):
        yield locus, program
        yield from _choices(program.left, f"{locus}.left")
        yield from _choices(program.right, f"{locus}.right")
    elif isinstance(program, Seq):
        yield from _choices(program.first, f"{locus}.first")
        yield from _choices(program.second, f"{locus}.second")
    elif isinstance(program, ProbChoice):
        yield from _choices(program.left, f"{locus}.left")
        yield from _choices(program.right, f"{locus}.right")
    elif isinstance(program, IfElse):
        yield from _choices(program.then, f"{locus}.then")
        yield from _choices(program.orelse, f"{locus}.else")
    elif isinstance(program, While):
        yield from _choices(program.body, f"{locus}.body")


def is_deterministic(program: Stmt, domain: FiniteDomain) -> DeterminismReport:
    """No guarded choice has both guards true at a state of ``domain``."""
    for locus, choice in _choices(program):
        witness = satisfying_state(And(choice.guard1, choice.guard2), domain)
        if witness is not None:
            return DeterminismReport(False, witness, [print_pred(choice.guard1), print_pred(choice.guard2)])
    return DeterminismReport(True)


def disabled_branches(program: Stmt, domain: FiniteDomain) -> List[Dict[str, str]]:
    """Branches whose guard holds at no state of ``domain``."""
    found = []
    for locus, choice in _choices(program):
        for branch, guard in (("left", choice.guard1), ("right", choice.guard2)):
            if satisfying_state(guard, domain) is None:
                found.append({"locus": locus, "branch": branch, "guard": print_pred(simplify_pred(guard))})
    return found
