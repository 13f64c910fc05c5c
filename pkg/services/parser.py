"""Text to AST for ``.pgcl`` files, expectations and predicates."""
import logging
from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

from lark import Token, Transformer, v_args
from lark.exceptions import UnexpectedEOF, UnexpectedInput, VisitError

from extensions import get_parser
from models.domain import FiniteDomain, SourceFile
from models.expressions import (
    AbsDiff, Add, And, Ceil, Compare, Congruent, Const, Div, ExpCmp, Expr, FALSE, Floor, GuardImp,
    Implies, Infinity, Iverson, Max, Min, Mod, Monus, Mul, Not, Or, Pow, Pred, TRUE, Var,
    free_vars, is_arithmetic,
)
from models.program import (
    Assign, GuardedChoice, IfElse, ProbChoice, Skip, Stmt, UniformAssign, While, seq,
)
from utils.errors import InvalidArithmetic, MissingInvariant, ParseError, PgclError

logger = logging.getLogger(__name__)


def _arithmetic(expr: Expr, token: Token, what: str) -> Expr:
    if not is_arithmetic(expr):
        raise InvalidArithmetic(
            f"{what} must be an arithmetic expression (line {token.line}, column {token.column})",
            line=token.line,
            column=token.column,
        )
    return expr


@v_args(inline=True)
class PgclTransformer(Transformer):
    """Builds model nodes bottom-up from the lark parse tree."""

    # ---- declarations

    def domain_range(self, name, lo, hi):
        lo, hi = Fraction(str(lo)), Fraction(str(hi))
        if lo > hi:
            raise ParseError(f"empty range for '{name}'", name.line, name.column)
        values = []
        current = lo
        while current <= hi:
            values.append(current)
            current += 1
        return ("domain", name, tuple(values), False)

    def domain_set(self, name, *numbers):
        return ("domain", name, tuple(Fraction(str(n)) for n in numbers), True)

    def init_decl(self, pred):
        return ("init", pred)

    def post_decl(self, expr):
        return ("post", expr)

    def threshold_decl(self, expr):
        return ("threshold", expr)

    def direction_decl(self, name):
        if str(name) not in ("upper", "lower"):
            raise ParseError(f"direction must be 'upper' or 'lower', got '{name}'", name.line, name.column)
        return ("direction", str(name))

    def file(self, *items):
        *decls, program = items
        variables = {}
        sampled = set()
        settings = {}
        for decl in decls:
            if decl[0] == "domain":
                _, name, values, is_set = decl
                if str(name) in variables:
                    raise ParseError(f"variable '{name}' declared twice", name.line, name.column)
                variables[str(name)] = values
                if is_set:
                    sampled.add(str(name))
            else:
                settings[decl[0]] = decl[1]
        domain = FiniteDomain(variables, init=settings.get("init"), sampled=frozenset(sampled))
        return SourceFile(
            domain=domain,
            program=program,
            post=settings.get("post"),
            threshold=settings.get("threshold"),
            direction=settings.get("direction"),
        )

    def expectation(self, expr):
        return expr

    def predicate(self, pred):
        return pred

    # ---- statements

    def stmts(self, *statements):
        return seq(statements)

    def skip(self):
        return Skip()

    def assign(self, name, expr):
        return Assign(str(name), _arithmetic(expr, name, f"right-hand side of '{name}'"))

    def uniform(self, name, *exprs):
        return UniformAssign(str(name), tuple(_arithmetic(e, name, f"uniform alternative for '{name}'") for e in exprs))

    def pchoice(self, left, prob, right):
        if not is_arithmetic(prob):
            raise InvalidArithmetic("probability must be an arithmetic expression")
        return ProbChoice(left, prob, right)

    def gchoice(self, guard1, left, guard2, right):
        return GuardedChoice(guard1, left, guard2, right)

    def ifelse(self, guard, then, orelse):
        return IfElse(guard, then, orelse)

    def while_(self, keyword, guard, invariant, body):
        return While(guard, body, invariant, line=keyword.line)

    def while_missing(self, keyword, guard, body):
        raise MissingInvariant("loop without 'inv' annotation", keyword.line, keyword.column)

    # ---- expressions

    def number(self, token):
        try:
            return Const(Fraction(str(token)))
        except ZeroDivisionError:
            raise ParseError(f"zero denominator in literal '{token}'", token.line, token.column) from None

    def infinity(self):
        return Infinity()

    def var(self, token):
        return Var(str(token))

    def iverson(self, pred):
        return Iverson(pred)

    def add(self, a, b):
        return Add(a, b)

    def monus(self, a, b):
        return Monus(a, b)

    def mul(self, a, b):
        return Mul(a, b)

    def div(self, a, b):
        return Div(a, b)

    def mod(self, a, b):
        return Mod(a, b)

    def pow(self, a, b):
        return Pow(a, b)

    def min_(self, a, b):
        return Min(a, b)

    def max_(self, a, b):
        return Max(a, b)

    def imp(self, pred, body):
        return GuardImp(pred, body)

    def floor(self, a):
        return Floor(a)

    def ceil(self, a):
        return Ceil(a)

    def absdiff(self, a, b):
        return AbsDiff(a, b)

    # ---- predicates

    def true(self):
        return TRUE

    def false(self):
        return FALSE

    def compare(self, left, op, right):
        return Compare(str(op), left, right)

    def congr(self, left, right, modulus):
        return Congruent(left, right, modulus)

    def wpcmp(self, direction, left, right):
        if str(direction) not in ("le", "ge"):
            raise ParseError(f"wpcmp direction must be 'le' or 'ge', got '{direction}'", direction.line, direction.column)
        return ExpCmp(str(direction), left, right)

    def implies(self, a, b):
        return Implies(a, b)

    def or_(self, a, b):
        return Or(a, b)

    def and_(self, a, b):
        return And(a, b)

    def not_(self, a):
        return Not(a)


def _parse(text: str, start: str):
    try:
        tree = get_parser().parse(text, start=start)
    except UnexpectedEOF as exc:
        raise ParseError("unexpected end of input") from exc
    except UnexpectedInput as exc:
        raise ParseError(f"syntax error near {exc.get_context(text, span=20).splitlines()[0]!r}",
                         exc.line, exc.column) from exc
    try:
        return PgclTransformer().transform(tree)
    except VisitError as exc:
        if isinstance(exc.orig_exc, PgclError):
            raise exc.orig_exc from None
        raise ParseError(f"invalid {exc.rule}: {exc.orig_exc}") from exc.orig_exc


def parse_program(text: str, path: Optional[str] = None) -> SourceFile:
    """Parse a complete file: domains, optional settings and the program body.

    Raises:
        ParseError: on a syntax error (with line and column).
        MissingInvariant: when a loop lacks its ``inv`` annotation.
        UndeclaredVariable: when a variable has no domain declaration.
    """
    source = _parse(text, "file")
    source.path = path
    domain = source.domain
    domain.require(free_vars(source.program), "program")
    for where, node in (("init", domain.init), ("post", source.post), ("threshold", source.threshold)):
        if node is not None:
            domain.require(free_vars(node), where)
    logger.info(f"Parsed {path or '<text>'}: {len(domain.variables)} variables, {domain.size} states")
    return source


def parse_expectation(text: str, domain: Optional[FiniteDomain] = None) -> Expr:
    expr = _parse(text, "expectation")
    if domain is not None:
        domain.require(free_vars(expr), "expectation")
    return expr


def parse_predicate(text: str, domain: Optional[FiniteDomain] = None) -> Pred:
    pred = _parse(text, "predicate")
    if domain is not None:
        domain.require(free_vars(pred), "predicate")
    return pred


def parse_statement(text: str) -> Stmt:
    """Parse a bare program body (``{ ... }`` optional) without declarations."""
    return _parse("program {" + text.strip() + "}", "file").program


def load_file(path: Union[str, Path]) -> SourceFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_program(text, path=str(path))
