"""AST to canonical text. Output reparses to an equal tree."""
from typing import List

from models.domain import FiniteDomain, SourceFile
from models.expressions import (
    AbsDiff, Add, And, BoolConst, Ceil, Compare, Congruent, Const, Div, ExpCmp, Floor, GuardImp,
    Implies, Infinity, Iverson, Max, Min, Mod, Monus, Mul, Node, Not, Or, Pow, Var,
)
from models.program import (
    Assign, GuardedChoice, IfElse, ProbChoice, Seq, Skip, Stmt, UniformAssign, While,
)
from utils.helpers import format_value

INDENT = "  "

_SUM, _PRODUCT, _POWER, _ATOM = 1, 2, 3, 4
_BINARY = {
    Add: ("+", _SUM),
    Monus: ("-", _SUM),
    Mul: ("*", _PRODUCT),
    Div: ("/", _PRODUCT),
    Mod: ("%", _PRODUCT),
}
_FUNCTIONS = {Min: "min", Max: "max", AbsDiff: "absdiff"}

_IMPLIES, _OR, _AND, _NOT, _PATOM = 1, 2, 3, 4, 5


def _paren(text: str, needed: bool) -> str:
    return f"({text})" if needed else text


def print_expr(e: Node, level: int = 0) -> str:
    """Render an expectation; ``level`` is the binding strength the context requires."""
    kind = type(e)
    if kind is Const:
        return format_value(e.value)
    if kind is Infinity:
        return "infinity"
    if kind is Var:
        return e.name
    if kind in _BINARY:
        symbol, prec = _BINARY[kind]
        text = f"{print_expr(e.left, prec)} {symbol} {print_expr(e.right, prec + 1)}"
        return _paren(text, prec < level)
    if kind is Pow:
        text = f"{print_expr(e.base, _ATOM)}^{print_expr(e.exponent, _ATOM)}"
        return _paren(text, _POWER < level)
    if kind in _FUNCTIONS:
        return f"{_FUNCTIONS[kind]}({print_expr(e.left)}, {print_expr(e.right)})"
    if kind is Floor:
        return f"floor({print_expr(e.arg)})"
    if kind is Ceil:
        return f"ceil({print_expr(e.arg)})"
    if kind is Iverson:
        return f"[{print_pred(e.pred)}]"
    if kind is GuardImp:
        return f"imp({print_pred(e.pred)}, {print_expr(e.body)})"
    raise TypeError(f"not an expression: {kind.__name__}")


def print_pred(p: Node, level: int = 0) -> str:
    kind = type(p)
    if kind is BoolConst:
        return "true" if p.value else "false"
    if kind is Compare:
        return _paren(f"{print_expr(p.left)} {p.op} {print_expr(p.right)}", _PATOM < level)
    if kind is Congruent:
        return f"congr({print_expr(p.left)}, {print_expr(p.right)}, {print_expr(p.modulus)})"
    if kind is ExpCmp:
        return f"wpcmp({p.direction}, {print_expr(p.left)}, {print_expr(p.right)})"
    if kind is Not:
        return _paren(f"!{print_pred(p.arg, _PATOM + 1)}", _NOT < level)
    if kind is And:
        return _paren(f"{print_pred(p.left, _AND)} && {print_pred(p.right, _AND + 1)}", _AND < level)
    if kind is Or:
        return _paren(f"{print_pred(p.left, _OR)} || {print_pred(p.right, _OR + 1)}", _OR < level)
    if kind is Implies:
        return _paren(f"{print_pred(p.left, _IMPLIES + 1)} ==> {print_pred(p.right, _IMPLIES)}", _IMPLIES < level)
    raise TypeError(f"not a predicate: {kind.__name__}")


def _spine(stmt: Stmt) -> List[Stmt]:
    items = []
    while isinstance(stmt, Seq):
        items.append(stmt.first)
        stmt = stmt.second
    items.append(stmt)
    return items


def _block(stmt: Stmt, depth: int) -> str:
    inner = _statements(stmt, depth + 1)
    return "{\n" + inner + "\n" + INDENT * depth + "}"


def _statements(stmt: Stmt, depth: int) -> str:
    pad = INDENT * depth
    lines = []
    items = _spine(stmt)
    for index, item in enumerate(items):
        end = ";" if index < len(items) - 1 else ""
        lines.append(pad + _statement(item, depth) + end)
    return "\n".join(lines)


def _statement(stmt: Stmt, depth: int) -> str:
    if isinstance(stmt, Skip):
        return "skip"
    if isinstance(stmt, Assign):
        return f"{stmt.var} := {print_expr(stmt.expr)}"
    if isinstance(stmt, UniformAssign):
        return f"{stmt.var} := uniform({', '.join(print_expr(e) for e in stmt.exprs)})"
    if isinstance(stmt, Seq):
        # a left-nested sequence keeps its grouping as a bare block
        return _block(stmt, depth)
    if isinstance(stmt, ProbChoice):
        return f"{_block(stmt.left, depth)} [{print_expr(stmt.prob)}] {_block(stmt.right, depth)}"
    if isinstance(stmt, GuardedChoice):
        return (
            f"if {print_pred(stmt.guard1)} -> {_block(stmt.left, depth)}"
            f" [] {print_pred(stmt.guard2)} -> {_block(stmt.right, depth)} fi"
        )
    if isinstance(stmt, IfElse):
        return f"if {print_pred(stmt.guard)} {_block(stmt.then, depth)} else {_block(stmt.orelse, depth)}"
    if isinstance(stmt, While):
        return f"while {print_pred(stmt.guard)} inv {print_expr(stmt.invariant)} {_block(stmt.body, depth)}"
    raise TypeError(f"not a statement: {type(stmt).__name__}")


def print_statement(stmt: Stmt) -> str:
    return _statements(stmt, 0)


def print_domain(domain: FiniteDomain) -> List[str]:
    lines = []
    for name, values in domain.variables.items():
        contiguous = all(b - a == 1 for a, b in zip(values, values[1:]))
        if name in domain.sampled or not contiguous:
            rendered = ", ".join(format_value(v) for v in values)
            lines.append(f"domain {name} in {{{rendered}}};")
        else:
            lines.append(f"domain {name}: {format_value(values[0])}..{format_value(values[-1])};")
    if domain.init is not None:
        lines.append(f"init {print_pred(domain.init)};")
    return lines


def print_program(source) -> str:
    """Print a :class:`SourceFile` (or a bare statement) in canonical form."""
    if not isinstance(source, SourceFile):
        return print_statement(source)
    lines = print_domain(source.domain)
    if source.post is not None:
        lines.append(f"post {print_expr(source.post)};")
    if source.threshold is not None:
        lines.append(f"threshold {print_expr(source.threshold)};")
    if source.direction is not None:
        lines.append(f"direction {source.direction};")
    lines.append("program " + _block(source.program, 0))
    return "\n".join(lines) + "\n"
