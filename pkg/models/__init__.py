# Import the core types so they are available at package level
from .expressions import Expr, Pred
from .program import Stmt, While
from .domain import FiniteDomain, ProgState, SourceFile

__all__ = ['Expr', 'Pred', 'Stmt', 'While', 'FiniteDomain', 'ProgState', 'SourceFile']
