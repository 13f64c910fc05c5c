"""Exception hierarchy shared by the services, the CLI and the HTTP API."""
from typing import Any, Dict, Optional


class PgclError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = 3
    kind = "error"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def to_dict(self) -> Dict[str, Any]:
        payload = {"error": self.message, "kind": type(self).__name__}
        for key, value in self.context.items():
            payload[key] = value if isinstance(value, (int, str, bool)) or value is None else str(value)
        return payload


class UsageError(PgclError):
    exit_code = 2


class ResourceError(PgclError):
    exit_code = 3


class AnalysisError(PgclError):
    exit_code = 1


class ParseError(UsageError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}", line=line, column=column)
        self.line = line
        self.column = column


class MissingInvariant(ParseError):
    pass


class UndeclaredVariable(UsageError):
    pass


class InvalidArithmetic(UsageError):
    pass


class EmptyUniform(UsageError):
    pass


class PairingMismatch(UsageError):
    pass


class LoopPresent(UsageError):
    pass


class EvaluationError(ResourceError):
    def __init__(self, message: str, state: Optional[Any] = None):
        super().__init__(message, state=state)
        self.state = state

    def at(self, state: Any) -> "EvaluationError":
        """Return a copy of this error pinned to the state being enumerated."""
        if self.state is not None:
            return self
        return type(self)(f"{self.message} at {state}", state=state)


class ProbabilityOutOfRange(EvaluationError):
    pass


class DomainEscape(ResourceError):
    def __init__(self, message: str, state: Any = None, statement: Any = None):
        super().__init__(message, state=state, statement=statement)
        self.state = state
        self.statement = statement


class BudgetExceeded(ResourceError):
    pass


class GuardsNotExhaustive(ResourceError):
    pass


class EmbeddingMismatch(AnalysisError):
    pass


class ShapeNotRecognized(AnalysisError):
    pass
