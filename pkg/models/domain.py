"""Finite variable domains, program states and parsed source files."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, Iterator, Mapping, Optional, Tuple

from models.expressions import Expr, Pred, Value, eval_pred
from models.program import Stmt
from utils.errors import EvaluationError, UndeclaredVariable


class ProgState(Mapping):
    """Immutable, hashable assignment of values to variables.

    Iteration follows the insertion order of the variables, which for states
    produced by :class:`FiniteDomain` is the declaration order.
    """

    __slots__ = ("_data", "_key")

    def __init__(self, data: Mapping[str, Value]):
        self._data = dict(data)
        self._key = tuple(self._data.items())

    def __getitem__(self, name: str) -> Value:
        return self._data[name]

    def __iter__(self):
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __hash__(self) -> int:
        return hash(self._key)

    def __eq__(self, other) -> bool:
        if isinstance(other, ProgState):
            return self._key == other._key
        if isinstance(other, Mapping):
            return self._data == dict(other)
        return NotImplemented

    def set(self, name: str, value: Value) -> "ProgState":
        data = dict(self._data)
        data[name] = value
        return ProgState(data)

    def to_dict(self) -> Dict[str, str]:
        from utils.helpers import format_value

        return {name: format_value(value) for name, value in self._data.items()}

    def __repr__(self) -> str:
        inner = ", ".join(f"{name}: {value}" for name, value in self.to_dict().items())
        return "{" + inner + "}"


@dataclass
class FiniteDomain:
    """Declared finite value set per variable plus an optional initial-state filter.

    ``sampled`` names the variables declared as explicit value sets rather
    than ranges; checks over them only cover the listed samples.
    """

    variables: Dict[str, Tuple[Fraction, ...]]
    init: Optional[Pred] = None
    sampled: FrozenSet[str] = frozenset()

    def __post_init__(self):
        self.variables = {name: tuple(sorted(set(map(Fraction, values)))) for name, values in self.variables.items()}
        self._value_sets = {name: frozenset(values) for name, values in self.variables.items()}

    @classmethod
    def of(cls, init: Optional[Pred] = None, sampled: Iterable[str] = (), **ranges) -> "FiniteDomain":
        """Shorthand used by tests: ``FiniteDomain.of(c=range(2), x=range(11))``."""
        return cls({name: tuple(values) for name, values in ranges.items()}, init=init, sampled=frozenset(sampled))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(self.variables)

    @property
    def size(self) -> int:
        total = 1
        for values in self.variables.values():
            total *= len(values)
        return total

    @property
    def is_sampled(self) -> bool:
        return bool(self.sampled)

    def contains(self, name: str, value: Value) -> bool:
        return value in self._value_sets.get(name, ())

    def require(self, names: Iterable[str], where: str = "program") -> None:
        missing = sorted(set(names) - set(self.variables))
        if missing:
            raise UndeclaredVariable(f"variable(s) {', '.join(missing)} used in {where} without a domain declaration")

    def states(self, respect_init: bool = False) -> Iterator[ProgState]:
        """Enumerate states; first declared variable outermost, values ascending."""
        names = self.names
        for values in itertools.product(*(self.variables[name] for name in names)):
            state = ProgState(zip(names, values))
            if respect_init and self.init is not None:
                try:
                    if not eval_pred(self.init, state):
                        continue
                except EvaluationError as exc:
                    raise exc.at(state)
            yield state

    def initial_states(self) -> Iterator[ProgState]:
        return self.states(respect_init=True)

    def describe(self) -> Dict[str, object]:
        return {
            "variables": {name: len(values) for name, values in self.variables.items()},
            "size": self.size,
            "sampled": sorted(self.sampled),
        }


@dataclass
class SourceFile:
    """A parsed ``.pgcl`` file."""

    domain: FiniteDomain
    program: Stmt
    post: Optional[Expr] = None
    threshold: Optional[Expr] = None
    direction: Optional[str] = None
    path: Optional[str] = field(default=None, compare=False)
