"""Operational MDP of a pGCL program and its reachability-reward values.

Configurations pair a control (a residual statement, or one of the
``TERMINATED``/``ESCAPED`` sentinels) with a program state. Exploration is
breadth-first from the initial configurations, so state indices are
reproducible. Values are computed per strongly connected component in reverse
topological order: trivial components get an exact rational backup, cyclic
ones are solved by float value iteration from below and flagged inexact,
except where reachability alone already decides the value.
"""
import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from functools import cached_property
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Set, Tuple, Union

import networkx as nx

from models.domain import FiniteDomain, ProgState
from models.expressions import (
    INFINITY, Expr, Value, evaluator, value_add, value_mul,
)
from models.program import (
    Assign, GuardedChoice, IfElse, ProbChoice, Seq, Skip, Stmt, UniformAssign, While, desugar,
)
from utils.errors import (
    BudgetExceeded, DomainEscape, EmbeddingMismatch, EvaluationError, GuardsNotExhaustive,
    ProbabilityOutOfRange,
)
from utils.helpers import format_value

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 200000
DEFAULT_EPSILON = 1e-9
DEFAULT_MAX_ITERATIONS = 1000000


class _Sentinel:
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name


TERMINATED = _Sentinel("terminated")
ESCAPED = _Sentinel("escaped")

Control = Union[Stmt, _Sentinel]


class Configuration(NamedTuple):
    control: Control
    state: ProgState


class Action(IntEnum):
    TAU = 0
    ALPHA = 1
    BETA = 2

    @property
    def label(self) -> str:
        return self.name.lower()


class Branch(NamedTuple):
    action: Action
    prob: Fraction
    control: Control
    state: ProgState


ONE = Fraction(1)


class _Stepper:
    """One-step successor relation of the operational semantics."""

    def __init__(self, domain: FiniteDomain, escape: str = "error"):
        if escape not in ("error", "stop"):
            raise ValueError(f"unknown escape mode {escape!r}")
        self.domain = domain
        self.escape = escape

    def branches(self, control: Control, state: ProgState) -> List[Branch]:
        """Unmerged successors of ``(control, state)`` in rule order."""
        if isinstance(control, _Sentinel):
            return [Branch(Action.TAU, ONE, control, state)]
        try:
            return self._step(control, state)
        except EvaluationError as exc:
            raise exc.at(state)

    def _step(self, stmt: Stmt, state: ProgState) -> List[Branch]:
        if isinstance(stmt, Skip):
            return [Branch(Action.TAU, ONE, TERMINATED, state)]
        if isinstance(stmt, Assign):
            value = evaluator(stmt.expr)(state)
            successor = state.set(stmt.var, value)
            if not self.domain.contains(stmt.var, value):
                if self.escape == "stop":
                    return [Branch(Action.TAU, ONE, ESCAPED, successor)]
                from services.printer import print_statement

                raise DomainEscape(
                    f"'{print_statement(stmt)}' leaves the domain of '{stmt.var}' at {state} "
                    f"(value {format_value(value)})",
                    state=state,
                    statement=print_statement(stmt),
                )
            return [Branch(Action.TAU, ONE, TERMINATED, successor)]
        if isinstance(stmt, Seq):
            result = []
            for branch in self._step(stmt.first, state):
                if branch.control is TERMINATED:
                    control = stmt.second
                elif branch.control is ESCAPED:
                    control = ESCAPED
                else:
                    control = Seq(branch.control, stmt.second)
                result.append(Branch(branch.action, branch.prob, control, branch.state))
            return result
        if isinstance(stmt, GuardedChoice):
            result = []
            if evaluator(stmt.guard1)(state):
                result.append(Branch(Action.ALPHA, ONE, stmt.left, state))
            if evaluator(stmt.guard2)(state):
                result.append(Branch(Action.BETA, ONE, stmt.right, state))
            if not result:
                raise GuardsNotExhaustive(f"no guard of a guarded choice holds at {state}", state=state)
            return result
        if isinstance(stmt, ProbChoice):
            p = evaluator(stmt.prob)(state)
            if not 0 <= p <= 1:
                raise ProbabilityOutOfRange(f"probability evaluates to {format_value(p)} at {state}", state=state)
            return [Branch(Action.TAU, p, stmt.left, state), Branch(Action.TAU, ONE - p, stmt.right, state)]
        if isinstance(stmt, While):
            if evaluator(stmt.guard)(state):
                return [Branch(Action.TAU, ONE, Seq(stmt.body, stmt), state)]
            return [Branch(Action.TAU, ONE, TERMINATED, state)]
        if isinstance(stmt, (IfElse, UniformAssign)):
            return self._step(desugar(stmt), state)
        raise TypeError(f"unsupported statement {type(stmt).__name__}")


Transitions = Dict[Action, List[Tuple[int, Fraction]]]


@dataclass
class OperationalMdp:
    configurations: List[Configuration]
    index: Dict[Configuration, int]
    initial: List[int]
    transitions: List[Transitions]
    domain: FiniteDomain
    program: Stmt
    escape: str = "error"

    @property
    def size(self) -> int:
        return len(self.configurations)

    @cached_property
    def targets(self) -> Set[int]:
        return {i for i, c in enumerate(self.configurations) if c.control is TERMINATED}

    @cached_property
    def escaped(self) -> Set[int]:
        return {i for i, c in enumerate(self.configurations) if c.control is ESCAPED}

    @cached_property
    def stopping(self) -> Set[int]:
        return self.targets | self.escaped

    def enabled(self, s: int) -> List[Action]:
        return sorted(self.transitions[s])

    @cached_property
    def graph(self) -> nx.DiGraph:
        """Successor graph without the self-loops of stopping configurations."""
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.size))
        stopping = self.stopping
        for s, actions in enumerate(self.transitions):
            if s in stopping:
                continue
            for successors in actions.values():
                graph.add_edges_from((s, t) for t, _ in successors)
        return graph

    @property
    def is_acyclic(self) -> bool:
        return nx.is_directed_acyclic_graph(self.graph)

    @property
    def transition_count(self) -> int:
        return sum(len(successors) for actions in self.transitions for successors in actions.values())

    def restrict(self, allowed: Dict[int, Set[Action]]) -> "OperationalMdp":
        """Same configurations; states listed in ``allowed`` keep only those actions."""
        transitions = []
        for s, actions in enumerate(self.transitions):
            keep = allowed.get(s)
            transitions.append(actions if keep is None else {a: v for a, v in actions.items() if a in keep})
        return OperationalMdp(self.configurations, self.index, self.initial, transitions,
                              self.domain, self.program, self.escape)

    def describe(self) -> Dict[str, object]:
        return {
            "states": self.size,
            "initial": len(self.initial),
            "transitions": self.transition_count,
            "terminated": len(self.targets),
            "escaped": len(self.escaped),
            "acyclic": self.is_acyclic,
        }


def build_mdp(
    program: Stmt,
    domain: FiniteDomain,
    budget: int = DEFAULT_BUDGET,
    escape: str = "error",
    initial_states: Optional[Iterable[ProgState]] = None,
) -> OperationalMdp:
    """Explore the configuration space reachable from ``(program, s)``.

    ``initial_states`` defaults to the domain states passing the init filter.

    Raises:
        DomainEscape: an assignment leaves the domain and ``escape`` is ``"error"``.
        BudgetExceeded: more than ``budget`` configurations are reachable.
        ProbabilityOutOfRange, GuardsNotExhaustive, EvaluationError
    """
    program = desugar(program)
    stepper = _Stepper(domain, escape)
    configurations: List[Configuration] = []
    index: Dict[Configuration, int] = {}
    transitions: List[Transitions] = []
    queue = deque()

    def intern(config: Configuration) -> int:
        found = index.get(config)
        if found is None:
            if len(configurations) >= budget:
                raise BudgetExceeded(f"more than {budget} configurations reachable; raise the state budget")
            found = len(configurations)
            index[config] = found
            configurations.append(config)
            transitions.append({})
            queue.append(found)
        return found

    states = domain.initial_states() if initial_states is None else initial_states
    initial = [intern(Configuration(program, state)) for state in states]
    initial = list(dict.fromkeys(initial))

    while queue:
        s = queue.popleft()
        config = configurations[s]
        merged: Dict[Action, Dict[int, Fraction]] = {}
        for branch in stepper.branches(config.control, config.state):
            if branch.prob == 0:
                continue
            t = intern(Configuration(branch.control, branch.state))
            targets = merged.setdefault(branch.action, {})
            targets[t] = targets.get(t, Fraction(0)) + branch.prob
        transitions[s] = {a: sorted(targets.items()) for a, targets in sorted(merged.items())}

    mdp = OperationalMdp(configurations, index, initial, transitions, domain, program, escape)
    logger.info(f"Built MDP: {mdp.size} configurations from {len(initial)} initial states")
    if mdp.escaped:
        logger.warning(f"{len(mdp.escaped)} configurations escaped the declared domain")
    return mdp


def conservation_violations(mdp: OperationalMdp) -> List[Tuple[int, Action, Fraction]]:
    """Enabled actions whose outgoing probabilities do not sum to exactly 1."""
    violations = []
    for s, actions in enumerate(mdp.transitions):
        for action, successors in actions.items():
            total = sum((p for _, p in successors), Fraction(0))
            if total != 1:
                violations.append((s, action, total))
    return violations


# ---------------------------------------------------------------------------
# Qualitative analysis
# ---------------------------------------------------------------------------

def avoid_forever(mdp: OperationalMdp) -> Set[int]:
    """States from which some strategy never reaches a stopping configuration."""
    stopping = mdp.stopping
    alive = {s for s in range(mdp.size) if s not in stopping}
    outside: Dict[Tuple[int, Action], int] = {}
    live_actions: Dict[int, int] = {}
    predecessors: Dict[int, List[Tuple[int, Action]]] = defaultdict(list)
    queue = deque()
    for s in alive:
        live = 0
        for action, successors in mdp.transitions[s].items():
            count = sum(1 for t, _ in successors if t not in alive)
            outside[(s, action)] = count
            for t, _ in successors:
                predecessors[t].append((s, action))
            if count == 0:
                live += 1
        live_actions[s] = live
        if live == 0:
            queue.append(s)
    while queue:
        s = queue.popleft()
        if s not in alive:
            continue
        alive.discard(s)
        for p, action in predecessors[s]:
            if p not in alive:
                continue
            outside[(p, action)] += 1
            if outside[(p, action)] == 1:
                live_actions[p] -= 1
                if live_actions[p] == 0:
                    queue.append(p)
    return alive


def _backward_closure(mdp: OperationalMdp, seeds: Set[int]) -> Set[int]:
    reached = set(seeds)
    queue = deque(seeds)
    graph = mdp.graph
    while queue:
        t = queue.popleft()
        for s in graph.predecessors(t):
            if s not in reached:
                reached.add(s)
                queue.append(s)
    return reached


def may_not_stop(mdp: OperationalMdp) -> Set[int]:
    """States whose minimal probability of stopping is below 1."""
    return _backward_closure(mdp, avoid_forever(mdp))


def surely_stoppable(mdp: OperationalMdp) -> Set[int]:
    """States from which some strategy stops with probability 1."""
    candidates = set(range(mdp.size))
    while True:
        safe = {
            s: [a for a, succ in mdp.transitions[s].items() if all(t in candidates for t, _ in succ)]
            for s in candidates if s not in mdp.stopping
        }
        reached = {s for s in mdp.stopping if s in candidates}
        queue = deque(reached)
        while queue:
            t = queue.popleft()
            for s in mdp.graph.predecessors(t):
                if s in reached or s not in safe:
                    continue
                if any(any(u == t for u, _ in mdp.transitions[s][a]) for a in safe[s]):
                    reached.add(s)
                    queue.append(s)
        if reached == candidates:
            return reached
        candidates = reached


# ---------------------------------------------------------------------------
# Quantitative analysis
# ---------------------------------------------------------------------------

@dataclass
class ValueResult:
    """Optimal values of an MDP objective.

    ``values`` holds the initial configurations' values keyed by their state;
    ``all_values`` is indexed like the MDP's configurations. ``inexact`` lists
    the configurations solved by value iteration; every other value comes from
    rational backups or a qualitative decision. ``exact`` is true iff no
    initial configuration is inexact.
    """

    values: Dict[ProgState, Value]
    all_values: List[Value]
    exact: bool
    epsilon: float
    iterations: int = 0
    escape_mass: Dict[ProgState, Value] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    inexact: Set[int] = field(default_factory=set)
    initial_exact: Dict[ProgState, bool] = field(default_factory=dict)

    def is_exact(self, state: ProgState) -> bool:
        return self.initial_exact.get(state, self.exact)

    def to_dict(self) -> Dict[str, object]:
        rows = []
        for state, value in self.values.items():
            row = {"state": state.to_dict(), "value": format_value(value)}
            if not self.exact:
                row["exact"] = self.is_exact(state)
            if self.escape_mass:
                row["escape_mass"] = format_value(self.escape_mass.get(state, 0))
            rows.append(row)
        return {
            "values": rows,
            "exact": self.exact,
            "epsilon": None if self.exact else self.epsilon,
            "iterations": self.iterations,
            "warnings": list(self.warnings),
        }


def _better(mode: str) -> Callable[[Value, Value], bool]:
    return (lambda a, b: a < b) if mode == "min" else (lambda a, b: a > b)


def _solve(
    mdp: OperationalMdp,
    stop_values: Callable[[int], Value],
    mode: str,
    step_reward: Value = Fraction(0),
    epsilon: float = DEFAULT_EPSILON,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    fixed: Optional[Dict[int, Value]] = None,
    actions_of: Optional[Callable[[int], Iterable[Action]]] = None,
) -> Tuple[List[Value], Set[int], int, List[str]]:
    """Values of every configuration plus the configurations solved by iteration."""
    if mode not in ("min", "max"):
        raise ValueError(f"mode must be 'min' or 'max', not {mode!r}")
    better = _better(mode)
    fixed = fixed or {}
    actions_of = actions_of or (lambda s: mdp.transitions[s].keys())
    values: List[Value] = [Fraction(0)] * mdp.size
    stopping = mdp.stopping
    approximate: Set[int] = set()
    iterations = 0
    warnings: List[str] = []

    def backup(s: int) -> Value:
        best = None
        for action in actions_of(s):
            total = step_reward
            for t, p in mdp.transitions[s][action]:
                total = value_add(total, value_mul(p, values[t]))
            if best is None or better(total, best):
                best = total
        return Fraction(0) if best is None else best

    graph = mdp.graph
    condensed = nx.condensation(graph)
    for component in reversed(list(nx.topological_sort(condensed))):
        members = sorted(condensed.nodes[component]["members"])
        if len(members) == 1 and not graph.has_edge(members[0], members[0]):
            s = members[0]
            if s in fixed:
                values[s] = fixed[s]
            elif s in stopping:
                values[s] = stop_values(s)
            else:
                values[s] = backup(s)
            continue
        # cyclic component: Gauss-Seidel value iteration from below
        active = [s for s in members if s not in fixed]
        approximate.update(active)
        for s in members:
            values[s] = fixed.get(s, 0.0)
        converged = False
        for sweep in range(1, max_iterations + 1):
            delta = 0.0
            for s in active:
                new = backup(s)
                new = new if new == INFINITY else float(new)
                old = values[s]
                if new != old:
                    delta = max(delta, INFINITY if INFINITY in (new, old) else abs(new - old))
                values[s] = new
            iterations = max(iterations, sweep)
            if delta < epsilon:
                converged = True
                break
        if not converged:
            message = f"value iteration stopped after {max_iterations} sweeps without reaching epsilon={epsilon}"
            logger.warning(message)
            warnings.append(message)
    return values, approximate, iterations, warnings


def _initial_values(mdp: OperationalMdp, values: List[Value]) -> Dict[ProgState, Value]:
    return {mdp.configurations[s].state: values[s] for s in mdp.initial}


def _result(mdp: OperationalMdp, values: List[Value], approximate: Set[int], epsilon: float,
            iterations: int, warnings: List[str]) -> ValueResult:
    initial_exact = {mdp.configurations[s].state: s not in approximate for s in mdp.initial}
    return ValueResult(
        _initial_values(mdp, values), values, all(initial_exact.values()), epsilon, iterations,
        warnings=warnings, inexact=approximate, initial_exact=initial_exact,
    )


def _qualitative_rewards(mdp: OperationalMdp, stop_values: Dict[int, Value], mode: str) -> Dict[int, Value]:
    """Values decided by graph reachability alone.

    Configurations that cannot reach a stopping configuration with nonzero
    reward are worth 0 under every strategy; in max mode, reaching an infinite
    reward with positive probability makes the value infinite.
    """
    rewarding = {s for s, v in stop_values.items() if v != 0}
    reachable = _backward_closure(mdp, rewarding)
    decided: Dict[int, Value] = {s: Fraction(0) for s in range(mdp.size) if s not in reachable}
    if mode == "max":
        unbounded = {s for s, v in stop_values.items() if v == INFINITY}
        decided.update((s, INFINITY) for s in _backward_closure(mdp, unbounded))
    return decided


def expected_reward(
    mdp: OperationalMdp,
    post: Expr,
    mode: str,
    epsilon: float = DEFAULT_EPSILON,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    escape_reward: Optional[Expr] = None,
) -> ValueResult:
    """Minimal or maximal expected ``post`` upon termination.

    Escaped configurations earn ``escape_reward`` (0 when omitted); their
    maximal probability is reported as ``escape_mass``.
    """
    reward = evaluator(post)
    escape_value = evaluator(escape_reward) if escape_reward is not None else None

    def stop_value(s: int) -> Value:
        config = mdp.configurations[s]
        try:
            if config.control is TERMINATED:
                return reward(config.state)
            return escape_value(config.state) if escape_value is not None else Fraction(0)
        except EvaluationError as exc:
            raise exc.at(config.state)

    stop_values = {s: stop_value(s) for s in sorted(mdp.stopping)}
    values, approximate, iterations, warnings = _solve(
        mdp, stop_values.__getitem__, mode, epsilon=epsilon, max_iterations=max_iterations,
        fixed=_qualitative_rewards(mdp, stop_values, mode),
    )
    result = _result(mdp, values, approximate, epsilon, iterations, warnings)
    if mdp.escaped:
        escaped = mdp.escaped
        mass, _, _, _ = _solve(
            mdp, lambda s: Fraction(1) if s in escaped else Fraction(0), "max",
            epsilon=epsilon, max_iterations=max_iterations,
        )
        result.escape_mass = _initial_values(mdp, mass)
        worst = max(result.escape_mass.values(), default=0)
        result.warnings.append(
            f"some runs leave the declared domain (escape probability up to {format_value(worst)}); "
            "values are truncated at the domain boundary"
        )
    logger.info(f"Solved {mode} expected reward on {mdp.size} configurations (exact={result.exact})")
    return result


def expected_steps(
    mdp: OperationalMdp,
    mode: str = "max",
    epsilon: float = DEFAULT_EPSILON,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> ValueResult:
    """Minimal or maximal expected number of transitions until a stopping configuration.

    Infinite values are decided qualitatively before any iteration.
    """
    if mode == "max":
        infinite = may_not_stop(mdp)
        actions_of = None
    else:
        finite = surely_stoppable(mdp)
        infinite = set(range(mdp.size)) - finite

        def actions_of(s):
            return [a for a, succ in mdp.transitions[s].items() if all(t in finite for t, _ in succ)]

    fixed = {s: INFINITY for s in infinite}
    values, approximate, iterations, warnings = _solve(
        mdp, lambda s: Fraction(0), mode, step_reward=Fraction(1), epsilon=epsilon,
        max_iterations=max_iterations, fixed=fixed, actions_of=actions_of,
    )
    return _result(mdp, values, approximate, epsilon, iterations, warnings)


MdStrategy = Dict[int, Action]


def _action_value(mdp: OperationalMdp, s: int, action: Action, values: List[Value]) -> Value:
    total = Fraction(0)
    for t, p in mdp.transitions[s][action]:
        total = value_add(total, value_mul(p, values[t]))
    return total


def optimal_actions(mdp: OperationalMdp, result: ValueResult, mode: str) -> Dict[int, List[Action]]:
    """Actions attaining the optimum of ``result`` at every non-stopping configuration.

    Inexact results accept actions within ``epsilon`` of the best one.
    """
    pick = min if mode == "min" else max
    tolerance = result.epsilon if result.inexact else 0
    values = result.all_values
    optimal: Dict[int, List[Action]] = {}
    for s, actions in enumerate(mdp.transitions):
        if s in mdp.stopping or not actions:
            continue
        totals = {action: _action_value(mdp, s, action, values) for action in sorted(actions)}
        best = pick(totals.values())
        optimal[s] = [
            action for action, total in totals.items()
            if total == best or (INFINITY not in (total, best) and abs(total - best) <= tolerance)
        ]
    return optimal


def _keeps_value(source: Value, target: Value) -> bool:
    if source == INFINITY:
        return target == INFINITY
    return target != 0


def _progress_distances(mdp: OperationalMdp, optimal: Dict[int, List[Action]],
                        values: List[Value]) -> Dict[int, int]:
    """Fewest optimal moves from each configuration to a stopping one that pays its value.

    Only moves into configurations that keep the value alive count: positive
    values move to positive ones, infinite values to infinite ones.
    """
    goal = -1
    graph = nx.DiGraph()
    graph.add_node(goal)
    for s in mdp.stopping:
        if values[s] != 0:
            graph.add_edge(s, goal)
    for s, actions in optimal.items():
        if values[s] == 0:
            continue
        for action in actions:
            graph.add_edges_from(
                (s, t) for t, _ in mdp.transitions[s][action] if _keeps_value(values[s], values[t])
            )
    return nx.single_source_shortest_path_length(graph.reverse(copy=False), goal)


def extract_strategy(mdp: OperationalMdp, result: ValueResult, mode: str) -> MdStrategy:
    """Memoryless deterministic strategy attaining ``result``.

    Among the optimal actions, min mode takes the lowest one. Max mode takes
    the lowest action that moves closer to a stopping configuration paying the
    value, so optimal self-loops of a cyclic model are never chosen forever.
    """
    optimal = optimal_actions(mdp, result, mode)
    if mode == "min":
        return {s: actions[0] for s, actions in optimal.items()}
    values = result.all_values
    distance = _progress_distances(mdp, optimal, values)
    strategy: MdStrategy = {}
    for s, actions in optimal.items():
        strategy[s] = actions[0]
        if s not in distance:
            continue
        for action in actions:
            if any(
                distance.get(t) == distance[s] - 1 and _keeps_value(values[s], values[t])
                for t, _ in mdp.transitions[s][action]
            ):
                strategy[s] = action
                break
    return strategy


def apply_strategy(mdp: OperationalMdp, strategy: MdStrategy) -> OperationalMdp:
    return mdp.restrict({s: {a} for s, a in strategy.items()})


def strategy_value(mdp: OperationalMdp, strategy: MdStrategy, post: Expr,
                   epsilon: float = DEFAULT_EPSILON,
                   max_iterations: int = DEFAULT_MAX_ITERATIONS,
                   escape_reward: Optional[Expr] = None) -> ValueResult:
    """Expected ``post`` in the Markov chain induced by ``strategy``."""
    return expected_reward(apply_strategy(mdp, strategy), post, "max", epsilon, max_iterations, escape_reward)


def restrict_by_program(mdp: OperationalMdp, refined: Stmt) -> OperationalMdp:
    """Embed the MDP of ``refined`` into ``mdp`` and keep only the actions it enables.

    Raises:
        EmbeddingMismatch: when ``refined`` does not follow ``mdp``'s program
            step for step with a subset of its actions.
    """
    refined = desugar(refined)
    stepper = _Stepper(mdp.domain, mdp.escape)
    paired: Dict[int, Control] = {}
    queue = deque()
    for s in mdp.initial:
        paired[s] = refined
        queue.append(s)
    allowed: Dict[int, Set[Action]] = {}

    while queue:
        s = queue.popleft()
        config = mdp.configurations[s]
        original = defaultdict(list)
        for branch in stepper.branches(config.control, config.state):
            original[branch.action].append(branch)
        ours = defaultdict(list)
        for branch in stepper.branches(paired[s], config.state):
            ours[branch.action].append(branch)
        for action, branches in ours.items():
            theirs = original.get(action)
            if theirs is None or len(theirs) != len(branches):
                raise EmbeddingMismatch(
                    f"refined program enables {action.label} at {config.state} where the original does not",
                    state=config.state,
                )
            for mine, other in zip(branches, theirs):
                if mine.prob != other.prob or mine.state != other.state:
                    raise EmbeddingMismatch(f"branch mismatch under {action.label} at {config.state}",
                                            state=config.state)
                if mine.prob == 0:
                    continue
                t = mdp.index.get(Configuration(other.control, other.state))
                if t is None:
                    raise EmbeddingMismatch(f"successor missing from the original model at {other.state}")
                previous = paired.get(t)
                if previous is None:
                    paired[t] = mine.control
                    queue.append(t)
                elif previous != mine.control and not isinstance(previous, _Sentinel):
                    raise EmbeddingMismatch(f"configuration {t} pairs with two refined controls",
                                            state=other.state)
        allowed[s] = set(ours)
    logger.info(f"Refined program embeds into {len(allowed)} of {mdp.size} configurations")
    return mdp.restrict(allowed)


def export_mdp(mdp: OperationalMdp, post: Optional[Expr] = None) -> str:
    """Plain-text dump of the model: ``src action prob dst`` per transition."""
    lines = [f"states {mdp.size}"]
    lines.extend(f"initial {s}" for s in mdp.initial)
    for s, actions in enumerate(mdp.transitions):
        for action, successors in actions.items():
            lines.extend(f"{s} {action.label} {format_value(p)} {t}" for t, p in successors)
    lines.extend(f"target {s}" for s in sorted(mdp.targets))
    lines.extend(f"escaped {s}" for s in sorted(mdp.escaped))
    if post is not None:
        reward = evaluator(post)
        lines.extend(f"reward {s} {format_value(reward(mdp.configurations[s].state))}" for s in sorted(mdp.targets))
    return "\n".join(lines) + "\n"


@dataclass
class AnalysisOptions:
    """Limits shared by every model-building analysis."""

    budget: int = DEFAULT_BUDGET
    epsilon: float = DEFAULT_EPSILON
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    escape: str = "error"
