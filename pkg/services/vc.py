"""Verification conditions for invariant-annotated programs.

``vc_check`` walks the program the way ``wpre`` does and hands every loop to a
provider:

* ``SUPERINV`` (with dwp): the characteristic functional is below the invariant.
* ``DAST_SUBINV`` (with awp): the invariant is below the functional, the loop
  terminates almost surely under every resolution, and invariant and
  postexpectation are bounded.
* ``DPAST_SUBINV`` (with awp): subinvariance, finite expected runtime and the
  optional-stopping conditions (shape, finiteness, conditional difference
  boundedness).

Termination and boundedness are certified on the declared finite domain only.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional

from models.domain import FiniteDomain, ProgState
from models.expressions import (
    AbsDiff, Add, Expr, Iverson, Max, Mul, Not, Var, evaluator,
)
from models.program import (
    Assign, GuardedChoice, IfElse, ProbChoice, Seq, Skip, Stmt, UniformAssign, While, desugar,
)
from services.algebra import EntailmentReport, eq_on_domain, le_on_domain, max_on_domain
from services.mdp import AnalysisOptions, build_mdp, expected_steps, may_not_stop
from services.wp import Transformer, char_functional, wp_exact, wpre
from utils.errors import EvaluationError, PairingMismatch, ShapeNotRecognized
from utils.helpers import format_value

logger = logging.getLogger(__name__)

ANCHOR = "$anchor"
SAMPLED_CAVEAT = "checked on sampled parameter values, not exhaustively over the rationals"
SCOPE_CAVEAT = "termination and boundedness side conditions are certified on the declared domain only"


class VcProvider(str, Enum):
    SUPERINV = "superinv"
    DAST_SUBINV = "dast-subinv"
    DPAST_SUBINV = "dpast-subinv"

    @property
    def transformer(self) -> Transformer:
        return Transformer.DWP if self is VcProvider.SUPERINV else Transformer.AWP


@dataclass
class TerminationResult:
    holds: bool
    counterexample: Optional[ProgState] = None
    initial_states: int = 0
    configurations: int = 0
    expected_steps: Optional[Any] = None

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "holds": self.holds,
            "counterexample": self.counterexample.to_dict() if self.counterexample is not None else None,
            "initial_states": self.initial_states,
            "configurations": self.configurations,
        }
        if self.expected_steps is not None:
            data["max_expected_steps"] = format_value(self.expected_steps)
        return data


@dataclass
class CdbResult:
    holds: bool
    bound: Optional[Any] = None
    witness: Optional[ProgState] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "holds": self.holds,
            "bound": format_value(self.bound) if self.bound is not None else None,
            "witness": self.witness.to_dict() if self.witness is not None else None,
        }


@dataclass
class LoopRecord:
    """Outcome of one provider call on one loop."""

    loop: str
    provider: VcProvider
    inequality: EntailmentReport
    side_conditions: Dict[str, Any] = field(default_factory=dict)
    messages: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        if not self.inequality.holds:
            return False
        return all(getattr(value, "holds", True) for value in self.side_conditions.values())

    def to_dict(self) -> Dict[str, Any]:
        side = {}
        for name, value in self.side_conditions.items():
            side[name] = value.to_dict() if hasattr(value, "to_dict") else value
        return {
            "loop": self.loop,
            "provider": self.provider.value,
            "passed": self.passed,
            "inequality": self.inequality.to_dict(),
            "side_conditions": side,
            "messages": list(self.messages),
        }


@dataclass
class VcReport:
    verdict: bool
    loops: List[LoopRecord] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def counterexamples(self) -> List[Dict[str, Any]]:
        found = []
        for record in self.loops:
            if record.inequality.counterexample is not None:
                found.append({"loop": record.loop, "check": "inequality",
                              **record.inequality.to_dict()})
            for name, value in record.side_conditions.items():
                witness = getattr(value, "counterexample", None) or getattr(value, "witness", None)
                if witness is not None and not getattr(value, "holds", True):
                    found.append({"loop": record.loop, "check": name, "counterexample": witness.to_dict()})
        return found

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "loops": [record.to_dict() for record in self.loops],
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# Side conditions
# ---------------------------------------------------------------------------

def check_dast(program: Stmt, domain: FiniteDomain, options: Optional[AnalysisOptions] = None) -> TerminationResult:
    """Almost-sure termination under every resolution, from every state of ``domain``."""
    options = options or AnalysisOptions()
    mdp = build_mdp(program, domain, budget=options.budget, escape=options.escape,
                    initial_states=domain.states())
    bad = may_not_stop(mdp)
    for s in mdp.initial:
        if s in bad:
            state = mdp.configurations[s].state
            logger.debug(f"Demonic termination fails from {state}")
            return TerminationResult(False, state, len(mdp.initial), mdp.size)
    return TerminationResult(True, None, len(mdp.initial), mdp.size)


def check_dpast(program: Stmt, domain: FiniteDomain, options: Optional[AnalysisOptions] = None) -> TerminationResult:
    """Finite maximal expected runtime from every state of ``domain``; reports the largest one."""
    options = options or AnalysisOptions()
    mdp = build_mdp(program, domain, budget=options.budget, escape=options.escape,
                    initial_states=domain.states())
    steps = expected_steps(mdp, "max", options.epsilon, options.max_iterations)
    worst: Any = Fraction(0)
    for state, value in steps.values.items():
        if value == float("inf"):
            return TerminationResult(False, state, len(mdp.initial), mdp.size, value)
        worst = max(worst, value)
    return TerminationResult(True, None, len(mdp.initial), mdp.size, worst)


def check_cdb(loop: While, invariant: Expr, domain: FiniteDomain) -> CdbResult:
    """Largest one-step expected change ``awp(body)(|I - I(s)|)(s)`` over guard states.

    Raises:
        LoopPresent: if the loop body contains a loop.
    """
    spread = wp_exact(Transformer.AWP, loop.body, AbsDiff(invariant, Var(ANCHOR)))
    guard, value_of, spread_of = evaluator(loop.guard), evaluator(invariant), evaluator(spread)
    bound: Any = Fraction(0)
    witness = None
    for state in domain.states():
        try:
            if not guard(state):
                continue
            change = spread_of({**state, ANCHOR: value_of(state)})
        except EvaluationError as exc:
            raise exc.at(state)
        if change == float("inf"):
            return CdbResult(False, change, state)
        if witness is None or change > bound:
            bound, witness = change, state
    return CdbResult(True, bound, witness)


@dataclass
class BoundResult:
    holds: bool
    bound: Any = None
    counterexample: Optional[ProgState] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "holds": self.holds,
            "bound": format_value(self.bound) if self.bound is not None else None,
            "counterexample": self.counterexample.to_dict() if self.counterexample is not None else None,
        }


def _finite_bound(expr: Expr, domain: FiniteDomain) -> BoundResult:
    value, state = max_on_domain(expr, domain)
    if value == float("inf"):
        return BoundResult(False, value, state)
    return BoundResult(True, value)


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------

def provider_superinv(loop: While, post: Expr, domain: FiniteDomain,
                      options: Optional[AnalysisOptions] = None) -> LoopRecord:
    functional = char_functional(Transformer.DWP, loop, post)
    report = le_on_domain(functional, loop.invariant, domain, respect_init=False,
                          description="functional <= invariant")
    return LoopRecord(loop.label, VcProvider.SUPERINV, report)


def _subinvariance(loop: While, post: Expr, domain: FiniteDomain) -> EntailmentReport:
    functional = char_functional(Transformer.AWP, loop, post)
    return le_on_domain(loop.invariant, functional, domain, respect_init=False,
                        description="invariant <= functional")


def provider_dast_subinv(loop: While, post: Expr, domain: FiniteDomain,
                         options: Optional[AnalysisOptions] = None) -> LoopRecord:
    record = LoopRecord(loop.label, VcProvider.DAST_SUBINV, _subinvariance(loop, post, domain))
    record.side_conditions["dast"] = check_dast(loop, domain, options)
    record.side_conditions["bounded"] = _finite_bound(Max(loop.invariant, post), domain)
    return record


def provider_dpast_subinv(loop: While, post: Expr, domain: FiniteDomain,
                          options: Optional[AnalysisOptions] = None) -> LoopRecord:
    record = LoopRecord(loop.label, VcProvider.DPAST_SUBINV, _subinvariance(loop, post, domain))
    record.side_conditions["dpast"] = check_dpast(loop, domain, options)

    invariant = loop.invariant
    reshaped = Add(Mul(Iverson(loop.guard), invariant), Mul(Iverson(Not(loop.guard)), post))
    shape = eq_on_domain(invariant, reshaped, domain, respect_init=False,
                         description="invariant = [guard]*invariant + [!guard]*post")
    record.side_conditions["shape"] = shape
    if not shape.holds:
        error = ShapeNotRecognized(
            f"invariant of {loop.label} does not agree with the postexpectation outside the guard",
            state=shape.counterexample,
        )
        logger.debug(error.message)
        record.messages.append(f"{type(error).__name__}: {error.message}")

    record.side_conditions["post_finite"] = _finite_bound(post, domain)
    record.side_conditions["invariant_finite"] = _finite_bound(invariant, domain)
    record.side_conditions["functional_finite"] = _finite_bound(
        char_functional(Transformer.AWP, loop, post), domain)
    record.side_conditions["cdb"] = check_cdb(loop, invariant, domain)
    return record


PROVIDERS = {
    VcProvider.SUPERINV: provider_superinv,
    VcProvider.DAST_SUBINV: provider_dast_subinv,
    VcProvider.DPAST_SUBINV: provider_dpast_subinv,
}


def _collect(provider: VcProvider, kind: Transformer, stmt: Stmt, post: Expr, domain: FiniteDomain,
             options: AnalysisOptions, records: List[LoopRecord]) -> None:
    if isinstance(stmt, (Skip, Assign)):
        return
    if isinstance(stmt, Seq):
        _collect(provider, kind, stmt.first, wpre(kind, stmt.second, post), domain, options, records)
        _collect(provider, kind, stmt.second, post, domain, options, records)
        return
    if isinstance(stmt, (GuardedChoice, ProbChoice)):
        _collect(provider, kind, stmt.left, post, domain, options, records)
        _collect(provider, kind, stmt.right, post, domain, options, records)
        return
    if isinstance(stmt, While):
        record = PROVIDERS[provider](stmt, post, domain, options)
        logger.debug(f"{stmt.label} [{provider.value}]: passed={record.passed}")
        records.append(record)
        _collect(provider, kind, stmt.body, stmt.invariant, domain, options, records)
        return
    if isinstance(stmt, (IfElse, UniformAssign)):
        _collect(provider, kind, desugar(stmt), post, domain, options, records)
        return
    raise TypeError(f"unsupported statement {type(stmt).__name__}")


def vc_check(provider: VcProvider, kind: Transformer, program: Stmt, post: Expr, domain: FiniteDomain,
             options: Optional[AnalysisOptions] = None) -> VcReport:
    """Check every loop of ``program`` with ``provider``.

    Raises:
        PairingMismatch: if ``provider`` does not belong to ``kind``.
    """
    provider, kind = VcProvider(provider), Transformer(kind)
    if provider.transformer is not kind:
        raise PairingMismatch(f"provider {provider.value} pairs with {provider.transformer.value}, not {kind.value}")
    options = options or AnalysisOptions()
    records: List[LoopRecord] = []
    _collect(provider, kind, program, post, domain, options, records)
    report = VcReport(all(record.passed for record in records), records)
    if domain.is_sampled:
        report.warnings.append(SAMPLED_CAVEAT)
    if provider is not VcProvider.SUPERINV and records:
        report.warnings.append(SCOPE_CAVEAT)
    logger.info(f"VC check with {provider.value}: {len(records)} loops, verdict={report.verdict}")
    return report
