"""End-to-end runs shared by the command line and the HTTP API.

Every ``run_*`` function takes a parsed :class:`SourceFile` and returns a
report dictionary with the keys ``command``, ``file``, ``domain_size``,
``verdict``, ``values``, ``counterexamples``, ``warnings`` and ``timing_ms``,
plus command-specific extras.
"""
import logging
import math
import time
from typing import Any, Dict, Iterable, List, Mapping, Optional

from models.domain import ProgState, SourceFile
from models.expressions import Expr, evaluator
from models.program import has_loops
from services.algebra import le_on_domain, simplify
from services.mdp import (
    AnalysisOptions, build_mdp, conservation_violations, expected_reward, export_mdp,
    extract_strategy, restrict_by_program, strategy_value,
)
from services.printer import print_expr, print_program, print_statement
from services.transform import (
    Comparison, determinize, disabled_branches, implements, is_deterministic, simplify_guards, trans,
)
from services.vc import SAMPLED_CAVEAT, VcProvider, vc_check
from services.wp import Transformer, check_well_formed, wp_exact, wpre
from utils.errors import EvaluationError, UsageError
from utils.helpers import format_value

logger = logging.getLogger(__name__)

WP_TRANSFORMERS = ("dwp", "awp", "wpre-dwp", "wpre-awp")
DIRECTIONS = ("upper", "lower")
ORACLE_TOLERANCE = 1e-6

_DIRECTION_SETTINGS = {
    "upper": (Transformer.DWP, Comparison.LE, VcProvider.SUPERINV),
    "lower": (Transformer.AWP, Comparison.GE, VcProvider.DAST_SUBINV),
}


def _report(command: str, source: SourceFile, started: float, verdict: bool, **extra) -> Dict[str, Any]:
    report = {
        "command": command,
        "file": source.path,
        "domain_size": source.domain.size,
        "verdict": verdict,
        "values": [],
        "counterexamples": [],
        "warnings": [],
    }
    report.update(extra)
    if source.domain.is_sampled and SAMPLED_CAVEAT not in report["warnings"]:
        report["warnings"].append(SAMPLED_CAVEAT)
    report["timing_ms"] = round((time.perf_counter() - started) * 1000, 3)
    return report


def _require_post(source: SourceFile, post: Optional[Expr]) -> Expr:
    post = post if post is not None else source.post
    if post is None:
        raise UsageError("no postexpectation: pass --post or declare 'post' in the file")
    return post


def resolve_direction(source: SourceFile, direction: Optional[str], provider: Optional[str] = None) -> str:
    """Explicit flag, then the file's declaration, then whatever the provider implies."""
    direction = direction or source.direction
    if direction is None:
        direction = "upper" if provider in (None, VcProvider.SUPERINV.value) else "lower"
    if direction not in DIRECTIONS:
        raise UsageError(f"direction must be one of {', '.join(DIRECTIONS)}, not {direction!r}")
    return direction


def _close(a, b, tolerance: float) -> bool:
    if a == b:
        return True
    if math.inf in (a, b):
        return False
    return abs(a - b) <= tolerance


def _value_rows(values: Mapping[ProgState, Any]) -> List[Dict[str, Any]]:
    return [{"state": state.to_dict(), "value": format_value(value)} for state, value in values.items()]


def run_wp(source: SourceFile, transformer: str = "dwp", post: Optional[Expr] = None,
           states: Iterable[Mapping[str, Any]] = ()) -> Dict[str, Any]:
    """Preexpectation of the whole program, optionally evaluated at ``states``."""
    started = time.perf_counter()
    if transformer not in WP_TRANSFORMERS:
        raise UsageError(f"transformer must be one of {', '.join(WP_TRANSFORMERS)}, not {transformer!r}")
    post = _require_post(source, post)
    check_well_formed(source.program, source.domain)
    kind = Transformer(transformer.replace("wpre-", ""))
    if transformer.startswith("wpre-"):
        result = simplify(wpre(kind, source.program, post))
    else:
        result = wp_exact(kind, source.program, post)
    value_of = evaluator(result)
    values = []
    for assignment in states:
        state = ProgState(assignment)
        try:
            values.append({"state": state.to_dict(), "value": format_value(value_of(state))})
        except EvaluationError as exc:
            raise exc.at(state)
    logger.info(f"{transformer} of {source.path or '<text>'} computed")
    return _report("wp", source, started, True, values=values, transformer=transformer,
                   post=print_expr(post), preexpectation=print_expr(result))


def run_check(source: SourceFile, provider: Optional[str] = None, direction: Optional[str] = None,
              post: Optional[Expr] = None, threshold: Optional[Expr] = None,
              options: Optional[AnalysisOptions] = None) -> Dict[str, Any]:
    """Loop verification conditions plus the optional threshold comparison.

    Raises:
        PairingMismatch: when ``provider`` does not belong to ``direction``.
    """
    started = time.perf_counter()
    direction = resolve_direction(source, direction, provider)
    kind, _, default_provider = _DIRECTION_SETTINGS[direction]
    provider = VcProvider(provider) if provider else default_provider
    post = _require_post(source, post)
    threshold = threshold if threshold is not None else source.threshold
    domain = source.domain
    check_well_formed(source.program, domain)

    report = vc_check(provider, kind, source.program, post, domain, options)
    verdict = report.verdict
    counterexamples = report.counterexamples
    warnings = list(report.warnings)
    if not report.loops:
        warnings.append("program has no loops; only the threshold comparison applies")

    threshold_report = None
    if threshold is not None:
        bound = simplify(wpre(kind, source.program, post))
        if direction == "upper":
            check = le_on_domain(bound, threshold, domain, description="wpre <= threshold")
        else:
            check = le_on_domain(threshold, bound, domain, description="threshold <= wpre")
        threshold_report = check.to_dict()
        if not check.holds:
            verdict = False
            counterexamples.append({"check": "threshold", **threshold_report})

    logger.info(f"check [{provider.value}] on {source.path or '<text>'}: verdict={verdict}")
    return _report(
        "check", source, started, verdict,
        counterexamples=counterexamples, warnings=warnings,
        direction=direction, provider=provider.value, transformer=kind.value,
        post=print_expr(post), loops=[record.to_dict() for record in report.loops],
        threshold=threshold_report,
    )


def _oracle(source: SourceFile, refined, post: Expr, kind: Transformer,
            options: AnalysisOptions) -> Dict[str, Any]:
    """Original optimum against the worst and best determinizations of ``refined``."""
    mdp = build_mdp(source.program, source.domain, budget=options.budget, escape=options.escape)
    restricted = restrict_by_program(mdp, refined)
    mode = kind.mode
    worst_mode = "max" if mode == "min" else "min"
    solve = dict(epsilon=options.epsilon, max_iterations=options.max_iterations)
    original = expected_reward(mdp, post, mode, **solve)
    worst = expected_reward(restricted, post, worst_mode, **solve)
    best = expected_reward(restricted, post, mode, **solve)
    exact = original.exact and worst.exact and best.exact
    tolerance = 0 if exact else ORACLE_TOLERANCE

    bound = evaluator(simplify(wpre(kind, source.program, post))) if has_loops(source.program) else None
    rows, mismatches = [], []
    for state, value in original.values.items():
        row = {
            "state": state.to_dict(),
            "original": format_value(value),
            "refined_worst": format_value(worst.values[state]),
            "refined_best": format_value(best.values[state]),
        }
        if bound is None:
            ok = _close(value, worst.values[state], tolerance)
        else:
            limit = bound(state)
            row["bound"] = format_value(limit)
            if kind is Transformer.DWP:
                ok = worst.values[state] <= limit or _close(worst.values[state], limit, tolerance)
            else:
                ok = worst.values[state] >= limit or _close(worst.values[state], limit, tolerance)
        row["ok"] = ok
        rows.append(row)
        if not ok:
            mismatches.append({"check": "oracle", "counterexample": state.to_dict(), **row})
    warnings = original.warnings + worst.warnings
    return {"rows": rows, "mismatches": mismatches, "exact": exact, "warnings": warnings,
            "escaped": bool(mdp.escaped)}


def run_transform(source: SourceFile, direction: Optional[str] = None, post: Optional[Expr] = None,
                  bias: Optional[str] = None, oracle: bool = True,
                  options: Optional[AnalysisOptions] = None) -> Dict[str, Any]:
    """Strengthen guards for ``post``; optionally determinize with ``bias`` and confirm on the MDP."""
    started = time.perf_counter()
    options = options or AnalysisOptions()
    direction = resolve_direction(source, direction)
    kind, comparison, _ = _DIRECTION_SETTINGS[direction]
    post = _require_post(source, post)
    domain = source.domain
    check_well_formed(source.program, domain)

    refined = trans(comparison, kind, source.program, post)
    if bias:
        refined = determinize(refined, bias)
    implemented = implements(refined, source.program, domain)
    verdict = implemented.holds
    counterexamples = []
    if not implemented.holds:
        counterexamples.append({"check": "implements", **implemented.to_dict()})

    warnings: List[str] = []
    oracle_rows = None
    if oracle and implemented.holds:
        result = _oracle(source, refined, post, kind, options)
        oracle_rows = result["rows"]
        warnings.extend(result["warnings"])
        if result["escaped"]:
            warnings.append("runs escape the declared domain; oracle comparison is informational")
        elif result["mismatches"]:
            verdict = False
            counterexamples.extend(result["mismatches"])

    transformed = SourceFile(domain, refined, post, source.threshold, direction, source.path)
    logger.info(f"transform ({direction}) of {source.path or '<text>'}: verdict={verdict}")
    return _report(
        "transform", source, started, verdict,
        counterexamples=counterexamples, warnings=warnings,
        direction=direction, transformer=kind.value, post=print_expr(post),
        determinized=bias, program=print_program(transformed),
        simplified=print_statement(simplify_guards(refined)),
        implements=implemented.to_dict(),
        deterministic=is_deterministic(refined, domain).to_dict(),
        disabled_branches=disabled_branches(refined, domain),
        oracle=oracle_rows,
    )


def run_mdp(source: SourceFile, post: Optional[Expr] = None, mode: Optional[str] = None,
            strategy: bool = False, export: bool = False, escape_reward: Optional[Expr] = None,
            options: Optional[AnalysisOptions] = None) -> Dict[str, Any]:
    """Optimal expected ``post`` on the operational MDP, from every initial state."""
    started = time.perf_counter()
    options = options or AnalysisOptions()
    post = _require_post(source, post)
    if mode is None:
        mode = "min" if source.direction == "upper" else "max"
    if mode not in ("min", "max"):
        raise UsageError(f"mode must be 'min' or 'max', not {mode!r}")
    check_well_formed(source.program, source.domain)

    mdp = build_mdp(source.program, source.domain, budget=options.budget, escape=options.escape)
    violations = conservation_violations(mdp)
    if violations:
        s, action, total = violations[0]
        logger.error(f"{len(violations)} actions do not conserve probability; first at {s} ({action.label}, {total})")
    result = expected_reward(mdp, post, mode, options.epsilon, options.max_iterations, escape_reward)
    values = _value_rows(result.values)
    for row, state in zip(values, result.values):
        if not result.exact:
            row["exact"] = result.is_exact(state)
        if result.escape_mass:
            row["escape_mass"] = format_value(result.escape_mass[state])
    counterexamples: List[Dict[str, Any]] = []
    extra: Dict[str, Any] = {
        "mode": mode,
        "post": print_expr(post),
        "exact": result.exact,
        "epsilon": None if result.exact else result.epsilon,
        "iterations": result.iterations,
        "model": mdp.describe(),
    }
    if strategy:
        chosen = extract_strategy(mdp, result, mode)
        chain = strategy_value(mdp, chosen, post, options.epsilon, options.max_iterations, escape_reward)
        tolerance = 0 if result.exact and chain.exact else max(2 * options.epsilon, ORACLE_TOLERANCE)
        for state, value in result.values.items():
            if not _close(chain.values[state], value, tolerance):
                counterexamples.append({
                    "check": "strategy",
                    "counterexample": state.to_dict(),
                    "optimal": format_value(value),
                    "strategy": format_value(chain.values[state]),
                })
        extra["strategy_sound"] = not counterexamples
        table = []
        for s, action in sorted(chosen.items()):
            enabled = mdp.enabled(s)
            if len(enabled) < 2:
                continue
            config = mdp.configurations[s]
            table.append({
                "index": s,
                "state": config.state.to_dict(),
                "statement": print_statement(config.control).splitlines()[0],
                "action": action.label,
                "enabled": [a.label for a in enabled],
            })
        extra["strategy"] = table
    if export:
        extra["export"] = export_mdp(mdp, post)
    warnings = list(result.warnings)
    if violations:
        warnings.append(f"{len(violations)} actions do not conserve probability")
    if counterexamples:
        logger.error(f"extracted strategy misses the optimum at {len(counterexamples)} initial states")
    verdict = not violations and not counterexamples
    return _report("mdp", source, started, verdict, values=values, warnings=warnings,
                   counterexamples=counterexamples, **extra)
