"""Laws of substitution and of the preexpectation transformers on random inputs."""
import pytest

from models.expressions import Add, Compare, Iverson, Min, Var, const, eval_exp, subst
from services.algebra import simplify
from services.mdp import build_mdp, expected_reward
from services.transform import determinize, dtrans, is_deterministic
from services.vc import VcProvider, vc_check
from services.wp import Transformer, wp_exact, wpre

CORPUS_SIZE = 100
LOOP_CORPUS_SIZE = 40
TOLERANCE = 1e-6


def test_substitution_matches_updated_states(generator):
    for number in range(CORPUS_SIZE):
        domain = generator.domain()
        f = generator.expectation()
        name = generator.var().name
        replacement = generator.arithmetic()
        substituted = subst(f, name, replacement)
        for state in domain.states():
            updated = state.set(name, eval_exp(replacement, state))
            assert eval_exp(substituted, state) == eval_exp(f, updated), (number, state)


@pytest.mark.parametrize("kind", [Transformer.DWP, Transformer.AWP])
def test_preexpectations_are_monotone(program_corpus, kind):
    for number, (domain, program, post) in enumerate(program_corpus(CORPUS_SIZE)):
        name = domain.names[0]
        larger = Add(post, Iverson(Compare("=", Var(name), const(domain.variables[name][0]))))
        smaller_wp = wp_exact(kind, program, post)
        larger_wp = wp_exact(kind, program, larger)
        for state in domain.states():
            assert eval_exp(smaller_wp, state) <= eval_exp(larger_wp, state), (number, state)


@pytest.mark.parametrize("kind", [Transformer.DWP, Transformer.AWP])
def test_preexpectations_are_feasible(program_corpus, kind):
    bound = const(2)
    for number, (domain, program, post) in enumerate(program_corpus(CORPUS_SIZE)):
        capped = Min(post, bound)
        result = wp_exact(kind, program, capped)
        for state in domain.states():
            assert eval_exp(result, state) <= 2, (number, state)


def test_demonic_never_exceeds_angelic(program_corpus):
    for number, (domain, program, post) in enumerate(program_corpus(CORPUS_SIZE)):
        demonic = wp_exact(Transformer.DWP, program, post)
        angelic = wp_exact(Transformer.AWP, program, post)
        for state in domain.states():
            assert eval_exp(demonic, state) <= eval_exp(angelic, state), (number, state)


@pytest.mark.parametrize("bias", ["left", "right"])
def test_upper_bounds_hold_for_every_determinization_with_loops(loop_corpus, bias):
    for number, (domain, program, post) in enumerate(loop_corpus(LOOP_CORPUS_SIZE)):
        report = vc_check(VcProvider.SUPERINV, Transformer.DWP, program, post, domain)
        assert report.verdict, (number, report.counterexamples)
        bound = simplify(wpre(Transformer.DWP, program, post))
        strategy = determinize(dtrans(program, post), bias)
        assert is_deterministic(strategy, domain), number
        values = expected_reward(build_mdp(strategy, domain), post, "max")
        for state, value in values.values.items():
            assert value <= eval_exp(bound, state) + TOLERANCE, (number, state)
