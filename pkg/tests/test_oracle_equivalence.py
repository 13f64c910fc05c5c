import pytest

from models.expressions import eval_exp
from services.mdp import build_mdp, conservation_violations, expected_reward
from services.wp import Transformer, wp_exact

pytestmark = pytest.mark.acceptance

CORPUS_SIZE = 500


@pytest.mark.parametrize("kind", [Transformer.DWP, Transformer.AWP])
def test_symbolic_values_match_the_model(program_corpus, kind):
    for number, (domain, program, post) in enumerate(program_corpus(CORPUS_SIZE)):
        expected = wp_exact(kind, program, post)
        mdp = build_mdp(program, domain)
        assert conservation_violations(mdp) == [], number
        result = expected_reward(mdp, post, kind.mode)
        assert result.exact, number
        assert len(result.values) == domain.size
        for state, value in result.values.items():
            assert value == eval_exp(expected, state), (number, state)


def test_fixture_values_match_the_model(fixture_source):
    for name in ("random_shift", "choose_then_shift", "copy_either", "copy_strict", "copy_ties", "monty_hall"):
        source = fixture_source(name)
        mdp = build_mdp(source.program, source.domain)
        for kind in Transformer:
            expected = wp_exact(kind, source.program, source.post)
            result = expected_reward(mdp, source.post, kind.mode)
            for state, value in result.values.items():
                assert value == eval_exp(expected, state), (name, kind, state)
