import random
from fractions import Fraction
from pathlib import Path

import pytest

from models.domain import FiniteDomain
from models.expressions import (
    Add, And, Compare, Div, GuardImp, Iverson, Max, Min, Mod, Monus, Mul, Not, Or, Var, const,
)
from models.program import Assign, GuardedChoice, IfElse, ProbChoice, Seq, Skip, UniformAssign, While
from services.algebra import max_on_domain
from services.mdp import AnalysisOptions
from services.parser import load_file

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
DEFAULT_SEED = 20240917


def pytest_addoption(parser):
    parser.addoption("--pgcl-seed", type=int, default=DEFAULT_SEED,
                     help="Seed for the random program corpus.")


def load_fixture(name):
    return load_file(FIXTURES / f"{name}.pgcl")


@pytest.fixture
def fixture_source():
    return load_fixture


@pytest.fixture
def stop_options():
    return AnalysisOptions(escape="stop")


@pytest.fixture
def seed(request):
    return request.config.getoption("--pgcl-seed")


class ProgramGenerator:
    """Random loop-free programs over at most three small variables.

    Assignments reduce modulo the target's domain size, so runs never leave
    the domain; the second guard of every choice includes the negation of
    the first, so some branch is always enabled.
    """

    NAMES = ("x", "y", "z")
    PROBABILITIES = (Fraction(0), Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(1))
    OPS = ("=", "!=", "<", "<=", ">", ">=")

    def __init__(self, rng: random.Random, max_depth: int = 5):
        self.rng = rng
        self.max_depth = max_depth
        self.sizes = {}

    def domain(self) -> FiniteDomain:
        count = self.rng.randint(1, 3)
        self.sizes = {name: self.rng.randint(2, 4) for name in self.NAMES[:count]}
        return FiniteDomain.of(**{name: range(n) for name, n in self.sizes.items()})

    def var(self):
        return Var(self.rng.choice(list(self.sizes)))

    def operand(self):
        if self.rng.random() < 0.6:
            return self.var()
        return const(self.rng.randint(0, 3))

    def arithmetic(self):
        roll = self.rng.random()
        if roll < 0.3:
            return Add(self.var(), const(self.rng.randint(1, 3)))
        if roll < 0.5:
            return Add(self.var(), self.var())
        if roll < 0.7:
            return Mul(self.var(), self.operand())
        return self.operand()

    def assignment(self):
        target = self.rng.choice(list(self.sizes))
        return target, Mod(self.arithmetic(), const(self.sizes[target]))

    def probability(self):
        if self.rng.random() < 0.3:
            return Div(self.var(), const(3))
        return const(self.rng.choice(self.PROBABILITIES))

    def guard(self, depth: int = 0):
        roll = self.rng.random()
        if depth < 2 and roll < 0.15:
            return And(self.guard(depth + 1), self.guard(depth + 1))
        if depth < 2 and roll < 0.25:
            return Not(self.guard(depth + 1))
        return Compare(self.rng.choice(self.OPS), self.var(), self.operand())

    def statement(self, depth: int = 0):
        leaf = depth >= self.max_depth or self.rng.random() < 0.25
        if leaf:
            roll = self.rng.random()
            if roll < 0.15:
                return Skip()
            target, expr = self.assignment()
            if roll < 0.3:
                _, other = self.assignment()
                return UniformAssign(target, (expr, Mod(other, const(self.sizes[target]))))
            return Assign(target, expr)
        roll = self.rng.random()
        if roll < 0.35:
            return Seq(self.statement(depth + 1), self.statement(depth + 1))
        if roll < 0.6:
            return ProbChoice(self.statement(depth + 1), self.probability(), self.statement(depth + 1))
        if roll < 0.9:
            guard1 = self.guard()
            guard2 = Or(self.guard(), Not(guard1))
            return GuardedChoice(guard1, self.statement(depth + 1), guard2, self.statement(depth + 1))
        return IfElse(self.guard(), self.statement(depth + 1), self.statement(depth + 1))

    def post(self):
        roll = self.rng.random()
        if roll < 0.4:
            return self.var()
        if roll < 0.7:
            return Add(self.var(), Mul(const(self.rng.randint(1, 3)), self.var()))
        return Iverson(self.guard())

    def generate(self):
        domain = self.domain()
        return domain, self.statement(), self.post()

    def generate_loop(self):
        """A loop-free prefix followed by one loop.

        The invariant is ``[guard] * b + [!guard] * post`` where ``b`` is the
        largest value of ``post`` on the domain, so it is always a
        dwp-superinvariant.
        """
        domain = self.domain()
        prefix = self.statement(self.max_depth - 2)
        guard = self.guard()
        body = self.statement(self.max_depth - 2)
        post = self.post()
        bound, _ = max_on_domain(post, domain)
        invariant = Add(Mul(Iverson(guard), const(bound)), Mul(Iverson(Not(guard)), post))
        return domain, Seq(prefix, While(guard, body, invariant)), post

    def expectation(self, depth: int = 0):
        """Random expectation tree over arithmetic, lattice and guard operators."""
        if depth >= 3 or self.rng.random() < 0.3:
            return self.arithmetic()
        roll = self.rng.random()
        left, right = self.expectation(depth + 1), self.expectation(depth + 1)
        if roll < 0.2:
            return Add(left, right)
        if roll < 0.35:
            return Mul(left, right)
        if roll < 0.5:
            return Min(left, right)
        if roll < 0.65:
            return Max(left, right)
        if roll < 0.75:
            return Monus(left, right)
        if roll < 0.9:
            return Mul(Iverson(self.guard()), left)
        return GuardImp(self.guard(), left)


def random_programs(seed: int, count: int, max_depth: int = 5):
    generator = ProgramGenerator(random.Random(seed), max_depth)
    return [generator.generate() for _ in range(count)]


def random_loop_programs(seed: int, count: int, max_depth: int = 5):
    generator = ProgramGenerator(random.Random(seed), max_depth)
    return [generator.generate_loop() for _ in range(count)]


@pytest.fixture
def program_corpus(seed):
    def build(count: int, max_depth: int = 5):
        return random_programs(seed, count, max_depth)
    return build


@pytest.fixture
def loop_corpus(seed):
    def build(count: int, max_depth: int = 5):
        return random_loop_programs(seed, count, max_depth)
    return build


@pytest.fixture
def generator(seed):
    return ProgramGenerator(random.Random(seed))
