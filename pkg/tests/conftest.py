import random
import sys
from fractions import Fraction

import pytest
from hypothesis import strategies as st

from etclosure.scalar_field import ScalarFn

small_rationals = st.fractions(min_value=-8, max_value=8, max_denominator=12)
positive_rationals = st.fractions(min_value=Fraction(1, 8), max_value=8, max_denominator=12)


@st.composite
def scalar_fns(draw, max_terms=4, logs=True, mu=True):
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        a = draw(st.integers(0, 4)) if mu else 0
        b = draw(st.integers(-4, 4))
        d = draw(st.integers(0, 2)) if logs else 0
        terms[(a, b, d)] = draw(small_rationals)
    return ScalarFn(terms)


def rand_fraction(rng: random.Random, bound: int = 64) -> Fraction:
    return Fraction(rng.randint(-bound, bound), rng.randint(1, bound))


@pytest.fixture
def rng():
    return random.Random(20261017)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
