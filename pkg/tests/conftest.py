import math
from fractions import Fraction

import numpy as np
import pytest

from stokesbench.algebra import ExactComplex, MatrixSeries
from stokesbench.params import Params

_ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail=""):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {title}" + (f" ({detail})" if detail else "")
    _ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_exact_series(rng, order, den=7, span=5):
    def q():
        return ExactComplex(Fraction(int(rng.integers(-span, span + 1)), int(rng.integers(1, den + 1))),
                            Fraction(int(rng.integers(-span, span + 1)), int(rng.integers(1, den + 1))))

    mats = [[[q(), q()], [q(), q()]] for _ in range(order + 1)]
    return MatrixSeries.from_list(mats, exact=True)


def random_float_series(rng, order):
    c = rng.normal(size=(order + 1, 2, 2)) + 1j * rng.normal(size=(order + 1, 2, 2))
    return MatrixSeries(c)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


X111 = Params.of(1, 1, 1)
RESONANT = Params.of(0, 1, 1)
TWO_PI = 2 * math.pi
