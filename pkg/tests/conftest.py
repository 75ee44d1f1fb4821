import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from chronicle import linalg

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

SQ2 = np.sqrt(2.0)

finite = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)


def complex_arrays(shape):
    return st.tuples(hnp.arrays(np.float64, shape, elements=finite),
                     hnp.arrays(np.float64, shape, elements=finite)).map(lambda ri: ri[0] + 1j * ri[1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def zp():
    return linalg.operator([[1, 0], [0, 0]])


@pytest.fixture
def sigma_x():
    return linalg.operator([[0, 1], [1, 0]])


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    lines = test_acceptance.report_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
