import math

import numpy as np
import pytest
from hypothesis import strategies as st

from mvtransfer.trigmat import MatTrigPoly, make_filter

S2 = 1 / math.sqrt(2)
# autocorrelation of the unit-norm box on [0, 3]
CORR = MatTrigPoly.scalar({0: 1.0, 1: 2 / 3, -1: 2 / 3, 2: 1 / 3, -2: 1 / 3})

ACCEPTANCE_LINES = {}


def record(criterion: int, ok: bool, detail: str = ""):
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def haar():
    return make_filter(MatTrigPoly.scalar({0: S2, 1: S2}), 2, name="haar")


@pytest.fixture(scope="session")
def stretched():
    return make_filter(MatTrigPoly.scalar({0: S2, 3: S2}), 2, name="stretched_haar")


@pytest.fixture(scope="session")
def diag_haar():
    return make_filter(MatTrigPoly.from_dict({0: np.diag([S2, 1.0]), 1: np.diag([S2, 0.0])}), 2, name="diag_haar_one")


@pytest.fixture(scope="session")
def corr():
    return CORR


def polys(rows=1, cols=None, max_deg=3):
    """Hypothesis strategy for small random matrix polynomials."""
    cols = rows if cols is None else cols
    floats = st.floats(-2, 2, allow_nan=False, allow_infinity=False)

    @st.composite
    def build(draw):
        lo = draw(st.integers(-max_deg, max_deg))
        n = draw(st.integers(1, max_deg + 1))
        re = np.array(draw(st.lists(floats, min_size=n * rows * cols, max_size=n * rows * cols)))
        im = np.array(draw(st.lists(floats, min_size=n * rows * cols, max_size=n * rows * cols)))
        return MatTrigPoly((re + 1j * im).reshape(n, rows, cols), lo)

    return build()
