import math

import numpy as np
import pytest
from hypothesis import settings

from planedyn.maps import conjugate, linear_hyperbolic, shear, translation
from planedyn.metrics import LyapunovMetric

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=60)
settings.load_profile("repo")

LN2 = math.log(2.0)


@pytest.fixture
def T():
    return translation()


@pytest.fixture
def LH():
    return linear_hyperbolic(2.0)


@pytest.fixture
def mC():
    return LyapunovMetric("C", 2.0)


@pytest.fixture
def mD():
    return LyapunovMetric("D", 2.0)


@pytest.fixture
def g():
    return conjugate(shear(0.5), translation())


@pytest.fixture
def mE():
    return LyapunovMetric("E", H=shear(0.5), base=LyapunovMetric("C", 2.0))


def level_curve(c, t0=-4.0, t1=4.0, n=801):
    """Vertices of the closed-form stable level set 2**x1 * x2 = c."""
    t = np.linspace(t0, t1, n)
    return np.column_stack([t, c * 2.0 ** -t])


ACCEPTANCE = {}


def record(n, ok, detail=""):
    """Log the PASS/FAIL line for an acceptance criterion."""
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
    ACCEPTANCE[n] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
