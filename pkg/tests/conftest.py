import itertools

import pytest

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from ghecheck.diffalg import ONE, ZERO, J, param

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SPECS = ["", "x", "y", "z", "xy", "yz", "xz", "xx"]
PARAMS = [ONE, 2 * ONE, -ONE, param("b"), param("a")]


@st.composite
def jet_monomials(draw, deps=("u", "v"), specs=SPECS, max_deg=3):
    deg = draw(st.integers(1, max_deg))
    out = ONE
    for _ in range(deg):
        out = out * J(draw(st.sampled_from(deps)), draw(st.sampled_from(specs)))
    return out


@st.composite
def polys(draw, deps=("u", "v"), specs=SPECS, max_terms=4, max_deg=3, coeffs=PARAMS):
    n = draw(st.integers(1, max_terms))
    out = ZERO
    for _ in range(n):
        out = out + draw(st.sampled_from(coeffs)) * draw(jet_monomials(deps, specs, max_deg))
    return out


@st.composite
def rationals(draw, deps=("u", "v"), specs=SPECS):
    """Polynomials divided by a power of u_yz."""
    p = draw(polys(deps, specs))
    k = draw(st.integers(0, 2))
    return p / J("u", "yz") ** k if k else p


def odd_copies(base, slots, specs=("", "x", "y", "z", "xy")):
    return [J("%s%d" % (base, k), s) for k, s in itertools.product(slots, specs)]


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_sink():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
