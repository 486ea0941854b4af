import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from resonant_breathing.polyspace import PhasePoly

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(rng, n_max, decay=0.0, scale=1.0):
    n = np.arange(n_max + 1)
    return scale * (rng.normal(size=n_max + 1) + 1j * rng.normal(size=n_max + 1)) * np.exp(-decay * n)


@st.composite
def gaussian_int_polys(draw, max_mode=4, max_degree=3, max_terms=5):
    """Sparse polynomials with small Gaussian-integer coefficients.

    Integer coefficients keep every bracket/product exact in floating point, so
    algebraic identities can be asserted with ==.
    """
    idx = st.integers(0, max_mode)
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        nb = draw(st.integers(0, max_degree))
        na = draw(st.integers(0, max_degree - nb))
        ab = tuple(draw(st.lists(idx, min_size=nb, max_size=nb)))
        a = tuple(draw(st.lists(idx, min_size=na, max_size=na)))
        c = complex(draw(st.integers(-3, 3)), draw(st.integers(-3, 3)))
        terms[(ab, a)] = terms.get((tuple(sorted(ab)), tuple(sorted(a))), 0) + c
    return PhasePoly(terms, max_mode)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.VERDICTS):
        terminalreporter.write_line(line)
