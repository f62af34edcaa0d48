import numpy as np
import pytest
from hypothesis import strategies as st

from oscwalk import LatticeMeasure


def _normalize(sites, weights):
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    atoms = dict(zip(sites, w[:-1]))
    atoms[sites[-1]] = 1.0 - float(np.sum(w[:-1]))
    return atoms


@st.composite
def onesided_atoms(draw, sign=1, max_site=8, max_atoms=4):
    sites = draw(st.lists(st.integers(1, max_site), min_size=1, max_size=max_atoms, unique=True))
    weights = draw(st.lists(st.integers(1, 9), min_size=len(sites), max_size=len(sites)))
    return _normalize([sign * s for s in sorted(sites)], weights)


@st.composite
def onesided_pairs(draw, max_site=8):
    return (draw(onesided_atoms(1, max_site)), draw(onesided_atoms(-1, max_site)))


def random_atoms(rng, sign, max_site=8, max_atoms=4):
    k = rng.integers(1, max_atoms + 1)
    sites = sorted(rng.choice(np.arange(1, max_site + 1), size=k, replace=False).tolist())
    return _normalize([sign * s for s in sites], rng.integers(1, 10, size=k))


def random_onesided_pairs(n, seed, max_site=8):
    rng = np.random.default_rng(seed)
    return [(random_atoms(rng, 1, max_site), random_atoms(rng, -1, max_site)) for _ in range(n)]


def as_measures(pair):
    return LatticeMeasure.finite(pair[0]), LatticeMeasure.finite(pair[1])


@pytest.fixture
def example_pair():
    """Supports {2, 4, 10} and {-4, -1}: a gap of 6 on the positive side."""
    return (LatticeMeasure.finite({2: 0.3, 4: 0.3, 10: 0.4}),
            LatticeMeasure.finite({-4: 0.5, -1: 0.5}))


@pytest.fixture
def geometric_pair():
    return LatticeMeasure.geometric(0.5, "positive"), LatticeMeasure.geometric(0.5, "negative")


# acceptance results, printed once at the end of the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
