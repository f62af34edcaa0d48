import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from oscwalk import LatticeMeasure, MeasureError, ZMeasure
from oscwalk.errors import PreconditionError, TruncationError
from oscwalk.measures import (
    MIXED,
    STRICTLY_NEGATIVE,
    STRICTLY_POSITIVE,
    convolve,
    cutoff,
    excess_mean,
    lower_tail,
    moment,
    potential,
    support_summary,
    tails,
    to_zmeasure,
    truncate,
    upper_tail,
)

from conftest import onesided_atoms


@pytest.mark.parametrize("atoms, msg", [
    ({}, "at least one"),
    ({1: 0.5, 2: 0.4}, "sum to"),
    ({1: 1.2, 2: -0.2}, "strictly positive"),
    ({1: 0.5, 2: 0.0, 3: 0.5}, "strictly positive"),
])
def test_finite_rejects_bad_atoms(atoms, msg):
    with pytest.raises(MeasureError, match=msg):
        LatticeMeasure.finite(atoms)


@pytest.mark.parametrize("cfg", [
    {"type": "geometric", "r": 1.0},
    {"type": "geometric", "r": 0.0},
    {"type": "power", "s": 1.0},
    {"type": "power"},
    {"type": "finite", "atoms": [1, 2]},
    {"type": "cauchy"},
    {"atoms": {"1": 1.0}},
])
def test_from_config_rejects(cfg):
    with pytest.raises(MeasureError):
        LatticeMeasure.from_config(cfg)


@pytest.mark.parametrize("m", [
    LatticeMeasure.finite({-3: 0.25, 2: 0.75}),
    LatticeMeasure.geometric(0.3, "negative"),
    LatticeMeasure.power(2.5, "positive"),
])
def test_config_round_trip(m):
    assert LatticeMeasure.from_config(m.to_config()) == m


def test_point_mass():
    m = LatticeMeasure.point(3)
    assert m.pmf(3) == 1.0 and m.pmf(2) == 0.0


@pytest.mark.parametrize("m, sign_class, gcd", [
    (LatticeMeasure.finite({2: 0.5, 4: 0.5}), STRICTLY_POSITIVE, 2),
    (LatticeMeasure.finite({-3: 0.5, -6: 0.5}), STRICTLY_NEGATIVE, 3),
    (LatticeMeasure.finite({-1: 0.5, 1: 0.5}), MIXED, 1),
    (LatticeMeasure.geometric(0.5, "negative"), STRICTLY_NEGATIVE, 1),
    (LatticeMeasure.power(1.5), STRICTLY_POSITIVE, 1),
])
def test_support_summary(m, sign_class, gcd):
    s = support_summary(m)
    assert s.sign_class == sign_class
    assert s.gcd == gcd


def test_geometric_pmf_and_tails():
    m = LatticeMeasure.geometric(0.5)
    assert m.pmf(np.arange(0, 4)).tolist() == [0.0, 0.5, 0.25, 0.125]
    assert upper_tail(m, 3) == 0.125
    assert upper_tail(m, -2) == 1.0
    neg = m.mirror()
    assert lower_tail(neg, 3) == 0.125
    assert tails(m, 2) == (0.25, 0.0)


def test_power_tail_matches_hurwitz_zeta():
    m = LatticeMeasure.power(2.2)
    want = special.zeta(2.2, 11) / special.zeta(2.2, 1)
    assert upper_tail(m, 10) == pytest.approx(want, rel=1e-14)
    direct = math.fsum(k ** -2.2 for k in range(1, 11)) / special.zeta(2.2, 1)
    assert upper_tail(m, 10) == pytest.approx(1 - direct, rel=1e-10)


def test_tails_reject_negative_index():
    with pytest.raises(PreconditionError):
        tails(LatticeMeasure.geometric(0.5), -1)


@pytest.mark.parametrize("m, n, want", [
    (LatticeMeasure.geometric(0.5), 0, 2.0),
    (LatticeMeasure.geometric(0.5), 3, 0.25),
    (LatticeMeasure.finite({1: 0.5, 3: 0.5}), 1, 1.0),
    (LatticeMeasure.power(1.8), 0, math.inf),
])
def test_excess_mean(m, n, want):
    assert excess_mean(m, n) == pytest.approx(want)


@pytest.mark.parametrize("m, p, part, want", [
    (LatticeMeasure.finite({-2: 0.5, 1: 0.5}), 1.0, "abs", 1.5),
    (LatticeMeasure.finite({-2: 0.5, 1: 0.5}), 2.0, "minus", 2.0),
    (LatticeMeasure.finite({-2: 0.5, 1: 0.5}), 1.0, "plus", 0.5),
    (LatticeMeasure.geometric(0.5), 1.0, "plus", 2.0),
    (LatticeMeasure.geometric(0.5), 2.0, "plus", 6.0),
    (LatticeMeasure.geometric(0.5), 1.0, "minus", 0.0),
    (LatticeMeasure.power(2.5), 1.5, "abs", math.inf),
])
def test_moments(m, p, part, want):
    assert moment(m, p, part) == pytest.approx(want, rel=1e-10)


def test_power_moment_below_threshold():
    m = LatticeMeasure.power(3.0)
    assert moment(m, 1.0) == pytest.approx(special.zeta(2.0) / special.zeta(3.0))


@pytest.mark.parametrize("eps", [1e-3, 1e-9, 1e-12])
def test_geometric_cutoff_is_minimal(eps):
    m = LatticeMeasure.geometric(0.7)
    K = cutoff(m, eps)
    assert upper_tail(m, K) <= eps < upper_tail(m, K - 1)


def test_power_cutoff_is_minimal():
    m = LatticeMeasure.power(3.0)
    K = cutoff(m, 1e-8)
    assert upper_tail(m, K) <= 1e-8 < upper_tail(m, K - 1)


def test_power_truncation_refuses_huge_cutoffs():
    with pytest.raises(TruncationError):
        truncate(LatticeMeasure.power(1.1), 1e-12)


@given(st.floats(0.05, 0.95), st.sampled_from([1e-4, 1e-8, 1e-12]), st.sampled_from([1, -1]))
def test_truncation_conserves_mass(r, eps, sign):
    tr = truncate(LatticeMeasure.geometric(r, sign), eps)
    assert tr.lost_mass <= eps
    assert math.fsum(tr.masses) + tr.lost_mass == pytest.approx(1.0, abs=1e-13)
    assert np.all(np.sign(tr.sites) == sign)


@given(onesided_atoms())
def test_finite_tail_identities(atoms):
    m = LatticeMeasure.finite(atoms)
    top = max(atoms)
    for n in range(-1, top + 1):
        want = math.fsum(w for k, w in atoms.items() if k > n)
        assert upper_tail(m, n) == pytest.approx(want, abs=1e-15)
    # sum_j>=0 H(j) is the mean of a Z+ measure
    assert excess_mean(m, 0) == pytest.approx(moment(m, 1.0), rel=1e-12)
    mir = m.mirror()
    assert lower_tail(mir, 1) == pytest.approx(upper_tail(m, 1), abs=1e-15)


@given(onesided_atoms(max_site=6))
@settings(max_examples=50)
def test_potential_solves_renewal_equation(atoms):
    """U = delta_0 + mu * U on [0, T], checked against a direct double sum."""
    m = LatticeMeasure.finite(atoms)
    T = 30
    U = potential(m, "positive", T).values
    for t in range(1, T + 1):
        assert U[t] == pytest.approx(math.fsum(w * U[t - k] for k, w in atoms.items() if k <= t),
                                     abs=1e-14)
    # renewal theorem: U(t) -> 1 / mean for aperiodic supports; convergence is
    # slow and oscillating near periodic supports, so average over 600 = 0 mod
    # every period up to 6
    if support_summary(m).gcd == 1:
        far = potential(m, "positive", 3000).values[-600:].mean()
        assert far == pytest.approx(1.0 / moment(m, 1.0), rel=1e-8)


def test_potential_negative_side_is_mirror():
    m = LatticeMeasure.finite({-1: 0.5, -3: 0.5})
    Up = potential(m, "negative", 10)
    U = potential(m.mirror(), "positive", 10)
    assert np.array_equal(Up.values, U.values)
    assert Up.at(-3) == U.at(3)
    assert Up.at(2) == 0.0


def test_potential_rejects_two_sided():
    with pytest.raises(PreconditionError, match="ladder"):
        potential(LatticeMeasure.finite({-1: 0.5, 1: 0.5}), "positive", 5)


def test_zmeasure_restrict_and_normalize():
    z = ZMeasure.from_dict({-2: 1.0, 0: 2.0, 3: 1.0})
    r = z.restrict((-1, 1))
    assert r.to_dict() == {0: 2.0}
    assert r.tail_bound == 2.0
    n = z.normalized()
    assert n.total() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ZMeasure(0, np.array([1.0, -1.0]))


def test_convolve_point_masses():
    a = to_zmeasure(LatticeMeasure.point(2))
    b = to_zmeasure(LatticeMeasure.finite({-1: 0.5, 1: 0.5}))
    c = convolve(a, b, (0, 5))
    assert c.to_dict() == {1: 0.5, 3: 0.5}
    assert c.tail_bound == 0.0
