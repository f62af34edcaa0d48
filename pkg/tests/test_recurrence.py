import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oscwalk import LatticeMeasure
from oscwalk.errors import PreconditionError
from oscwalk.recurrence import (
    DRIFT_FINITE_MEAN,
    HOLDER_CENTERED,
    HOLDER_DRIFT,
    HOLDER_MIXED,
    HOLDER_MIXED_SWAPPED,
    NO_RULE,
    ONESIDED_FINITE_MEAN,
    ONESIDED_HOLDER,
    POSITIVE_RECURRENT,
    RECURRENT,
    UNKNOWN,
    MomentProfile,
    classify,
    classify_profile,
    hypothesis_check,
    kemperman_diagnostic,
)

import oracles

SRW = LatticeMeasure.finite({-1: 0.5, 1: 0.5})


@pytest.mark.parametrize("mu, mup, cls, rule", [
    (LatticeMeasure.geometric(0.5), LatticeMeasure.geometric(0.5, "negative"),
     POSITIVE_RECURRENT, ONESIDED_FINITE_MEAN),
    (SRW, SRW, RECURRENT, HOLDER_CENTERED),
    (LatticeMeasure.power(1.6), LatticeMeasure.power(1.6, "negative"), RECURRENT, HOLDER_DRIFT),
    (LatticeMeasure.power(1.4), LatticeMeasure.power(1.4, "negative"), UNKNOWN, NO_RULE),
    (LatticeMeasure.finite({-1: 0.3, 2: 0.7}), LatticeMeasure.finite({1: 0.3, -2: 0.7}),
     POSITIVE_RECURRENT, DRIFT_FINITE_MEAN),
])
def test_truth_table(mu, mup, cls, rule):
    v = classify(mu, mup)
    assert (v.classification, v.rule) == (cls, rule)
    assert v.recurrent_for_all_alpha == (cls != UNKNOWN)


def test_unknown_carries_tail_sum_evidence():
    v = classify(LatticeMeasure.power(1.4), LatticeMeasure.power(1.4, "negative"))
    assert v.evidence["tail_sum"]["verdict"] == "diverging"
    assert v.evidence["moment_plus_0.5"] == "inf"


def test_power_one_sided_records_all_rules():
    v = classify(LatticeMeasure.power(1.6), LatticeMeasure.power(1.6, "negative"))
    assert v.rules_satisfied == (HOLDER_DRIFT, ONESIDED_HOLDER)
    assert v.p == 0.5


def test_grid_search_finds_other_split():
    # needs p < 0.3 on the left and q = 1 - p < 0.9 on the right
    mu, mup = LatticeMeasure.power(1.3), LatticeMeasure.power(1.9, "negative")
    v = classify(mu, mup)
    assert v.classification == RECURRENT
    assert v.p == pytest.approx(0.2)


def test_periodic_supports_scope():
    v = classify(LatticeMeasure.finite({2: 1.0}), LatticeMeasure.finite({-4: 1.0}))
    assert v.scope == "each essential class"
    assert v.notes


def _profile(mp, mm, mpp, mpm, plus=lambda p: 1.0, minus=lambda q: 1.0, onesided=False):
    return MomentProfile(mp, mm, mpp, mpm, plus, minus, onesided)


@pytest.mark.parametrize("prof, rule", [
    # drift on the left, centered on the right
    (_profile(math.inf, 1.0, 1.0, 1.0), HOLDER_MIXED),
    (_profile(1.0, 1.0, 1.0, math.inf), HOLDER_MIXED_SWAPPED),
    (_profile(2.0, 1.0, 1.0, 1.0, plus=lambda p: math.inf), NO_RULE),
])
def test_profile_branches(prof, rule):
    assert classify_profile(prof).rule == rule


def test_profile_rejects_bad_split():
    with pytest.raises(ValueError):
        classify_profile(_profile(1, 1, 1, 1), p=1.0)


@given(st.floats(1.05, 3.5), st.floats(1.05, 3.5))
def test_verdict_monotone_in_tails(s, sp):
    """Lighter tails never weaken the verdict."""
    rank = {UNKNOWN: 0, RECURRENT: 1, POSITIVE_RECURRENT: 2}
    heavy = classify(LatticeMeasure.power(s), LatticeMeasure.power(sp, "negative"))
    light = classify(LatticeMeasure.power(s + 0.5), LatticeMeasure.power(sp + 0.5, "negative"))
    assert rank[light.classification] >= rank[heavy.classification]


def test_hypotheses():
    h = hypothesis_check(SRW, SRW)
    assert (h.H, h.H_prime) == ("centered", "centered")
    bad = hypothesis_check(LatticeMeasure.finite({-2: 0.7, 1: 0.3}), SRW)
    assert bad.H is None and not bad.both


def test_kemperman_refuses_without_hypotheses():
    with pytest.raises(PreconditionError):
        kemperman_diagnostic(LatticeMeasure.finite({-2: 0.7, 1: 0.3}), SRW)


def test_kemperman_point_masses():
    est = kemperman_diagnostic(LatticeMeasure.point(1), LatticeMeasure.point(-1), h_max=5,
                               n_sim=100)
    assert np.all(est.C_hat == 1.0) and np.all(est.C_prime_hat == 1.0)
    assert est.partial_sums.tolist() == [1.0, 2.0, 3.0, 4.0, 5.0]
    assert not est.unreliable


@pytest.mark.parametrize("atoms", [
    {1: 0.5, 3: 0.5},
    {-1: 0.3, 2: 0.7},
    {-2: 0.2, 1: 0.5, 3: 0.3},
])
def test_kemperman_matches_exact_visits(atoms):
    h_max = 10
    mu = LatticeMeasure.finite(atoms)
    mup = LatticeMeasure.finite({-k: w for k, w in atoms.items()})
    est = kemperman_diagnostic(mu, mup, h_max=h_max, n_sim=40000, seed=3)
    exact = np.array(oracles.kemperman_exact(atoms, h_max))
    assert np.all(np.abs(est.C_hat - exact) <= 5 * est.C_se + 1e-12)
    assert np.all(np.abs(est.C_prime_hat - exact) <= 5 * est.C_prime_se + 1e-12)
    assert est.censored_plus == 0.0


def test_kemperman_flags_censoring():
    est = kemperman_diagnostic(SRW, SRW, h_max=5, n_sim=2000, max_len=20)
    assert est.unreliable
    assert any("unreliable" in n for n in est.notes)
