import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscwalk import LatticeMeasure
from oscwalk.classes import (
    crossing_classes,
    disagreements,
    essential_classes,
    essential_classes_general,
    essential_classes_onesided,
    reachability_oracle,
)
from oscwalk.errors import NotCovered, PreconditionError

import oracles
from conftest import _normalize, onesided_pairs


def _finite(sites):
    return LatticeMeasure.finite({s: 1.0 / len(sites) for s in sites})


def test_onesided_single_class(example_pair):
    dec = essential_classes(*example_pair)
    assert dec.delta == 1
    (c,) = dec.classes
    assert (c.lower, c.upper) == (-4, 9)
    assert dec.is_essential(9) and not dec.is_essential(10) and not dec.is_essential(-5)


def test_onesided_periodic_classes():
    dec = essential_classes(_finite([2, 6]), _finite([-4]))
    assert dec.delta == 2
    assert [c.r for c in dec.classes] == [0, 1]
    assert dec.essential_class(3).r == 1
    assert dec.absorbing_residues(11) == (1,)


def test_geometric_classes_unbounded(geometric_pair):
    dec = essential_classes(*geometric_pair)
    assert dec.delta == 1
    assert dec.classes[0].upper == math.inf and dec.classes[0].lower == -math.inf


def test_class_json_uses_null_for_infinite_bounds(geometric_pair):
    js = essential_classes(*geometric_pair).to_json()
    assert js["classes"][0]["upper"] is None


def test_example_crossing_class(example_pair):
    (cc,) = crossing_classes(*example_pair)
    assert sorted(cc.plus_side.excluded) == [4, 5]
    assert not cc.minus_side.excluded
    assert cc.plus_gaps == (3,)
    assert sorted(cc.noncrossing) == [4, 5]


def test_example_without_wide_gap():
    (cc,) = crossing_classes(_finite([2, 6, 10]), _finite([-4, -1]))
    assert cc.noncrossing == frozenset()


def test_minus_side_gap():
    (cc,) = crossing_classes(_finite([1, 2]), _finite([-1, -6]))
    # crossings downward start from 0 or 1, so the jump of -6 skips -2..-4
    assert cc.minus_gaps == (2,)
    assert -1 in cc and -6 in cc
    assert all(x not in cc for x in cc.minus_side.excluded)


def test_crossing_classes_need_onesided():
    with pytest.raises(PreconditionError):
        crossing_classes(_finite([-1, 1]), _finite([-1]))


def _crossing_graph(mu_atoms, mup_atoms):
    lo, hi = min(mup_atoms), max(mu_atoms) - 1
    g = nx.DiGraph()
    for x in range(lo, hi + 1):
        g.add_node(x)
        for y in oracles.crossing_row(mu_atoms, mup_atoms, x):
            g.add_edge(x, y)
    return g


@given(onesided_pairs(max_site=9))
@settings(max_examples=60, deadline=None)
def test_crossing_classes_match_crossing_chain(pair):
    """I_C is the set of recurrent states of the brute-force crossing chain."""
    mu_atoms, mup_atoms = pair
    g = _crossing_graph(mu_atoms, mup_atoms)
    cond = nx.condensation(g)
    recurrent = set()
    for c in cond.nodes:
        if cond.out_degree(c) == 0:
            recurrent |= cond.nodes[c]["members"]
    cls = crossing_classes(LatticeMeasure.finite(mu_atoms), LatticeMeasure.finite(mup_atoms))
    analytic = {x for x in g.nodes if any(x in c for c in cls)}
    assert analytic == recurrent


@given(onesided_pairs(max_site=12))
@settings(max_examples=60, deadline=None)
def test_onesided_matches_oracle(pair):
    mu, mup = LatticeMeasure.finite(pair[0]), LatticeMeasure.finite(pair[1])
    dec = essential_classes(mu, mup)
    oracle = reachability_oracle(mu, mup, 0.0, (-60, 60))
    assert disagreements(dec, oracle) == []


@st.composite
def two_sided_atoms(draw, max_site=6):
    pos = draw(st.lists(st.integers(1, max_site), min_size=1, max_size=3, unique=True))
    neg = draw(st.lists(st.integers(-max_site, -1), min_size=1, max_size=3, unique=True))
    sites = sorted(pos + neg)
    w = draw(st.lists(st.integers(1, 9), min_size=len(sites), max_size=len(sites)))
    return _normalize(sites, w)


@given(two_sided_atoms(), two_sided_atoms())
@settings(max_examples=150, deadline=None)
def test_general_matches_oracle_when_covered(a, b):
    mu, mup = LatticeMeasure.finite(a), LatticeMeasure.finite(b)
    try:
        dec = essential_classes(mu, mup)
    except NotCovered:
        return
    oracle = reachability_oracle(mu, mup, 0.0, (-60, 60))
    assert disagreements(dec, oracle) == []


def test_general_with_transient_band():
    # d = 1 on the left, d' = 4 on the right: from x >= 1 only multiples of 4 are reachable
    mu = LatticeMeasure.finite({-1: 0.5, 2: 0.5})
    mup = LatticeMeasure.finite({-4: 0.5, 4: 0.5})
    dec = essential_classes_general(mu, mup)
    oracle = reachability_oracle(mu, mup, 0.0, (-60, 60))
    assert disagreements(dec, oracle) == []
    assert dec.transient_classes


def test_equal_gcds_not_covered():
    srw = _finite([-1, 1])
    with pytest.raises(NotCovered):
        essential_classes(srw, srw)


def test_mixed_sign_classes_not_covered():
    with pytest.raises(NotCovered):
        essential_classes(_finite([1, 2]), _finite([-1, 1]))


def test_onesided_refuses_two_sided():
    with pytest.raises(PreconditionError):
        essential_classes_onesided(_finite([-1, 1]), _finite([-1]))


def test_oracle_window_must_fit_jumps():
    with pytest.raises(ValueError):
        reachability_oracle(_finite([30]), _finite([-30]), 0.0, (-10, 10))


def test_oracle_mixing_at_zero():
    # with alpha = 1 the walk at 0 jumps up, so 0 -> 1 is possible
    mu, mup = _finite([1]), _finite([-1])
    dec = reachability_oracle(mu, mup, 1.0, (-20, 20))
    assert dec.is_essential(1) and dec.is_essential(-1) is False
    dec0 = reachability_oracle(mu, mup, 0.0, (-20, 20))
    assert dec0.is_essential(-1) and not dec0.is_essential(1)


def test_reachability_oracle_against_plain_search():
    mu, mup = _finite([3, 5]), _finite([-2])
    dec = reachability_oracle(mu, mup, 0.0, (-60, 60))

    def succ(x):
        return [x + s for s in ((3, 5) if x < 0 else (-2,))]

    for x in dec.interior:
        back = all(x in oracles.reachable(y, succ, 200) for y in oracles.reachable(x, succ, 200))
        assert dec.is_essential(x) == back
