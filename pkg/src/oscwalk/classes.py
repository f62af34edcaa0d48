"""Irreducible class structure of the oscillating walk and its crossing chain.

Infinite classes are described symbolically: a residue class, an interval
and a finite exclusion set, plus (for two-sided supports) a periodic family
of holes.  Nothing infinite is ever enumerated except by the reachability
oracle, which works on an explicit window and is the ground truth the
closed-form routines are tested against.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import NotCovered, PreconditionError
from .measures import (
    MIXED,
    STRICTLY_NEGATIVE,
    STRICTLY_POSITIVE,
    LatticeMeasure,
    support_summary,
    truncate,
)

INF = math.inf


def _bound_json(v):
    return None if isinstance(v, float) and math.isinf(v) else int(v)


@dataclass(frozen=True)
class HolePattern:
    """Periodic set {x : x mod modulus in residues} on one side of ``bound``.

    ``side = +1`` selects x >= bound, ``side = -1`` selects x <= bound.
    """

    modulus: int
    residues: frozenset
    bound: int
    side: int

    def __contains__(self, x: int) -> bool:
        on_side = x >= self.bound if self.side > 0 else x <= self.bound
        return on_side and (x % self.modulus) in self.residues

    def to_json(self) -> dict:
        return {"modulus": self.modulus, "residues": sorted(self.residues),
                "bound": self.bound, "side": "above" if self.side > 0 else "below"}


@dataclass(frozen=True)
class ClassDescriptor:
    """The set {x = r mod modulus} cap [lower, upper], minus exclusions."""

    r: int
    lower: float
    upper: float
    excluded: frozenset = frozenset()
    modulus: int = 1
    holes: HolePattern | None = None

    def __contains__(self, x) -> bool:
        x = int(x)
        if x % self.modulus != self.r % self.modulus:
            return False
        if not (self.lower <= x <= self.upper):
            return False
        if x in self.excluded:
            return False
        return self.holes is None or x not in self.holes

    def members(self, window) -> list[int]:
        lo, hi = window
        lo = int(max(lo, self.lower)) if not math.isinf(self.lower) else int(lo)
        hi = int(min(hi, self.upper)) if not math.isinf(self.upper) else int(hi)
        return [x for x in range(lo, hi + 1) if x in self]

    @property
    def is_finite(self) -> bool:
        return not (math.isinf(self.lower) or math.isinf(self.upper))

    def to_json(self) -> dict:
        out = {"r": self.r, "lower": _bound_json(self.lower), "upper": _bound_json(self.upper),
               "excluded": sorted(int(x) for x in self.excluded)}
        if self.modulus != 1:
            out["modulus"] = self.modulus
        if self.holes is not None:
            out["holes"] = self.holes.to_json()
        return out


@dataclass(frozen=True)
class ClassDecomposition:
    """Essential classes (one per residue mod ``delta``) and transient states.

    ``transient_classes`` lists transient irreducible classes with more than
    one state; any other transient state is its own class.  Oracle results
    also carry the states excluded from comparisons (``boundary``) and the
    residues of the essential classes reachable from each transient state
    (``absorbing``).
    """

    delta: int
    classes: tuple[ClassDescriptor, ...]
    transient_classes: tuple[ClassDescriptor, ...] = ()
    window: tuple[int, int] | None = None
    method: str = "onesided"
    boundary: frozenset = frozenset()
    absorbing: Mapping[int, tuple[int, ...]] | None = None

    def essential_index(self, x: int) -> int | None:
        for i, c in enumerate(self.classes):
            if x in c:
                return i
        return None

    def essential_class(self, x: int) -> ClassDescriptor | None:
        i = self.essential_index(x)
        return None if i is None else self.classes[i]

    def is_essential(self, x: int) -> bool:
        return self.essential_index(x) is not None

    def class_key(self, x: int) -> tuple:
        """Hashable label of the irreducible class of ``x``.

        Two states share a key iff they communicate.  Keys are only
        comparable within one decomposition.
        """
        i = self.essential_index(x)
        if i is not None:
            return ("E", i)
        for j, c in enumerate(self.transient_classes):
            if x in c:
                return ("T", j)
        return ("S", int(x))

    def absorbing_residues(self, x: int) -> tuple[int, ...]:
        """Residues of the essential classes the chain can end up in from x."""
        if self.absorbing is not None and int(x) in self.absorbing:
            return self.absorbing[int(x)]
        i = self.essential_index(x)
        if i is not None:
            return (self.classes[i].r,)
        return (int(x) % self.delta,)

    @property
    def interior(self) -> list[int]:
        if self.window is None:
            return []
        lo, hi = self.window
        return [x for x in range(lo, hi + 1) if x not in self.boundary]

    def transient_states(self, window=None) -> list[int]:
        lo, hi = window or self.window
        return [x for x in range(lo, hi + 1)
                if not self.is_essential(x) and x not in self.boundary]

    def to_json(self, window=None) -> dict:
        win = window or self.window
        out = {"delta": self.delta, "method": self.method,
               "classes": [c.to_json() for c in self.classes]}
        if self.transient_classes:
            out["transient_classes"] = [c.to_json() for c in self.transient_classes]
        if win is not None:
            out["window"] = list(win)
            out["transient"] = [
                {"x": x, "absorbed_r": list(self.absorbing_residues(x))
                 if self.method == "oracle" else self.absorbing_residues(x)[0]}
                for x in self.transient_states(win)]
        if self.method == "oracle":
            out["boundary"] = sorted(int(x) for x in self.boundary)
        return out


# -- analytic decompositions ---------------------------------------------------

def _default_window(lower, upper, pad: int = 10) -> tuple[int, int]:
    lo = -50 if math.isinf(lower) else int(lower) - pad
    hi = 50 if math.isinf(upper) else int(upper) + pad
    return lo, hi


def essential_classes_onesided(mu: LatticeMeasure, mu_prime: LatticeMeasure,
                               window=None) -> ClassDecomposition:
    """Classes when mu lives on Z+ and mu_prime on Z-.

    There are ``delta = gcd(d, d')`` essential classes
    ``{D', ..., D-1} cap (r + delta Z)``; every state outside ``[D', D-1]``
    is transient and ends up in the class of its own residue.
    """
    s, sp = support_summary(mu), support_summary(mu_prime)
    if s.sign_class != STRICTLY_POSITIVE or sp.sign_class != STRICTLY_NEGATIVE:
        raise PreconditionError(
            "essential_classes_onesided needs mu on Z+ and mu' on Z-; "
            "use essential_classes_general for two-sided supports")
    delta = math.gcd(s.gcd, sp.gcd)
    D, Dp = s.max_site, sp.min_site
    upper = INF if math.isinf(D) else D - 1
    classes = tuple(ClassDescriptor(r, Dp, upper, modulus=delta) for r in range(delta))
    return ClassDecomposition(delta, classes, (), window or _default_window(Dp, upper),
                              "onesided")


def _split_parts(m: LatticeMeasure):
    sites = m.sites()
    return sites[sites > 0], sites[sites < 0]


def essential_classes_general(mu: LatticeMeasure, mu_prime: LatticeMeasure,
                              window=None) -> ClassDecomposition:
    """Classes when both supports have positive and negative parts and d != d'."""
    if not (mu.is_finite and mu_prime.is_finite):
        raise NotCovered("two-sided supports are only available as finite atom lists")
    mu_pos, mu_neg = _split_parts(mu)
    mp_pos, mp_neg = _split_parts(mu_prime)
    if not (len(mu_pos) and len(mu_neg) and len(mp_pos) and len(mp_neg)):
        raise NotCovered("each support needs a nonempty positive and negative part")
    d, dp = support_summary(mu).gcd, support_summary(mu_prime).gcd
    if d == dp:
        raise NotCovered("d == d' with two-sided supports is not described analytically")
    delta = math.gcd(d, dp)
    D, Dp = int(mu_pos.max()), int(mp_neg.min())
    holes = None
    transient: tuple[ClassDescriptor, ...] = ()
    if D < dp:
        # transient states {D, ..., d'-1} + d' Z0+
        holes = HolePattern(dp, frozenset(range(D, dp)), D, +1)
        transient = tuple(ClassDescriptor(j, D, INF, modulus=dp) for j in range(D, dp))
    elif Dp > -d:
        # transient states {-d, ..., D'-1} + d Z0-
        res = frozenset(j % d for j in range(-d, Dp))
        holes = HolePattern(d, res, Dp - 1, -1)
        transient = tuple(ClassDescriptor(j, -INF, Dp - 1, modulus=d) for j in sorted(res))
    classes = tuple(ClassDescriptor(r, -INF, INF, modulus=delta, holes=holes)
                    for r in range(delta))
    return ClassDecomposition(delta, classes, transient, window or (-50, 50), "general")


def essential_classes(mu: LatticeMeasure, mu_prime: LatticeMeasure, window=None) -> ClassDecomposition:
    """Dispatch to the one-sided or general description; NotCovered otherwise."""
    s, sp = support_summary(mu), support_summary(mu_prime)
    if s.sign_class == STRICTLY_POSITIVE and sp.sign_class == STRICTLY_NEGATIVE:
        return essential_classes_onesided(mu, mu_prime, window)
    if s.sign_class == MIXED and sp.sign_class == MIXED:
        return essential_classes_general(mu, mu_prime, window)
    raise NotCovered(
        f"supports of sign classes ({s.sign_class}, {sp.sign_class}) are not covered")


# -- crossing classes ----------------------------------------------------------

@dataclass(frozen=True)
class CrossingClass:
    """Essential class of the crossing chain inside I(r), split by sign.

    ``noncrossing`` is N(r): states of I(r) never occupied at a crossing time.
    ``plus_gaps`` / ``minus_gaps`` are the (1-based) indices of the support
    gaps that are too wide to be bridged from the other side.
    """

    r: int
    plus_side: ClassDescriptor
    minus_side: ClassDescriptor
    noncrossing: frozenset
    plus_gaps: tuple[int, ...] = ()
    minus_gaps: tuple[int, ...] = ()

    def __contains__(self, x) -> bool:
        return x in self.plus_side or x in self.minus_side

    @property
    def plus_is_full(self) -> bool:
        return not self.plus_side.excluded

    @property
    def minus_is_full(self) -> bool:
        return not self.minus_side.excluded

    def members(self, window) -> list[int]:
        return sorted(self.minus_side.members(window) + self.plus_side.members(window))

    def to_json(self) -> dict:
        return {"r": self.r, "plus": self.plus_side.to_json(),
                "minus": self.minus_side.to_json(),
                "noncrossing": sorted(int(x) for x in self.noncrossing)}


def _gap_indices(sites: np.ndarray, limit: float) -> list[tuple[int, int, int]]:
    """(k, a_{k-1}, a_k) for each successive gap a_k - a_{k-1} > limit, with a_0 = 0."""
    prev, out = 0, []
    for k, a in enumerate(sites, start=1):
        if a - prev > limit:
            out.append((k, prev, int(a)))
        prev = int(a)
    return out


def crossing_class(r: int, decomposition: ClassDecomposition,
                   mu: LatticeMeasure, mu_prime: LatticeMeasure) -> CrossingClass:
    """I_C(r) and the non-crossing set N(r) from the support gaps.

    The plus side loses, for every gap a_k - a_{k-1} wider than -D', the
    states a_{k-1} + r + delta*s with 0 <= s < (a_k - a_{k-1} + D')/delta;
    symmetrically on the minus side with the gaps of -S_mu' against D.
    """
    s, sp = support_summary(mu), support_summary(mu_prime)
    if s.sign_class != STRICTLY_POSITIVE or sp.sign_class != STRICTLY_NEGATIVE:
        raise PreconditionError("crossing classes are defined for one-sided supports")
    delta = decomposition.delta
    if not 0 <= r < delta:
        raise ValueError(f"residue {r} outside [0, {delta})")
    D, Dp = s.max_site, sp.min_site

    n_plus: set[int] = set()
    plus_gaps: list[int] = []
    if mu.is_finite and not math.isinf(Dp):
        for k, a_prev, a_k in _gap_indices(mu.sites(), -Dp):
            plus_gaps.append(k)
            count = (a_k - a_prev + Dp) // delta
            n_plus.update(a_prev + r + delta * j for j in range(count))

    n_minus: set[int] = set()
    minus_gaps: list[int] = []
    if mu_prime.is_finite and not math.isinf(D):
        b = np.sort(-mu_prime.sites())
        for l, b_prev, b_l in _gap_indices(b, D):
            minus_gaps.append(l)
            first = (b_prev - b_l + D) // delta
            n_minus.update(-b_prev + r + delta * j for j in range(first, 0))

    upper = INF if math.isinf(D) else D - 1
    plus = ClassDescriptor(r, 0, upper, frozenset(n_plus), modulus=delta)
    minus = ClassDescriptor(r, Dp, -1, frozenset(n_minus), modulus=delta)
    return CrossingClass(r, plus, minus, frozenset(n_plus | n_minus),
                         tuple(plus_gaps), tuple(minus_gaps))


def crossing_classes(mu: LatticeMeasure, mu_prime: LatticeMeasure) -> list[CrossingClass]:
    dec = essential_classes_onesided(mu, mu_prime)
    return [crossing_class(r, dec, mu, mu_prime) for r in range(dec.delta)]


# -- reachability oracle -------------------------------------------------------

def _active_sites(alpha: float, neg_sites, pos_sites):
    """Jump sets used at x <= -1, x = 0 and x >= 1."""
    if alpha == 0:
        zero = pos_sites
    elif alpha == 1:
        zero = neg_sites
    else:
        zero = np.union1d(neg_sites, pos_sites)
    return neg_sites, zero, pos_sites


def reachability_oracle(mu: LatticeMeasure, mu_prime: LatticeMeasure, alpha: float = 0.0,
                        window=(-60, 60), max_hops: int | None = None,
                        eps_mass: float = 1e-9) -> ClassDecomposition:
    """Brute-force class decomposition from the jump graph on ``window``.

    Edges x -> x + s use the support active at x.  Edges leaving the window
    are dropped; states with a dropped edge, and every state within one
    maximal jump of the window edge, are reported in ``boundary`` and should
    not be compared.  Parametric tails are truncated at ``eps_mass``; states
    at distance >= cap - 1 from 0 then also count as boundary.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    lo, hi = (int(window[0]), int(window[1]))
    neg_sites = truncate(mu, eps_mass).sites
    pos_sites = truncate(mu_prime, eps_mass).sites
    jump = int(max(np.abs(neg_sites).max(), np.abs(pos_sites).max()))
    if hi - lo + 1 < 2 * jump + 1:
        raise ValueError(f"window {window} is smaller than the jump range {jump}")
    at_neg, at_zero, at_pos = _active_sites(alpha, neg_sites, pos_sites)

    n = hi - lo + 1
    states = np.arange(lo, hi + 1)
    src, dst, cut = [], [], set()
    for x in states:
        steps = at_neg if x < 0 else (at_zero if x == 0 else at_pos)
        y = x + steps
        inside = (y >= lo) & (y <= hi)
        if not inside.all():
            cut.add(int(x))
        src.append(np.full(int(inside.sum()), x - lo))
        dst.append(y[inside] - lo)
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    graph = csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    n_comp, labels = connected_components(graph, directed=True, connection="strong")

    leaves = labels[src] != labels[dst]
    closed = np.ones(n_comp, dtype=bool)
    closed[labels[src][leaves]] = False

    all_sites = np.concatenate([neg_sites, pos_sites])
    delta = int(np.gcd.reduce(np.abs(all_sites)))

    members: dict[int, list[int]] = {}
    for i, c in enumerate(labels):
        members.setdefault(int(c), []).append(int(states[i]))

    def describe(xs):
        xs = sorted(xs)
        step = delta if delta else 1
        lattice = set(range(xs[0], xs[-1] + 1, step))
        return ClassDescriptor(xs[0] % step, xs[0], xs[-1],
                               frozenset(lattice - set(xs)), modulus=step)

    ess_ids = sorted((c for c in members if closed[c]), key=lambda c: members[c][0])
    tr_ids = sorted((c for c in members if not closed[c]), key=lambda c: members[c][0])
    classes = tuple(describe(members[c]) for c in ess_ids)
    transient = tuple(describe(members[c]) for c in tr_ids)
    ess_residue = {c: members[c][0] % (delta or 1) for c in ess_ids}

    # essential classes reachable from each component, via the condensation
    succ: dict[int, set[int]] = {c: set() for c in members}
    for a, b in zip(labels[src][leaves], labels[dst][leaves]):
        succ[int(a)].add(int(b))
    reach = _closed_reach(succ, closed)

    absorbing: dict[int, tuple[int, ...]] = {}
    for c in tr_ids:
        if max_hops is None:
            targets = reach[c]
        else:
            targets = _bounded_reach(c, succ, closed, max_hops)
        res = tuple(sorted({ess_residue[t] for t in targets}))
        for x in members[c]:
            absorbing[x] = res

    edge_zone = {x for x in range(lo, hi + 1) if x < lo + jump or x > hi - jump}
    if truncate(mu, eps_mass).lost_mass > 0 or truncate(mu_prime, eps_mass).lost_mass > 0:
        # far states are entered only through jumps beyond the truncation cap
        edge_zone |= {x for x in range(lo, hi + 1) if not -jump < x < jump - 1}
    return ClassDecomposition(delta, classes, transient, (lo, hi), "oracle",
                              frozenset(cut | edge_zone), absorbing)


def _closed_reach(succ: dict[int, set[int]], closed) -> dict[int, frozenset]:
    """For every node of the condensation DAG, the closed nodes it reaches."""
    indeg = {c: 0 for c in succ}
    for c in succ:
        for s in succ[c]:
            indeg[s] += 1
    order, queue = [], deque(c for c in succ if indeg[c] == 0)
    while queue:
        c = queue.popleft()
        order.append(c)
        for s in succ[c]:
            indeg[s] -= 1
            if indeg[s] == 0:
                queue.append(s)
    reach: dict[int, frozenset] = {}
    for c in reversed(order):
        acc = {c} if closed[c] else set()
        for s in succ[c]:
            acc |= reach[s]
        reach[c] = frozenset(acc)
    return reach


def _bounded_reach(c, succ, closed, max_hops):
    seen, frontier, found = {c}, deque([(c, 0)]), set()
    while frontier:
        node, depth = frontier.popleft()
        if closed[node]:
            found.add(node)
        if depth >= max_hops:
            continue
        for s in succ[node]:
            if s not in seen:
                seen.add(s)
                frontier.append((s, depth + 1))
    return found


def disagreements(analytic: ClassDecomposition, oracle: ClassDecomposition,
                  states: Iterable[int] | None = None) -> list[str]:
    """Differences between two decompositions on the oracle's interior states.

    Compares essential/transient status, the partition into irreducible
    classes, and the residues of the essential classes reachable from
    transient states.  An empty list means agreement.
    """
    xs = list(oracle.interior if states is None else states)
    problems: list[str] = []
    fwd: dict[tuple, tuple] = {}
    back: dict[tuple, tuple] = {}
    for x in xs:
        ea, eo = analytic.is_essential(x), oracle.is_essential(x)
        if ea != eo:
            problems.append(f"x={x}: essential analytic={ea} oracle={eo}")
            continue
        ka, ko = analytic.class_key(x), oracle.class_key(x)
        if fwd.setdefault(ka, ko) != ko or back.setdefault(ko, ka) != ka:
            problems.append(f"x={x}: class partition differs ({ka} vs {ko})")
        if not ea:
            ra = set(analytic.absorbing_residues(x))
            ro = set(oracle.absorbing_residues(x))
            if ra != ro:
                problems.append(f"x={x}: absorbing residues analytic={sorted(ra)} oracle={sorted(ro)}")
    return problems
