"""Recurrence classification from moment conditions, plus a Monte Carlo
estimate of the renewal functions that enter Kemperman's criterion.

The classifier only ever concludes (positive) recurrence.  Conditions are
checked in a fixed order and every condition that holds is recorded, so a
verdict can be audited against all of its supporting rules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from . import _engine
from .errors import PreconditionError, SimulationOverflow
from .invariants import tail_sum
from .measures import (
    FINITE,
    STRICTLY_NEGATIVE,
    STRICTLY_POSITIVE,
    LatticeMeasure,
    moment,
    support_summary,
)
from .simulate import make_sampler, stream_key

POSITIVE_RECURRENT = "PositiveRecurrent"
RECURRENT = "Recurrent"
UNKNOWN = "Unknown"

# rule identifiers, in firing order
ONESIDED_FINITE_MEAN = "onesided-finite-mean"
DRIFT_FINITE_MEAN = "drift-finite-mean"
HOLDER_DRIFT = "holder-drift"
HOLDER_CENTERED = "holder-centered"
HOLDER_MIXED = "holder-mixed"
HOLDER_MIXED_SWAPPED = "holder-mixed-swapped"
ONESIDED_HOLDER = "onesided-holder"
NO_RULE = "none"

P_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))
MEAN_REL_TOL = 1e-12

_RANK = {UNKNOWN: 0, RECURRENT: 1, POSITIVE_RECURRENT: 2}


def _equal_finite(a: float, b: float) -> bool:
    return math.isfinite(a) and math.isfinite(b) and abs(a - b) <= MEAN_REL_TOL * max(1.0, a, b)


@dataclass(frozen=True)
class Hypotheses:
    """Which disjunct ("drift" or "centered") of each hypothesis holds, if any."""

    H: str | None
    H_prime: str | None
    means: dict

    @property
    def both(self) -> bool:
        return self.H is not None and self.H_prime is not None

    def to_json(self) -> dict:
        return {"H": self.H, "H_prime": self.H_prime, "means": self.means}


def _side_condition(up: float, down: float) -> str | None:
    """drift when down < up (up may be infinite); centered when equal and finite."""
    if down < up:
        return "drift"
    if _equal_finite(up, down):
        return "centered"
    return None


def hypothesis_check(mu: LatticeMeasure, mu_prime: LatticeMeasure) -> Hypotheses:
    """(H): mu pushes upward or is centered; (H'): mu' pushes downward or is centered."""
    means = {
        "mean_plus": moment(mu, 1.0, "plus"),
        "mean_minus": moment(mu, 1.0, "minus"),
        "mean_prime_plus": moment(mu_prime, 1.0, "plus"),
        "mean_prime_minus": moment(mu_prime, 1.0, "minus"),
    }
    H = _side_condition(means["mean_plus"], means["mean_minus"])
    Hp = _side_condition(means["mean_prime_minus"], means["mean_prime_plus"])
    return Hypotheses(H, Hp, means)


@dataclass(frozen=True, eq=False)
class MomentProfile:
    """Everything the classifier looks at.

    ``plus_moment(p)`` is E[(xi^+)^p] and ``prime_minus_moment(q)`` is
    E[(xi'^-)^q].  Building the profile by hand lets tests probe the rule
    logic without constructing measures.
    """

    mean_plus: float
    mean_minus: float
    mean_prime_plus: float
    mean_prime_minus: float
    plus_moment: Callable[[float], float]
    prime_minus_moment: Callable[[float], float]
    onesided: bool

    @classmethod
    def from_measures(cls, mu: LatticeMeasure, mu_prime: LatticeMeasure) -> "MomentProfile":
        onesided = (support_summary(mu).sign_class == STRICTLY_POSITIVE
                    and support_summary(mu_prime).sign_class == STRICTLY_NEGATIVE)
        return cls(moment(mu, 1.0, "plus"), moment(mu, 1.0, "minus"),
                   moment(mu_prime, 1.0, "plus"), moment(mu_prime, 1.0, "minus"),
                   lambda p: moment(mu, p, "plus"), lambda q: moment(mu_prime, q, "minus"),
                   onesided)


@dataclass(frozen=True)
class Verdict:
    classification: str
    rule: str
    evidence: dict
    rules_satisfied: tuple = ()
    p: float | None = None
    recurrent_for_all_alpha: bool = False
    scope: str = "essential class"
    notes: tuple = ()

    def to_json(self) -> dict:
        return {"classification": self.classification, "rule": self.rule,
                "evidence": self.evidence, "rules_satisfied": list(self.rules_satisfied),
                "p": self.p, "recurrent_for_all_alpha": self.recurrent_for_all_alpha,
                "scope": self.scope, "notes": list(self.notes)}


def _fmt(x: float):
    return x if math.isfinite(x) else "inf"


def _holder_rules(prof: MomentProfile, p: float) -> tuple[list[str], dict]:
    """Moment rules that hold at the split (p, 1 - p), with the moments used."""
    q = 1.0 - p
    drift = prof.mean_minus < prof.mean_plus
    centered = _equal_finite(prof.mean_plus, prof.mean_minus)
    drift_p = prof.mean_prime_plus < prof.mean_prime_minus
    centered_p = _equal_finite(prof.mean_prime_plus, prof.mean_prime_minus)
    m_p = prof.plus_moment(p)
    m_1p = prof.plus_moment(1.0 + p)
    mp_q = prof.prime_minus_moment(q)
    mp_1q = prof.prime_minus_moment(1.0 + q)
    ev = {f"moment_plus_{p:g}": _fmt(m_p), f"moment_plus_{1 + p:g}": _fmt(m_1p),
          f"moment_prime_minus_{q:g}": _fmt(mp_q), f"moment_prime_minus_{1 + q:g}": _fmt(mp_1q)}
    left_drift = drift and math.isfinite(m_p)
    left_centered = centered and math.isfinite(m_1p)
    right_drift = drift_p and math.isfinite(mp_q)
    right_centered = centered_p and math.isfinite(mp_1q)
    fired = []
    if left_drift and right_drift:
        fired.append(HOLDER_DRIFT)
    if left_centered and right_centered:
        fired.append(HOLDER_CENTERED)
    if left_drift and right_centered:
        fired.append(HOLDER_MIXED)
    if left_centered and right_drift:
        fired.append(HOLDER_MIXED_SWAPPED)
    if prof.onesided and math.isfinite(m_p) and math.isfinite(mp_q):
        fired.append(ONESIDED_HOLDER)
    return fired, ev


def classify_profile(prof: MomentProfile, p: float = 0.5) -> Verdict:
    """Rule engine behind ``classify``; see there for the firing order."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    evidence = {"mean_plus": _fmt(prof.mean_plus), "mean_minus": _fmt(prof.mean_minus),
                "mean_prime_plus": _fmt(prof.mean_prime_plus),
                "mean_prime_minus": _fmt(prof.mean_prime_minus), "onesided": prof.onesided}
    satisfied: list[str] = []
    if prof.onesided and math.isfinite(prof.mean_plus) and math.isfinite(prof.mean_prime_minus):
        satisfied.append(ONESIDED_FINITE_MEAN)
    if (prof.mean_minus < prof.mean_plus < math.inf
            and prof.mean_prime_plus < prof.mean_prime_minus < math.inf):
        satisfied.append(DRIFT_FINITE_MEAN)

    split = None
    holder: list[str] = []
    for pp in (p,) + tuple(x for x in P_GRID if x != p):
        fired, ev = _holder_rules(prof, pp)
        if fired:
            split, holder = pp, fired
            evidence.update(ev)
            break
    satisfied += holder

    order = (ONESIDED_FINITE_MEAN, DRIFT_FINITE_MEAN, HOLDER_DRIFT, HOLDER_CENTERED,
             HOLDER_MIXED, HOLDER_MIXED_SWAPPED, ONESIDED_HOLDER)
    rule = next((r for r in order if r in satisfied), NO_RULE)
    if rule in (ONESIDED_FINITE_MEAN, DRIFT_FINITE_MEAN):
        cls = POSITIVE_RECURRENT
    elif rule != NO_RULE:
        cls = RECURRENT
    else:
        cls = UNKNOWN
        _, ev = _holder_rules(prof, p)
        evidence.update(ev)
    return Verdict(cls, rule, evidence, tuple(satisfied), split if split is not None else p,
                   recurrent_for_all_alpha=cls != UNKNOWN)


def classify(mu: LatticeMeasure, mu_prime: LatticeMeasure, p: float = 0.5) -> Verdict:
    """Sufficient-condition classification of the walk on its essential classes.

    Order: finite means with one-sided supports; finite means with drift
    toward 0 on both sides (a Foster-Lyapunov argument with |x|); the
    Hoelder-type moment conditions with q = 1 - p, trying ``p`` first and
    then the grid 0.1..0.9 (drift/drift, centered/centered and the two
    mixed cases); the one-sided Hoelder condition; otherwise Unknown.
    Transience is never concluded.  Any recurrence verdict holds for every
    mixing weight alpha at 0, which ``recurrent_for_all_alpha`` records.
    """
    prof = MomentProfile.from_measures(mu, mu_prime)
    v = classify_profile(prof, p)
    notes = []
    d, dp = support_summary(mu).gcd, support_summary(mu_prime).gcd
    scope = "essential class"
    if d != 1 or dp != 1:
        scope = "each essential class"
        notes.append(f"supports have gcds d={d}, d'={dp}; the verdict applies per essential class")
    evidence = dict(v.evidence)
    hyp = hypothesis_check(mu, mu_prime)
    evidence["hypotheses"] = {"H": hyp.H, "H_prime": hyp.H_prime}
    if prof.onesided:
        ts = tail_sum(mu, mu_prime)
        evidence["tail_sum"] = {k: _fmt(v_) if isinstance(v_, float) else v_
                                for k, v_ in ts.to_json().items()}
    return Verdict(v.classification, v.rule, evidence, v.rules_satisfied, v.p,
                   v.recurrent_for_all_alpha, scope, tuple(notes))


def verdict_rank(v: Verdict) -> int:
    return _RANK[v.classification]


# -- Kemperman diagnostic ---------------------------------------------------------------

CENSOR_LIMIT = 0.05
ESCAPE_TOL = 1e-10
NEVER = 2**62


@dataclass(eq=False)
class KempermanEstimate:
    """Monte Carlo renewal functions C(h), C'(-h) for 1 <= h <= h_max.

    ``C_hat[h-1]`` estimates the expected number of visits to h by the
    mu-walk before it first drops to <= 0; ``C_prime_hat[h-1]`` does the
    same for -h and the mu'-walk kept strictly negative.  Diagnostic only.
    """

    h_max: int
    C_hat: np.ndarray
    C_se: np.ndarray
    C_prime_hat: np.ndarray
    C_prime_se: np.ndarray
    partial_sums: np.ndarray
    partial_sums_se: np.ndarray
    n_sim: int
    max_len: int
    censored_plus: float
    censored_minus: float
    notes: list = field(default_factory=list)

    @property
    def unreliable(self) -> bool:
        return max(self.censored_plus, self.censored_minus) > CENSOR_LIMIT

    def to_json(self) -> dict:
        return {"h_max": self.h_max, "n_sim": self.n_sim, "max_len": self.max_len,
                "C_hat": self.C_hat.tolist(), "C_se": self.C_se.tolist(),
                "C_prime_hat": self.C_prime_hat.tolist(), "C_prime_se": self.C_prime_se.tolist(),
                "partial_sums": self.partial_sums.tolist(),
                "partial_sums_se": self.partial_sums_se.tolist(),
                "censored_plus": self.censored_plus, "censored_minus": self.censored_minus,
                "unreliable": self.unreliable, "diagnostic_only": True, "notes": list(self.notes)}

    def rows(self):
        """(h, C_hat, C_se, C_prime_hat, C_prime_se, partial_sum, partial_sum_se) per level."""
        for i in range(self.h_max):
            yield (i + 1, self.C_hat[i], self.C_se[i], self.C_prime_hat[i], self.C_prime_se[i],
                   self.partial_sums[i], self.partial_sums_se[i])


def _escape_level(m: LatticeMeasure, direction: int, h_max: int) -> tuple[int, str | None]:
    """Level above which a path is stopped as if it never came back.

    Without jumps against ``direction`` that is h_max itself.  With them and
    a drift along ``direction``, the chance of ever dropping L levels is at
    most exp(-theta L), theta > 0 solving E[exp(-theta xi)] = 1 (Cramer),
    so we stop once that bound is below ESCAPE_TOL.  Centered walks are
    never stopped early.
    """
    if m.kind != FINITE:
        return h_max, None
    s = m.sites() * direction
    w = m.masses()
    if s.min() > 0:
        return h_max, None
    if np.dot(s, w) <= MEAN_REL_TOL * np.abs(s).max():
        return NEVER, None

    def f(theta):
        return float(np.dot(w, np.exp(-theta * s))) - 1.0

    hi = 1.0
    while f(hi) <= 0:
        hi *= 2.0
    theta = optimize.brentq(f, 1e-12, hi, xtol=1e-14)
    margin = math.ceil(math.log(1.0 / ESCAPE_TOL) / theta)
    return h_max + margin, f"paths stopped above level {h_max + margin} (return chance < {ESCAPE_TOL:g})"


def _visit_means(m: LatticeMeasure, direction: int, h_max: int, n_sim: int, max_len: int, key):
    visits = np.zeros(h_max + 1, dtype=np.int64)
    sq = np.zeros(h_max + 1, dtype=np.int64)
    escape, note = _escape_level(m, direction, h_max)
    cens, st = _engine.positive_path_visits(
        np.int64(direction), np.int64(n_sim), np.int64(max_len), np.int64(h_max),
        np.int64(escape), key, *make_sampler(m).args(), visits, sq)
    if st != _engine.OK:
        raise SimulationOverflow("kemperman_diagnostic: a sampled jump reached 2**53")
    mean = visits[1:] / n_sim
    var = np.maximum(sq[1:] / n_sim - mean ** 2, 0.0)
    se = np.sqrt(var / n_sim)
    return mean, se, cens / n_sim, note


def kemperman_diagnostic(mu: LatticeMeasure, mu_prime: LatticeMeasure, h_max: int = 20,
                         n_sim: int = 10**4, seed: int = 0, max_len: int = 10**4) -> KempermanEstimate:
    """Estimate C(h), C'(-h) and the partial sums of C(h) C'(-h) by simulation.

    Paths are followed while they stay strictly on their side since step 1
    (strictly negative for the mu'-walk), and drifting paths are dropped
    once a return below h_max has chance < ESCAPE_TOL.  A path still
    running at ``max_len`` steps counts as censored; more than 5% censoring
    flags the estimate unreliable.
    """
    hyp = hypothesis_check(mu, mu_prime)
    if not hyp.both:
        raise PreconditionError(f"hypotheses fail (H={hyp.H}, H'={hyp.H_prime})")
    if h_max < 1 or n_sim < 1:
        raise ValueError("h_max and n_sim must be positive")
    C, Cse, cp, note_p = _visit_means(mu, 1, h_max, n_sim, max_len, stream_key(seed, 4, 0))
    D, Dse, cm, note_m = _visit_means(mu_prime, -1, h_max, n_sim, max_len, stream_key(seed, 4, 1))
    prod = C * D
    prod_se = np.sqrt((D * Cse) ** 2 + (C * Dse) ** 2)
    notes = ["C'(-h) counts visits of paths kept strictly negative"]
    notes += [f"{side}: {n}" for side, n in (("mu", note_p), ("mu'", note_m)) if n]
    est = KempermanEstimate(h_max, C, Cse, D, Dse, np.cumsum(prod), np.cumsum(prod_se),
                            n_sim, max_len, cp, cm, notes)
    if est.unreliable:
        est.notes.append(f"censoring above {CENSOR_LIMIT:.0%}; estimates unreliable")
    return est
