"""Invariant measures of the oscillating walk and of its crossing chain.

All measures are unnormalized; normalize only when comparing with empirical
frequencies.  Each ``ZMeasure`` carries a bound on the mass it does not
represent (outside the window or lost to truncation).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import PreconditionError
from .kernels import CrossingKernel, FullKernel
from .measures import (
    DEFAULT_EPS_MASS,
    FINITE,
    POWER,
    STRICTLY_NEGATIVE,
    STRICTLY_POSITIVE,
    LatticeMeasure,
    Potential,
    ZMeasure,
    excess_mean,
    lower_tail,
    support_summary,
    truncate,
    upper_tail,
)

ZERO_POSITIVE = "zero_positive"
ZERO_NEGATIVE = "zero_negative"

CONVERGED = "converged"
DIVERGING = "diverging"
INCONCLUSIVE = "inconclusive"


def _check_onesided(mu, mu_prime):
    if (support_summary(mu).sign_class != STRICTLY_POSITIVE
            or support_summary(mu_prime).sign_class != STRICTLY_NEGATIVE):
        raise PreconditionError("needs mu supported on Z+ and mu' on Z-")


def _split(window):
    lo, hi = int(window[0]), int(window[1])
    if hi < lo:
        raise ValueError(f"empty window {window}")
    sites = np.arange(lo, hi + 1)
    return lo, hi, sites


def _side_sum(f, start: int, stop: int) -> float:
    """sum of f(m) for start <= m <= stop (finite range, may be empty)."""
    if stop < start:
        return 0.0
    return math.fsum(np.atleast_1d(f(np.arange(start, stop + 1))))


# -- nu ------------------------------------------------------------------------

def nu(mu: LatticeMeasure, mu_prime: LatticeMeasure, convention: str = ZERO_POSITIVE,
       window=(-50, 50)) -> ZMeasure:
    """Tail-built invariant measure of the walk.

    ``zero_positive``: mu'(]-inf, m]) for m <= -1 and mu([m+1, inf[) for m >= 0,
    invariant when 0 jumps like the positive side (alpha = 0).
    ``zero_negative``: the variant shifted by one, invariant for alpha = 1.
    """
    _check_onesided(mu, mu_prime)
    if convention not in (ZERO_POSITIVE, ZERO_NEGATIVE):
        raise ValueError(f"unknown convention {convention!r}")
    lo, hi, sites = _split(window)
    split = 0 if convention == ZERO_POSITIVE else 1   # first site using mu

    def pos(m):   # m >= split
        return upper_tail(mu, m - split)

    def neg(m):   # m < split; mu'(]-inf, m - 1 + split])
        return lower_tail(mu_prime, split - 1 - m)

    vals = np.where(sites >= split, pos(np.maximum(sites, split)), neg(np.minimum(sites, split - 1)))
    # mass outside the window, one side at a time
    right = excess_mean(mu, max(hi + 1, split) - split)
    right += _side_sum(neg, hi + 1, split - 1)
    left = excess_mean(mu_prime.mirror(), max(split - lo, 0))
    left += _side_sum(pos, split, lo - 1)
    return ZMeasure(lo, np.asarray(vals, dtype=float), right + left)


# -- rho -----------------------------------------------------------------------

def rho(mu: LatticeMeasure, mu_prime: LatticeMeasure, window=(-50, 50),
        eps_mass: float = DEFAULT_EPS_MASS) -> ZMeasure:
    """Invariant measure of the crossing chain.

    rho(n) = sum_k mu(k) mu'[n-k+1, n] for n <= -1 and
    sum_k mu'(-k) mu[n+1, n+k] for n >= 0.  The k-sum runs over the
    truncated atoms; the dropped part is added to ``tail_bound``.
    """
    _check_onesided(mu, mu_prime)
    lo, hi, sites = _split(window)
    tr = truncate(mu, eps_mass)
    trp = truncate(mu_prime.mirror(), eps_mass)
    vals = np.zeros(len(sites))
    neg = sites < 0
    n = sites[neg]
    if len(n):
        # mu'[n-k+1, n] = mu'(]-inf, n]) - mu'(]-inf, n-k])
        inner = (lower_tail(mu_prime, -n - 1)[:, None]
                 - lower_tail(mu_prime, (-n - 1)[:, None] + tr.sites[None, :]))
        vals[neg] = inner @ tr.masses
    n = sites[~neg]
    if len(n):
        inner = (upper_tail(mu, n)[:, None]
                 - upper_tail(mu, n[:, None] + trp.sites[None, :]))
        vals[~neg] = inner @ trp.masses
    vals = np.maximum(vals, 0.0)
    bound = _rho_outside(mu, mu_prime, lo, hi)
    bound += tr.lost_mass * max(0, min(hi, -1) - lo + 1)
    bound += trp.lost_mass * max(0, hi - max(lo, 0) + 1)
    return ZMeasure(lo, vals, bound)


def _rho_outside(mu, mu_prime, lo, hi) -> float:
    """Upper bound on rho mass outside [lo, hi].

    sum_{n >= M} rho(n) = sum_{j >= M} H(j) H'(-(j - M)), bounded by both
    sum_{j >= M} H(j) and H(M) * E|xi'|.
    """
    mup = mu_prime.mirror()

    def beyond_right(M):   # sum_{n >= M} rho(n), M >= 0
        return min(excess_mean(mu, M), _product(upper_tail(mu, M), excess_mean(mup, 0)))

    def beyond_left(M):    # sum_{n <= -M-1} rho(n), M >= 0
        return min(excess_mean(mup, M), _product(upper_tail(mup, M), excess_mean(mu, 0)))

    # windows that miss -1 or 0 get the whole far side as a crude bound
    if hi >= -1:
        out = beyond_right(hi + 1)
    else:
        out = beyond_right(0) + beyond_left(0)
    if lo <= 0:
        out += beyond_left(-lo)
    else:
        out += beyond_left(0) + beyond_right(0)
    return float(out)


# -- signed kernels and identities --------------------------------------------

@dataclass(frozen=True, eq=False)
class SignedKernelPair:
    """A = delta_0 - mu on Z0+ and A' = delta_0 - mu' on Z0-.

    ``A[k]`` holds A(k) and ``A_prime[k]`` holds A'(-k) for 0 <= k <= k_max.
    """

    A: np.ndarray
    A_prime: np.ndarray
    k_max: int


def signed_pair(mu: LatticeMeasure, mu_prime: LatticeMeasure, k_max: int) -> SignedKernelPair:
    ks = np.arange(k_max + 1)
    A = -np.asarray(mu.pmf(ks), dtype=float).reshape(-1)
    Ap = -np.asarray(mu_prime.pmf(-ks), dtype=float).reshape(-1)
    A[0] += 1.0
    Ap[0] += 1.0
    return SignedKernelPair(A, Ap, k_max)


def rho_from_nu(nu_m: ZMeasure, pair: SignedKernelPair, window) -> ZMeasure:
    """rho(n) = sum_k A(k) nu(n-k) for n <= -1, sum_k A'(-k) nu(n+k) for n >= 0.

    Sums run over k <= pair.k_max and sites inside nu's window; ``nu_m``
    must therefore cover [lo - k_max, hi + k_max] (or vanish outside it).
    """
    lo, hi, sites = _split(window)
    K = pair.k_max
    ext = nu_m.restrict((lo - K, hi + K)).values
    vals = np.zeros(len(sites))
    for i, n in enumerate(sites):
        c = n - (lo - K)
        if n < 0:
            vals[i] = np.dot(pair.A, ext[c - K:c + 1][::-1])
        else:
            vals[i] = np.dot(pair.A_prime, ext[c:c + K + 1])
    return ZMeasure(lo, np.maximum(vals, 0.0), nu_m.tail_bound)


def reconstruct_nu_from_rho(rho_m: ZMeasure, U: Potential, U_prime: Potential, window) -> ZMeasure:
    """nu(n) = sum_k U(k) rho(n-k) for n < 0 and sum_k U'(-k) rho(n+k) for n >= 0.

    The sums cover all of rho's window, so the potentials must reach the
    distance from each window site to the far end of rho's window.
    """
    lo, hi, sites = _split(window)
    need_neg = min(hi, -1) - rho_m.lo if lo < 0 else 0
    need_pos = rho_m.hi - max(lo, 0) if hi >= 0 else 0
    if need_neg > U.t_max or need_pos > U_prime.t_max:
        raise PreconditionError(
            f"potentials cover t <= {U.t_max} / {U_prime.t_max}, need {need_neg} / {need_pos}")
    vals = np.zeros(len(sites))
    rv = rho_m.values
    for i, n in enumerate(sites):
        if n < 0:
            if n < rho_m.lo:
                continue
            seg = rv[:min(n, rho_m.hi) - rho_m.lo + 1][::-1]   # rho(n), rho(n-1), ...
            off = max(n - rho_m.hi, 0)
            vals[i] = np.dot(U.values[off:off + len(seg)], seg)
        else:
            if n > rho_m.hi:
                continue
            start = max(n, rho_m.lo)
            seg = rv[start - rho_m.lo:]
            off = start - n
            vals[i] = np.dot(U_prime.values[off:off + len(seg)], seg)
    return ZMeasure(lo, vals, rho_m.tail_bound)


# -- tail-product series ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TailSum:
    partial_sums: np.ndarray
    verdict: str
    value: float
    remainder_bound: float
    certificate: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "value": self.value,
                "remainder_bound": self.remainder_bound,
                "n_terms": len(self.partial_sums), "certificate": self.certificate}


def _power_tail_constant(m: LatticeMeasure) -> float:
    s = m.param
    return 1.0 / ((s - 1.0) * float(special.zeta(s)))


def _product(tail: float, mean: float) -> float:
    # a vanishing tail kills the remainder even when the other mean is infinite
    return 0.0 if tail == 0 else tail * mean


def tail_sum(mu: LatticeMeasure, mu_prime: LatticeMeasure, n_max: int = 10_000,
             eps: float = 1e-12) -> TailSum:
    """Partial sums of sum_n H(n) H'(-n) with a certified verdict.

    ``converged`` needs an analytic bound on the remainder past n_max below
    eps.  ``diverging`` is only issued for two power tails with s + s' <= 3,
    where H(n) H'(-n) >= c (n+1)^(2-s-s') termwise.  Anything else is
    ``inconclusive``.
    """
    n = np.arange(n_max + 1)
    mup = mu_prime.mirror()
    terms = np.asarray(upper_tail(mu, n), dtype=float) * np.asarray(upper_tail(mup, n), dtype=float)
    partial = np.cumsum(terms)
    value = float(math.fsum(terms))
    both_power = mu.kind == POWER and mu_prime.kind == POWER
    if both_power:
        s, sp = mu.param, mu_prime.param
        c = _power_tail_constant(mu) * _power_tail_constant(mu_prime)
        if s + sp <= 3.0:
            cert = {"term_lower_bound": "c*(n+1)^e", "c": c, "e": 2.0 - s - sp}
            return TailSum(partial, DIVERGING, math.inf, math.inf, cert)
        bound = c * n_max ** (3.0 - s - sp) / (s + sp - 3.0)
    else:
        N1 = n_max + 1
        bound = min(_product(upper_tail(mu, N1), excess_mean(mup, N1)),
                    _product(upper_tail(mup, N1), excess_mean(mu, N1)))
    verdict = CONVERGED if bound <= eps else INCONCLUSIVE
    return TailSum(partial, verdict, value, float(bound))


@dataclass(frozen=True)
class MassIdentity:
    plus_mass: float
    minus_mass: float
    tail_product_sum: float
    residual: float
    bound: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def total_mass_identity_check(mu: LatticeMeasure, mu_prime: LatticeMeasure, window=None,
                              eps_mass: float = DEFAULT_EPS_MASS, n_max: int = 10_000) -> MassIdentity:
    """Compare both half-masses of rho with sum_n H(n) H'(-n).

    Without a window, finite supports use [D', D-1], which holds all of rho.
    """
    _check_onesided(mu, mu_prime)
    if window is None:
        if mu.kind == FINITE and mu_prime.kind == FINITE:
            window = (int(mu_prime.sites()[0]), int(mu.sites()[-1]) - 1)
        else:
            window = (-500, 500)
    r = rho(mu, mu_prime, window, eps_mass)
    ts = tail_sum(mu, mu_prime, n_max=n_max)
    lo = r.lo
    plus = math.fsum(r.values[max(0, -lo):])
    minus = math.fsum(r.values[:max(0, -lo)])
    res = max(abs(plus - ts.value), abs(minus - ts.value))
    return MassIdentity(plus, minus, ts.value, res, r.tail_bound + ts.remainder_bound)


# -- stationarity --------------------------------------------------------------------

@dataclass(frozen=True)
class StationarityResidual:
    interior: float
    boundary: float
    interior_window: tuple[int, int]

    def to_json(self) -> dict:
        return {"interior": self.interior, "boundary": self.boundary,
                "interior_window": list(self.interior_window)}


def stationarity_residual(m: ZMeasure, kernel, margin: int | None = None) -> StationarityResidual:
    """L1 norm of mK - m, split into interior sites and the rest.

    Inflow into sites near the window edge may come from outside the window.
    By default the interior drops one maximal jump at each edge, unless the
    measure has no mass outside its window at all (``tail_bound == 0``), in
    which case no inflow is missing and every site counts as interior.
    """
    if margin is None:
        margin = 0 if m.tail_bound == 0 else kernel.jump
    if isinstance(kernel, FullKernel):
        klo, khi = kernel.window
        if m.lo < klo or m.hi > khi:
            raise PreconditionError("kernel window must contain the measure window")
        v = m.restrict(kernel.window).values
        out = kernel.matrix.T @ v
        t_lo = klo
    elif isinstance(kernel, CrossingKernel):
        mat, t_lo = kernel.to_sparse()
        n = mat.shape[0]
        v = np.zeros(n)
        for x, val in zip(m.sites, m.values):
            if val == 0:
                continue
            if int(x) not in kernel.rows:
                raise PreconditionError(f"measure charges {int(x)}, which has no kernel row")
            v[int(x) - t_lo] = val
        out = mat.T @ v
    else:
        raise TypeError("kernel must be a FullKernel or a CrossingKernel")
    target = np.zeros(len(out))
    a = m.lo - t_lo
    target[a:a + len(m.values)] = m.values
    diff = np.abs(out - target)
    sites = np.arange(t_lo, t_lo + len(out))
    ilo, ihi = m.lo + margin, m.hi - margin
    inside = (sites >= ilo) & (sites <= ihi)
    return StationarityResidual(float(math.fsum(diff[inside])),
                                float(math.fsum(diff[~inside])), (ilo, ihi))


# -- export ---------------------------------------------------------------------------

def export_measure(m: ZMeasure, csv_path, json_path=None, normalized: bool = False) -> None:
    """Write ``site,value`` rows and a JSON sidecar with the window and tail bound."""
    out = m.normalized() if normalized else m
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["site", "value"])
        for x, v in zip(out.sites, out.values):
            w.writerow([int(x), repr(float(v))])
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(measure_sidecar(out, normalized), fh, indent=2, sort_keys=True)


def measure_sidecar(m: ZMeasure, normalized: bool = False) -> dict:
    return {"window": list(m.window), "tail_bound": m.tail_bound, "normalized": normalized}
