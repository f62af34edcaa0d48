"""Compiled inner loops for the simulator.

Random numbers come from the SplitMix64 finalizer applied to
``key + (counter + 1) * golden``: draw ``counter`` of stream ``key`` is a
pure function of the pair, so any trajectory can be replayed from its key
alone.  Each jump law is packed as (kind, sign, s, b, sites, cdf):

* kind 0: inversion on a finite table ``sites`` / ``cdf`` (last cdf entry 1.0)
* kind 1: Zipf(s) rejection sampler (Devroye) on k >= 1, times ``sign``
"""
import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0
MAX_JUMP = 9007199254740992.0   # 2**53

OK = 0
OVERFLOW = 1

TABLE = 0
ZIPF = 1


@njit(cache=True, nogil=True)
def uniform(key, ctr):
    """Open-interval uniform for draw ``ctr`` of stream ``key``."""
    z = np.uint64(key) + (np.uint64(ctr) + _ONE) * _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    z = z ^ (z >> _S31)
    return (np.float64(z >> _S11) + 0.5) * _INV53


@njit(cache=True, nogil=True)
def _table_draw(sites, cdf, u):
    lo = 0
    hi = len(cdf) - 1
    while lo < hi:   # first index with u < cdf[i]
        mid = (lo + hi) // 2
        if u < cdf[mid]:
            hi = mid
        else:
            lo = mid + 1
    return sites[lo]


@njit(cache=True, nogil=True)
def draw(kind, sign, s, b, sites, cdf, key, ctr):
    """One jump; returns (jump, next counter, status)."""
    ctr = np.uint64(ctr)   # a plain int counter would mix int64 into the hash
    if kind == TABLE:
        u = uniform(key, ctr)
        return _table_draw(sites, cdf, u), ctr + _ONE, OK
    e = -1.0 / (s - 1.0)
    while True:
        u = uniform(key, ctr)
        v = uniform(key, ctr + _ONE)
        ctr = ctr + np.uint64(2)
        xf = np.floor(u ** e)
        if xf >= MAX_JUMP:
            return 0, ctr, OVERFLOW
        t = (1.0 + 1.0 / xf) ** (s - 1.0)
        if v * xf * (t - 1.0) / (b - 1.0) <= t / b:
            return sign * np.int64(xf), ctr, OK


@njit(cache=True, nogil=True)
def step(x, alpha, key, ctr,
         k1, g1, s1, b1, sites1, cdf1,
         k2, g2, s2, b2, sites2, cdf2):
    """One move of the oscillating walk: law 1 below 0, law 2 above, mixture at 0."""
    ctr = np.uint64(ctr)
    use_first = x < 0
    if x == 0 and alpha > 0.0:
        if alpha >= 1.0:
            use_first = True
        else:
            use_first = uniform(key, ctr) < alpha
            ctr = ctr + _ONE
    if use_first:
        j, ctr, st = draw(k1, g1, s1, b1, sites1, cdf1, key, ctr)
    else:
        j, ctr, st = draw(k2, g2, s2, b2, sites2, cdf2, key, ctr)
    return x + j, ctr, st


@njit(cache=True, nogil=True)
def run_chunk(x, anchor, ctr, n, alpha, key,
              k1, g1, s1, b1, sites1, cdf1,
              k2, g2, s2, b2, sites2, cdf2,
              path, ladder_idx, ladder_prev):
    """Advance n steps from x, writing X_1..X_n into ``path``.

    A ladder epoch is a step that beats the running anchor: strictly above
    it when the anchor is negative, strictly below it otherwise.  Returns
    (n_done, anchor, counter, n_ladders, status).
    """
    ctr = np.uint64(ctr)
    nl = 0
    for i in range(n):
        y, ctr, st = step(x, alpha, key, ctr,
                          k1, g1, s1, b1, sites1, cdf1,
                          k2, g2, s2, b2, sites2, cdf2)
        if st != OK:
            return i, anchor, ctr, nl, st
        path[i] = y
        if (anchor < 0 and y > anchor) or (anchor >= 0 and y < anchor):
            ladder_idx[nl] = i
            ladder_prev[nl] = anchor
            nl += 1
            anchor = y
        x = y
    return n, anchor, ctr, nl, OK


@njit(cache=True, nogil=True)
def first_crossings(x0, n_samples, max_steps, alpha, key,
                    k1, g1, s1, b1, sites1, cdf1,
                    k2, g2, s2, b2, sites2, cdf2,
                    out):
    """Landing states of the first sign change from x0; censored samples get no entry.

    Returns (n_written, n_censored, status).
    """
    ctr = np.uint64(0)
    neg0 = x0 < 0
    w = 0
    cens = 0
    for _ in range(n_samples):
        x = x0
        done = False
        for _k in range(max_steps):
            x, ctr, st = step(x, alpha, key, ctr,
                              k1, g1, s1, b1, sites1, cdf1,
                              k2, g2, s2, b2, sites2, cdf2)
            if st != OK:
                return w, cens, st
            if (x < 0) != neg0:
                done = True
                break
        if done:
            out[w] = x
            w += 1
        else:
            cens += 1
    return w, cens, OK


@njit(cache=True, nogil=True)
def excursion_occupation(starts, max_steps, alpha, key, lo,
                         k1, g1, s1, b1, sites1, cdf1,
                         k2, g2, s2, b2, sites2, cdf2,
                         counts):
    """Add visits at times 0..C_1 - 1 into ``counts`` (offset ``lo``) for each start.

    Returns (n_censored, status).
    """
    ctr = np.uint64(0)
    cens = 0
    n = len(counts)
    for i in range(len(starts)):
        x = starts[i]
        neg0 = x < 0
        done = False
        for _k in range(max_steps):
            j = x - lo
            if 0 <= j < n:
                counts[j] += 1
            x, ctr, st = step(x, alpha, key, ctr,
                              k1, g1, s1, b1, sites1, cdf1,
                              k2, g2, s2, b2, sites2, cdf2)
            if st != OK:
                return cens, st
            if (x < 0) != neg0:
                done = True
                break
        if not done:
            cens += 1
    return cens, OK


@njit(cache=True, nogil=True)
def ladder_heights(direction, n_samples, max_steps, key, k, g, s, b, sites, cdf, out):
    """First strict ladder heights of a plain walk: first sum > 0 (direction 1) or < 0.

    Returns (n_written, n_censored, status).
    """
    ctr = np.uint64(0)
    w = 0
    cens = 0
    for _ in range(n_samples):
        total = 0
        done = False
        for _k in range(max_steps):
            j, ctr, st = draw(k, g, s, b, sites, cdf, key, ctr)
            if st != OK:
                return w, cens, st
            total += j
            if (direction > 0 and total > 0) or (direction < 0 and total < 0):
                done = True
                break
        if done:
            out[w] = total
            w += 1
        else:
            cens += 1
    return w, cens, OK


@njit(cache=True, nogil=True)
def positive_path_visits(direction, n_paths, max_len, h_max, escape, key, k, g, s, b, sites, cdf,
                         visits, visits_sq):
    """Per-level visit counts of paths kept strictly on one side since step 1.

    A path stops when it leaves the side or climbs above level ``escape``,
    past which the caller treats a return to levels <= h_max as negligible.
    A path still running after ``max_len`` steps is censored.
    ``visits[h]`` and ``visits_sq[h]`` accumulate per-path counts and their
    squares.  Returns (n_censored, status).
    """
    ctr = np.uint64(0)
    cens = 0
    per = np.zeros(h_max + 1, dtype=np.int64)
    for _ in range(n_paths):
        per[:] = 0
        total = 0
        running = True
        for _k in range(max_len):
            j, ctr, st = draw(k, g, s, b, sites, cdf, key, ctr)
            if st != OK:
                return cens, st
            total += j
            lvl = total * direction
            if lvl <= 0 or lvl > escape:
                running = False
                break
            if lvl <= h_max:
                per[lvl] += 1
        if running:
            cens += 1
        for h in range(1, h_max + 1):
            visits[h] += per[h]
            visits_sq[h] += per[h] * per[h]
    return cens, OK
