"""Probability measures on the integer lattice.

Three families are supported: finite atom lists, one-sided geometric tails
and one-sided zeta ("power") tails.  Everything downstream works with tail
masses, moments, truncations and renewal potentials computed here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Iterable, Mapping

import numpy as np
from scipy import special

from .errors import MeasureError, PreconditionError, TruncationError

FINITE = "finite"
GEOMETRIC = "geometric"
POWER = "power"

DEFAULT_EPS_MASS = 1e-12
MASS_TOL = 1e-12

STRICTLY_POSITIVE = "strictly_positive"
STRICTLY_NEGATIVE = "strictly_negative"
MIXED = "mixed"


def _parse_sign(sign) -> int:
    if sign in (1, "positive", "+"):
        return 1
    if sign in (-1, "negative", "-"):
        return -1
    raise MeasureError(f"sign must be 'positive' or 'negative', got {sign!r}")


@dataclass(frozen=True)
class LatticeMeasure:
    """A probability measure on Z.

    Use the ``finite``, ``geometric`` and ``power`` constructors rather than
    the raw fields.  For the parametric families the mass at ``sign * k``
    (k >= 1) is ``(1 - r) r**(k-1)`` or ``k**-s / zeta(s)``.
    """

    kind: str
    atoms: tuple[tuple[int, float], ...] = ()
    sign: int = 1
    param: float = math.nan

    def __post_init__(self):
        if self.kind == FINITE:
            if not self.atoms:
                raise MeasureError("finite measure needs at least one atom")
            sites = [s for s, _ in self.atoms]
            if len(set(sites)) != len(sites):
                raise MeasureError("atom sites must be distinct")
            if any(not (w > 0) for _, w in self.atoms):
                raise MeasureError("atom masses must be strictly positive")
            total = math.fsum(w for _, w in self.atoms)
            if abs(total - 1.0) > MASS_TOL:
                raise MeasureError(f"atom masses sum to {total!r}, not 1")
        elif self.kind == GEOMETRIC:
            if not (0.0 < self.param < 1.0):
                raise MeasureError("geometric ratio r must lie in (0, 1)")
        elif self.kind == POWER:
            if not (self.param > 1.0):
                raise MeasureError("power exponent s must exceed 1")
        else:
            raise MeasureError(f"unknown measure kind {self.kind!r}")
        if self.sign not in (1, -1):
            raise MeasureError("sign must be +1 or -1")

    # -- constructors ---------------------------------------------------------
    @classmethod
    def finite(cls, atoms: Mapping[int, float] | Iterable[tuple[int, float]]):
        items = atoms.items() if isinstance(atoms, Mapping) else atoms
        pairs = sorted((int(s), float(w)) for s, w in items)
        return cls(FINITE, tuple(pairs))

    @classmethod
    def point(cls, site: int):
        return cls.finite({site: 1.0})

    @classmethod
    def geometric(cls, r: float, sign="positive"):
        return cls(GEOMETRIC, (), _parse_sign(sign), float(r))

    @classmethod
    def power(cls, s: float, sign="positive"):
        return cls(POWER, (), _parse_sign(sign), float(s))

    @classmethod
    def from_config(cls, cfg: Mapping) -> "LatticeMeasure":
        """Build a measure from its JSON config form.

        >>> LatticeMeasure.from_config({"type": "geometric", "sign": "positive", "r": 0.5}).param
        0.5
        """
        if not isinstance(cfg, Mapping) or "type" not in cfg:
            raise MeasureError(f"measure config must be an object with 'type': {cfg!r}")
        kind = cfg["type"]
        try:
            if kind == FINITE:
                atoms = cfg["atoms"]
                if not isinstance(atoms, Mapping):
                    raise MeasureError("'atoms' must map site strings to masses")
                return cls.finite({int(k): float(v) for k, v in atoms.items()})
            if kind == GEOMETRIC:
                return cls.geometric(float(cfg["r"]), cfg.get("sign", "positive"))
            if kind == POWER:
                return cls.power(float(cfg["s"]), cfg.get("sign", "positive"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MeasureError):
                raise
            raise MeasureError(f"bad measure config {cfg!r}: {exc}") from exc
        raise MeasureError(f"unknown measure type {kind!r}")

    def to_config(self) -> dict:
        if self.kind == FINITE:
            return {"type": FINITE, "atoms": {str(s): w for s, w in self.atoms}}
        sign = "positive" if self.sign > 0 else "negative"
        key = "r" if self.kind == GEOMETRIC else "s"
        return {"type": self.kind, "sign": sign, key: self.param}

    # -- basic queries --------------------------------------------------------
    @property
    def is_finite(self) -> bool:
        return self.kind == FINITE

    @cached_property
    def _sites(self) -> np.ndarray:
        return np.array([s for s, _ in self.atoms], dtype=np.int64)

    @cached_property
    def _masses(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms], dtype=float)

    @cached_property
    def _suffix(self) -> np.ndarray:
        # _suffix[i] = mass of atoms i, i+1, ...; trailing 0 for searchsorted == len
        return np.append(np.cumsum(self._masses[::-1])[::-1], 0.0)

    @cached_property
    def _zeta(self) -> float:
        return float(special.zeta(self.param)) if self.kind == POWER else math.nan

    def sites(self) -> np.ndarray:
        """Sorted support sites; only defined for finite measures."""
        if not self.is_finite:
            raise PreconditionError("parametric measures have infinite support")
        return self._sites.copy()

    def masses(self) -> np.ndarray:
        if not self.is_finite:
            raise PreconditionError("parametric measures have infinite support")
        return self._masses.copy()

    def pmf(self, k):
        """Mass at site(s) ``k``; accepts scalars or integer arrays."""
        ks = np.asarray(k, dtype=np.int64)
        if self.kind == FINITE:
            idx = np.searchsorted(self._sites, ks)
            idx_c = np.minimum(idx, len(self._sites) - 1)
            hit = self._sites[idx_c] == ks
            out = np.where(hit, self._masses[idx_c], 0.0)
        else:
            j = ks * self.sign
            jj = np.maximum(j, 1).astype(float)
            if self.kind == GEOMETRIC:
                r = self.param
                vals = (1.0 - r) * np.power(r, jj - 1.0)
            else:
                vals = np.power(jj, -self.param) / self._zeta
            out = np.where(j >= 1, vals, 0.0)
        return float(out) if out.ndim == 0 else out

    def mirror(self) -> "LatticeMeasure":
        """The image measure under x -> -x."""
        if self.kind == FINITE:
            return LatticeMeasure.finite({-s: w for s, w in self.atoms})
        return LatticeMeasure(self.kind, (), -self.sign, self.param)

    def __repr__(self):
        if self.kind == FINITE:
            body = ", ".join(f"{s}: {w:g}" for s, w in self.atoms)
            return f"LatticeMeasure.finite({{{body}}})"
        sign = "positive" if self.sign > 0 else "negative"
        return f"LatticeMeasure.{self.kind}({self.param:g}, sign={sign!r})"


# -- tails ---------------------------------------------------------------------

def _scalar_or_array(out):
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def upper_tail(m: LatticeMeasure, n):
    """m(]n, +inf[) for integer n (scalar or array)."""
    n = np.asarray(n, dtype=np.int64)
    if m.kind == FINITE:
        idx = np.searchsorted(m._sites, n, side="right")
        return _scalar_or_array(m._suffix[idx])
    nf = n.astype(float)
    if m.sign > 0:
        if m.kind == GEOMETRIC:
            val = np.power(m.param, np.maximum(nf, 0.0))
        else:
            q = np.maximum(nf, 0.0) + 1.0
            val = special.zeta(m.param, q) / m._zeta
        return _scalar_or_array(np.where(n <= 0, 1.0, val))
    # support is {-1, -2, ...}: mass of sites -k with -k > n, i.e. 1 <= k <= -n-1
    kk = np.maximum(-nf - 1.0, 0.0)
    if m.kind == GEOMETRIC:
        val = -np.expm1(kk * math.log(m.param))
    else:
        val = 1.0 - special.zeta(m.param, kk + 1.0) / m._zeta
    return _scalar_or_array(np.where(n >= -1, 0.0, val))


def lower_tail(m: LatticeMeasure, n):
    """m(]-inf, -n[) for integer n; the negative-side tail H'(-n)."""
    return upper_tail(m.mirror(), n)


def tails(m: LatticeMeasure, n: int) -> tuple[float, float]:
    """Return ``(m(]n,+inf[), m(]-inf,-n[))``.

    The first entry is the tail H(n) used for measures on the positive side,
    the second the tail H'(-n) used for measures on the negative side.  A
    tail that does not apply to the support is simply 0.
    """
    if n < 0:
        raise PreconditionError("tail index n must be nonnegative")
    return upper_tail(m, n), lower_tail(m, n)


def excess_mean(m: LatticeMeasure, n: int) -> float:
    """Sum_{j >= n} m(]j, +inf[) = E[(X - n)^+]; may be +inf."""
    if m.kind == FINITE:
        sites, w = m._sites, m._masses
        return math.fsum(np.maximum(sites - n, 0) * w)
    if m.sign < 0:
        return 0.0 if n >= -1 else excess_mean(m, -1) + math.fsum(
            upper_tail(m, np.arange(n, -1)))
    if n < 0:
        return -n + excess_mean(m, 0)
    if m.kind == GEOMETRIC:
        return m.param ** n / (1.0 - m.param)
    s = m.param
    if s <= 2.0:
        return math.inf
    q = n + 1.0
    return float((special.zeta(s - 1.0, q) - n * special.zeta(s, q)) / m._zeta)


# -- support summary -----------------------------------------------------------

@dataclass(frozen=True)
class SupportSummary:
    max_site: float
    min_site: float
    gcd: int
    sign_class: str


def support_summary(m: LatticeMeasure) -> SupportSummary:
    if m.kind == FINITE:
        sites = [int(s) for s in m._sites]
        g = reduce(math.gcd, (abs(s) for s in sites), 0)
        if all(s > 0 for s in sites):
            sc = STRICTLY_POSITIVE
        elif all(s < 0 for s in sites):
            sc = STRICTLY_NEGATIVE
        else:
            sc = MIXED
        return SupportSummary(max(sites), min(sites), g, sc)
    if m.sign > 0:
        return SupportSummary(math.inf, 1, 1, STRICTLY_POSITIVE)
    return SupportSummary(-1, -math.inf, 1, STRICTLY_NEGATIVE)


def support_sites(m: LatticeMeasure, limit: int | None = None) -> np.ndarray:
    """Sorted support sites, cut to |site| <= limit for parametric tails."""
    if m.kind == FINITE:
        return m.sites()
    if limit is None:
        raise PreconditionError("limit required for infinite supports")
    k = np.arange(1, limit + 1, dtype=np.int64)
    return k if m.sign > 0 else -k[::-1]


# -- moments -------------------------------------------------------------------

def _geometric_power_series(r: float, p: float, rel_tol: float = 1e-12) -> float:
    """Sum_{k>=1} k^p (1-r) r^(k-1), summed until the remainder is provably small."""
    total = 0.0
    start, chunk = 1, 256
    while True:
        k = np.arange(start, start + chunk, dtype=float)
        terms = (1.0 - r) * np.exp(p * np.log(k) + (k - 1.0) * math.log(r))
        total += math.fsum(terms)
        nxt = start + chunk
        ratio = (1.0 + 1.0 / nxt) ** p * r
        if ratio < 1.0:
            t_next = (1.0 - r) * math.exp(p * math.log(nxt) + (nxt - 1.0) * math.log(r))
            remainder = t_next / (1.0 - ratio)
            if remainder <= rel_tol * total:
                return total + remainder
        start, chunk = nxt, chunk * 2


def moment(m: LatticeMeasure, p: float, part: str = "abs") -> float:
    """Sum |k|^p m(k) over the whole support, or its positive / negative part.

    ``part`` is ``"abs"``, ``"plus"`` (sites k > 0 only, i.e. E[(X^+)^p]) or
    ``"minus"`` (sites k < 0, i.e. E[(X^-)^p]).  Returns ``math.inf`` when the
    series diverges.
    """
    if not p > 0:
        raise PreconditionError("moment order p must be positive")
    if part not in ("abs", "plus", "minus"):
        raise ValueError(f"part must be abs/plus/minus, got {part!r}")
    if m.kind == FINITE:
        sites, w = m._sites, m._masses
        if part == "plus":
            keep = sites > 0
        elif part == "minus":
            keep = sites < 0
        else:
            keep = sites != 0
        return math.fsum(np.abs(sites[keep]).astype(float) ** p * w[keep])
    if (part == "plus" and m.sign < 0) or (part == "minus" and m.sign > 0):
        return 0.0
    if m.kind == GEOMETRIC:
        return _geometric_power_series(m.param, p)
    s = m.param
    if p >= s - 1.0:
        return math.inf
    return float(special.zeta(s - p) / m._zeta)


# -- truncation ----------------------------------------------------------------

@dataclass(frozen=True)
class Truncation:
    sites: np.ndarray
    masses: np.ndarray
    lost_mass: float

    @property
    def max_abs_site(self) -> int:
        return int(np.max(np.abs(self.sites))) if len(self.sites) else 0


def cutoff(m: LatticeMeasure, eps_mass: float, max_sites: int = 2_000_000) -> int:
    """Smallest K with m(|X| > K) <= eps_mass (parametric measures only)."""
    if m.kind == GEOMETRIC:
        r = m.param
        K = max(1, math.ceil(math.log(eps_mass) / math.log(r)))
        while K > 1 and r ** (K - 1) <= eps_mass:
            K -= 1
        while r ** K > eps_mass:
            K += 1
        return K
    s, z = m.param, m._zeta
    # integral bound: zeta(s, K+1) <= K^(1-s)/(s-1)
    hi_f = (eps_mass * (s - 1.0) * z) ** (-1.0 / (s - 1.0))
    if not math.isfinite(hi_f) or hi_f > max_sites:
        raise TruncationError(
            f"power tail s={s} needs more than {max_sites} sites for eps_mass={eps_mass}")
    hi = max(1, math.ceil(hi_f))

    def tail(K):
        return float(special.zeta(s, K + 1.0)) / z

    while tail(hi) > eps_mass:
        hi *= 2
        if hi > max_sites:
            raise TruncationError(f"power tail s={s} exceeds {max_sites} sites")
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail(mid) <= eps_mass:
            hi = mid
        else:
            lo = mid
    return hi


def truncate(m: LatticeMeasure, eps_mass: float = DEFAULT_EPS_MASS,
             max_sites: int = 2_000_000) -> Truncation:
    """Finite atom list whose discarded mass is at most ``eps_mass``.

    Finite measures are returned unchanged.  For one-sided tails the cut is
    the smallest K with m(|X| > K) <= eps_mass and the lost mass is exact.
    """
    if not 0.0 < eps_mass < 1.0:
        raise PreconditionError("eps_mass must lie in (0, 1)")
    if m.kind == FINITE:
        return Truncation(m.sites(), m.masses(), 0.0)
    K = cutoff(m, eps_mass, max_sites)
    sites = support_sites(m, K)
    masses = m.pmf(sites)
    lost = upper_tail(m, K) if m.sign > 0 else lower_tail(m, K)
    return Truncation(sites, np.asarray(masses, dtype=float), float(lost))


# -- measures over windows -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class ZMeasure:
    """Nonnegative measure on the integer window ``[lo, lo + len(values) - 1]``.

    ``tail_bound`` bounds the true mass that ``values`` does not represent,
    whether it sits outside the window or was lost to truncation.
    """

    lo: int
    values: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if np.any(vals < 0):
            raise ValueError("ZMeasure values must be nonnegative")
        if not self.tail_bound >= 0:
            raise ValueError("tail_bound must be nonnegative")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "lo", int(self.lo))

    @classmethod
    def from_dict(cls, mapping: Mapping[int, float], window=None, tail_bound=0.0):
        if window is None:
            window = (min(mapping), max(mapping))
        lo, hi = window
        vals = np.zeros(hi - lo + 1)
        for site, v in mapping.items():
            if lo <= site <= hi:
                vals[site - lo] += v
        return cls(lo, vals, tail_bound)

    @classmethod
    def zeros(cls, window):
        lo, hi = window
        return cls(lo, np.zeros(hi - lo + 1))

    @property
    def hi(self) -> int:
        return self.lo + len(self.values) - 1

    @property
    def window(self) -> tuple[int, int]:
        return (self.lo, self.hi)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def __getitem__(self, site: int) -> float:
        i = int(site) - self.lo
        return float(self.values[i]) if 0 <= i < len(self.values) else 0.0

    def total(self) -> float:
        return math.fsum(self.values)

    def restrict(self, window) -> "ZMeasure":
        lo, hi = window
        out = np.zeros(hi - lo + 1)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo:b - lo + 1] = self.values[a - self.lo:b - self.lo + 1]
        dropped = self.total() - math.fsum(out)
        return ZMeasure(lo, out, self.tail_bound + max(dropped, 0.0))

    def masked(self, keep) -> "ZMeasure":
        """Zero every site for which ``keep(site)`` is false."""
        mask = np.array([bool(keep(int(x))) for x in self.sites])
        return ZMeasure(self.lo, np.where(mask, self.values, 0.0), self.tail_bound)

    def normalized(self) -> "ZMeasure":
        tot = self.total()
        if tot <= 0:
            raise ValueError("cannot normalize a zero measure")
        return ZMeasure(self.lo, self.values / tot, self.tail_bound / tot)

    def to_dict(self, drop_zeros: bool = True) -> dict[int, float]:
        return {int(x): float(v) for x, v in zip(self.sites, self.values)
                if v != 0 or not drop_zeros}

    def __repr__(self):
        return f"ZMeasure(window={self.window}, total={self.total():.6g}, tail_bound={self.tail_bound:.3g})"


def to_zmeasure(m: LatticeMeasure, eps_mass: float = DEFAULT_EPS_MASS) -> ZMeasure:
    tr = truncate(m, eps_mass)
    lo, hi = int(tr.sites.min()), int(tr.sites.max())
    vals = np.zeros(hi - lo + 1)
    vals[tr.sites - lo] = tr.masses
    return ZMeasure(lo, vals, tr.lost_mass)


def convolve(a: ZMeasure, b: ZMeasure, window) -> ZMeasure:
    """Convolution of two windowed measures, restricted to ``window``."""
    lo, hi = window
    if hi < lo:
        raise ValueError(f"empty window {window}")
    full = np.convolve(a.values, b.values)
    res = ZMeasure(a.lo + b.lo, full, a.tail_bound + b.tail_bound)
    return res.restrict((lo, hi))


# -- renewal potentials --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Potential:
    """Renewal potential U = sum_n m^{*n} of a one-sided measure.

    For ``side == "positive"`` entry t holds U(t); for ``"negative"`` entry k
    holds U'(-k), so both are indexed by the distance from 0.
    """

    values: np.ndarray
    t_max: int
    side: str = "positive"

    def at(self, t: int) -> float:
        k = t if self.side == "positive" else -t
        if k < 0:
            return 0.0
        if k > self.t_max:
            raise IndexError(f"potential only computed up to |t| = {self.t_max}")
        return float(self.values[k])


def potential(m: LatticeMeasure, side: str = "positive", t_max: int = 0) -> Potential:
    """Renewal potential by the recursion U(t) = 1{t=0} + sum_k m(k) U(t-k).

    The support must lie strictly on ``side``; a two-sided measure has no
    finite on-lattice potential.
    """
    if side not in ("positive", "negative"):
        raise ValueError("side must be 'positive' or 'negative'")
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    sc = support_summary(m).sign_class
    want = STRICTLY_POSITIVE if side == "positive" else STRICTLY_NEGATIVE
    if sc != want:
        raise PreconditionError(
            f"potential on the {side} side needs a {want} support, got {sc}; "
            "reduce to ladder heights first")
    base = m if side == "positive" else m.mirror()
    steps = np.asarray(base.pmf(np.arange(0, t_max + 1)), dtype=float).reshape(-1)
    U = np.zeros(t_max + 1)
    U[0] = 1.0
    for t in range(1, t_max + 1):
        # steps[1:t+1] . U[t-1::-1]
        U[t] = np.dot(steps[1:t + 1], U[t - 1::-1])
    return Potential(U, t_max, side)
