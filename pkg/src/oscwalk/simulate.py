"""Seeded Monte Carlo engine for the oscillating walk.

Trajectory ``i`` of a run with master seed ``s`` draws from the stream whose
key is ``SeedSequence(s, spawn_key=(i,))``; draws within a stream are
indexed by a counter (see ``_engine``).  Statistics are integer counts, so
ensemble merges are exact and independent of the order or degree of
parallelism.

Crossings are recorded as sign changes of ``X < 0``.  For alpha = 0 this is
the usual crossing time; for alpha in (0, 1) it is the natural extension.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _engine
from .classes import crossing_classes
from .errors import PreconditionError, SimulationOverflow
from .invariants import nu as nu_measure
from .invariants import rho as rho_measure
from .measures import POWER, LatticeMeasure, truncate

SAMPLER_EPS = 1e-15
CHUNK = 1 << 20
LADDER_CENSOR_WARN = 0.01


# -- samplers and streams --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Sampler:
    """A jump law packed for the compiled kernels."""

    kind: int
    sign: int
    s: float
    b: float
    sites: np.ndarray
    cdf: np.ndarray

    def args(self) -> tuple:
        return (np.int64(self.kind), np.int64(self.sign), np.float64(self.s),
                np.float64(self.b), self.sites, self.cdf)

    @property
    def max_abs_jump(self) -> float:
        return math.inf if self.kind == _engine.ZIPF else float(np.max(np.abs(self.sites)))


def make_sampler(m: LatticeMeasure, eps_mass: float = SAMPLER_EPS) -> Sampler:
    """Exact Zipf sampling for power tails; inversion on a truncated table otherwise.

    The table is ordered by |site| and its last cdf entry is forced to 1, so
    the truncated mass (at most eps_mass) lands on the farthest site.
    """
    if m.kind == POWER:
        s = float(m.param)
        return Sampler(_engine.ZIPF, int(m.sign), s, 2.0 ** (s - 1.0),
                       np.zeros(1, dtype=np.int64), np.ones(1))
    tr = truncate(m, eps_mass)
    order = np.lexsort((tr.sites, np.abs(tr.sites)))
    sites = tr.sites[order].astype(np.int64)
    cdf = np.cumsum(tr.masses[order])
    cdf[-1] = 1.0
    return Sampler(_engine.TABLE, 1, math.nan, math.nan, sites, cdf)


def stream_key(seed: int, *index: int) -> np.uint64:
    """64-bit stream key for (seed, index...) via numpy's SeedSequence."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(i) for i in index))
    return np.uint64(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True, eq=False)
class WalkSpec:
    mu: LatticeMeasure
    mu_prime: LatticeMeasure
    alpha: float = 0.0
    x0: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        object.__setattr__(self, "x0", int(self.x0))

    @cached_property
    def samplers(self) -> tuple[Sampler, Sampler]:
        return make_sampler(self.mu), make_sampler(self.mu_prime)

    def kernel_args(self) -> tuple:
        a, b = self.samplers
        return a.args() + b.args()

    def with_start(self, x0: int) -> "WalkSpec":
        return WalkSpec(self.mu, self.mu_prime, self.alpha, x0)


def _raise_overflow(what: str):
    raise SimulationOverflow(f"{what}: a sampled jump reached 2**53; "
                             "the tail is too heavy for exact integer positions")


def step(x: int, spec: WalkSpec, key, ctr: int = 0) -> tuple[int, int]:
    """Single move from x; returns (new state, next counter)."""
    y, c, st = _engine.step(np.int64(x), np.float64(spec.alpha), np.uint64(key), np.uint64(ctr),
                            *spec.kernel_args())
    if st != _engine.OK:
        _raise_overflow("step")
    return int(y), int(c)


# -- single trajectories ----------------------------------------------------------

@dataclass(eq=False)
class TrajectoryStats:
    """Path functionals of one run of ``steps`` moves from ``x0``.

    Times index the path X_0, X_1, ...; ``occupation`` counts X_0..X_{steps-1}.
    Ladder heights are X_{t_k} - X_{t_{k-1}}, split by the side of the anchor.
    """

    x0: int
    steps: int
    final_state: int
    occupation: Counter
    crossing_times: np.ndarray
    crossing_states: np.ndarray
    ladder_times: np.ndarray
    ladder_states: np.ndarray
    zero_times: np.ndarray
    ladder_heights_plus: np.ndarray
    ladder_heights_minus: np.ndarray
    path: np.ndarray | None = None

    @property
    def return_times(self) -> np.ndarray:
        """Gaps between visits to 0 (the first gap counts only when x0 = 0)."""
        z = self.zero_times
        if self.x0 == 0:
            z = np.concatenate([[0], z])
        return np.diff(z)

    @property
    def first_return(self) -> int | None:
        if self.x0 != 0 or len(self.zero_times) == 0:
            return None
        return int(self.zero_times[0])

    def export_path_csv(self, path) -> None:
        if self.path is None:
            raise ValueError("trajectory was run without keep_path")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "state"])
            for t, x in enumerate(self.path):
                w.writerow([t, int(x)])


def _empty():
    return np.zeros(0, dtype=np.int64)


def run_trajectory(spec: WalkSpec, n_steps: int, seed: int = 0, stream: int = 0, *,
                   stop_after_crossings: int | None = None, keep_path: bool = False,
                   chunk: int = CHUNK) -> TrajectoryStats:
    """Simulate ``n_steps`` moves (fewer if ``stop_after_crossings`` is hit first)."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    key = stream_key(seed, stream)
    args = spec.kernel_args()
    x = np.int64(spec.x0)
    anchor = np.int64(spec.x0)
    ctr = np.uint64(0)
    occ: Counter = Counter()
    parts = {k: [] for k in ("ct", "cs", "lt", "ls", "zt", "lp", "lm", "path")}
    if keep_path:
        parts["path"].append(np.array([spec.x0], dtype=np.int64))
    done = 0
    n_cross = 0
    size = min(chunk, n_steps)
    buf = np.empty(size, dtype=np.int64)
    lidx = np.empty(size, dtype=np.int64)
    lprev = np.empty(size, dtype=np.int64)
    while done < n_steps:
        m = min(size, n_steps - done)
        got, new_anchor, ctr, nl, st = _engine.run_chunk(
            x, anchor, ctr, np.int64(m), np.float64(spec.alpha), key, *args, buf, lidx, lprev)
        if st != _engine.OK:
            _raise_overflow("run_trajectory")
        ctr = np.uint64(ctr)
        path = buf[:got]
        prev = np.empty(got, dtype=np.int64)
        prev[0] = x
        prev[1:] = path[:-1]
        cross = np.flatnonzero((path < 0) != (prev < 0))
        if stop_after_crossings is not None and n_cross + len(cross) >= stop_after_crossings:
            cut = int(cross[stop_after_crossings - n_cross - 1]) + 1
            path, prev, cross = path[:cut], prev[:cut], cross[cross < cut]
            keep = lidx[:nl] < cut
            lidx_c, lprev_c = lidx[:nl][keep], lprev[:nl][keep]
            got = cut
        else:
            lidx_c, lprev_c = lidx[:nl], lprev[:nl]
        u, c = np.unique(prev, return_counts=True)
        occ.update(dict(zip(u.tolist(), c.tolist())))
        parts["ct"].append(done + 1 + cross)
        parts["cs"].append(path[cross])
        lstates = path[lidx_c]
        parts["lt"].append(done + 1 + lidx_c)
        parts["ls"].append(lstates)
        heights = lstates - lprev_c
        parts["lp"].append(heights[lprev_c < 0])
        parts["lm"].append(heights[lprev_c >= 0])
        parts["zt"].append(done + 1 + np.flatnonzero(path == 0))
        if keep_path:
            parts["path"].append(path.copy())
        n_cross += len(cross)
        done += got
        x = path[-1]
        if stop_after_crossings is not None and n_cross >= stop_after_crossings:
            break
        anchor = new_anchor

    def cat(k):
        return np.concatenate(parts[k]) if parts[k] else _empty()

    return TrajectoryStats(spec.x0, done, int(x), occ, cat("ct"), cat("cs"), cat("lt"), cat("ls"),
                           cat("zt"), cat("lp"), cat("lm"), cat("path") if keep_path else None)


# -- ensembles ------------------------------------------------------------------------

def _quantiles(counts: Counter, qs=(0.25, 0.5, 0.75, 0.9, 0.99)) -> dict:
    total = sum(counts.values())
    if total == 0:
        return {}
    keys = sorted(counts)
    cum = np.cumsum([counts[k] for k in keys])
    return {str(q): int(keys[int(np.searchsorted(cum, q * total))]) for q in qs}


def _sorted_counts(c: Counter) -> dict:
    return {str(k): int(c[k]) for k in sorted(c)}


@dataclass(eq=False)
class EnsembleStats:
    """Merged integer statistics of independent trajectories."""

    n_traj: int = 0
    steps: int = 0
    n_crossings: int = 0
    n_ladders: int = 0
    censored_first_return: int = 0
    occupation: Counter = field(default_factory=Counter)
    crossing_states: Counter = field(default_factory=Counter)
    return_times: Counter = field(default_factory=Counter)
    first_return: Counter = field(default_factory=Counter)
    ladder_heights_plus: Counter = field(default_factory=Counter)
    ladder_heights_minus: Counter = field(default_factory=Counter)

    @classmethod
    def from_trajectory(cls, t: TrajectoryStats) -> "EnsembleStats":
        fr = t.first_return
        return cls(
            n_traj=1, steps=t.steps, n_crossings=len(t.crossing_times),
            n_ladders=len(t.ladder_times),
            censored_first_return=int(t.x0 == 0 and fr is None),
            occupation=Counter(t.occupation),
            crossing_states=Counter(t.crossing_states.tolist()),
            return_times=Counter(t.return_times.tolist()),
            first_return=Counter([fr] if fr is not None else []),
            ladder_heights_plus=Counter(t.ladder_heights_plus.tolist()),
            ladder_heights_minus=Counter(t.ladder_heights_minus.tolist()),
        )

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        return EnsembleStats(
            self.n_traj + other.n_traj, self.steps + other.steps,
            self.n_crossings + other.n_crossings, self.n_ladders + other.n_ladders,
            self.censored_first_return + other.censored_first_return,
            self.occupation + other.occupation, self.crossing_states + other.crossing_states,
            self.return_times + other.return_times, self.first_return + other.first_return,
            self.ladder_heights_plus + other.ladder_heights_plus,
            self.ladder_heights_minus + other.ladder_heights_minus)

    def return_frequency(self, horizon: int) -> float:
        """Fraction of trajectories started at 0 that came back by ``horizon``."""
        started = sum(self.first_return.values()) + self.censored_first_return
        if started == 0:
            return math.nan
        return sum(v for k, v in self.first_return.items() if k <= horizon) / started

    def occupation_measure(self) -> "EmpiricalMeasure":
        return EmpiricalMeasure(Counter(self.occupation), sum(self.occupation.values()))

    def to_json(self) -> dict:
        return {
            "n_traj": self.n_traj, "steps": self.steps,
            "n_crossings": self.n_crossings, "n_ladders": self.n_ladders,
            "censored_first_return": self.censored_first_return,
            "occupation": _sorted_counts(self.occupation),
            "crossing_states": _sorted_counts(self.crossing_states),
            "return_times": _sorted_counts(self.return_times),
            "return_time_quantiles": _quantiles(self.return_times),
            "first_return": _sorted_counts(self.first_return),
            "ladder_heights_plus": _sorted_counts(self.ladder_heights_plus),
            "ladder_heights_minus": _sorted_counts(self.ladder_heights_minus),
        }


def run_ensemble(spec: WalkSpec, n_traj: int, n_steps: int, master_seed: int = 0,
                 parallelism: int = 1) -> EnsembleStats:
    """Run ``n_traj`` independent trajectories; identical output for any ``parallelism``."""
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    spec.samplers   # build once before threads share the spec

    def one(i):
        return EnsembleStats.from_trajectory(run_trajectory(spec, n_steps, master_seed, i))

    if parallelism <= 1:
        parts = [one(i) for i in range(n_traj)]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            parts = list(pool.map(one, range(n_traj)))
    out = EnsembleStats()
    for p in parts:
        out = out.merge(p)
    return out


# -- empirical laws ----------------------------------------------------------------------

@dataclass(eq=False)
class EmpiricalMeasure:
    """Sample counts; ``sample_size`` counts recorded samples, ``censored`` the rest."""

    counts: Counter
    sample_size: int
    censored: int = 0
    warnings: list = field(default_factory=list)

    @property
    def censored_fraction(self) -> float:
        tot = self.sample_size + self.censored
        return self.censored / tot if tot else 0.0

    def frequencies(self, window=None) -> dict[int, float]:
        if self.sample_size == 0:
            return {}
        return {int(k): v / self.sample_size for k, v in sorted(self.counts.items())
                if window is None or window[0] <= k <= window[1]}

    def tv(self, other) -> float:
        """Total variation to a dict of probabilities or a LatticeMeasure."""
        p = self.frequencies()
        if isinstance(other, LatticeMeasure):
            keys = sorted(p)
            q = dict(zip(keys, np.atleast_1d(other.pmf(np.array(keys, dtype=np.int64))).tolist()))
            outside = max(0.0, 1.0 - math.fsum(q.values()))
            return 0.5 * (math.fsum(abs(p[k] - q[k]) for k in keys) + outside)
        q = dict(other)
        keys = set(p) | set(q)
        return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)

    def to_measure(self) -> LatticeMeasure:
        """The empirical law as a finite measure (masses renormalized exactly)."""
        freqs = self.frequencies()
        total = math.fsum(freqs.values())
        return LatticeMeasure.finite({k: v / total for k, v in freqs.items()})

    def to_json(self) -> dict:
        return {"counts": _sorted_counts(self.counts), "sample_size": self.sample_size,
                "censored": self.censored, "warnings": list(self.warnings)}


def tv_tolerance(probs, n: int, z: float = 3.0) -> float:
    """z-sigma binomial bound on the TV error of an n-sample empirical law."""
    p = np.asarray(list(probs.values()) if isinstance(probs, dict) else probs, dtype=float)
    return 0.5 * z * float(np.sum(np.sqrt(p * (1.0 - p) / n)))


def first_crossing_law(spec: WalkSpec, x: int, n_samples: int, seed: int = 0,
                       max_steps: int = 10**6) -> EmpiricalMeasure:
    """Empirical law of the state at the first sign change from x."""
    out = np.empty(n_samples, dtype=np.int64)
    key = stream_key(seed, 1, x + (1 << 40))
    w, cens, st = _engine.first_crossings(np.int64(x), np.int64(n_samples), np.int64(max_steps),
                                          np.float64(spec.alpha), key, *spec.kernel_args(), out)
    if st != _engine.OK:
        _raise_overflow("first_crossing_law")
    u, c = np.unique(out[:w], return_counts=True)
    return EmpiricalMeasure(Counter(dict(zip(u.tolist(), c.tolist()))), int(w), int(cens))


def _ladder_sample(m: LatticeMeasure, direction: int, n: int, key, cap: int) -> EmpiricalMeasure:
    out = np.empty(n, dtype=np.int64)
    w, cens, st = _engine.ladder_heights(np.int64(direction), np.int64(n), np.int64(cap), key,
                                         *make_sampler(m).args(), out)
    if st != _engine.OK:
        _raise_overflow("empirical_ladder_measures")
    u, c = np.unique(out[:w], return_counts=True)
    em = EmpiricalMeasure(Counter(dict(zip(u.tolist(), c.tolist()))), int(w), int(cens))
    if em.censored_fraction > LADDER_CENSOR_WARN:
        msg = (f"{em.censored_fraction:.2%} of ladder epochs hit the {cap}-step cap; "
               "the empirical ladder law is biased toward short epochs")
        em.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    return em


@dataclass(eq=False)
class LadderMeasures:
    plus: EmpiricalMeasure
    minus: EmpiricalMeasure

    def __iter__(self):
        return iter((self.plus, self.minus))


def empirical_ladder_measures(spec: WalkSpec, n_samples: int, seed: int = 0,
                              max_epoch_steps: int = 10**6) -> LadderMeasures:
    """Strict ascending ladder heights of the mu-walk and descending ones of the mu'-walk."""
    plus = _ladder_sample(spec.mu, 1, n_samples, stream_key(seed, 2, 0), max_epoch_steps)
    minus = _ladder_sample(spec.mu_prime, -1, n_samples, stream_key(seed, 2, 1), max_epoch_steps)
    return LadderMeasures(plus, minus)


# -- self-consistency checks ------------------------------------------------------------------

@dataclass(eq=False)
class LadderReductionReport:
    n_crossings: int
    tv_crossing_states: float
    crossing_rate_original: float
    crossing_rate_reduced: float
    zero_rate_original: float
    zero_rate_reduced: float
    ladder: LadderMeasures

    def to_json(self) -> dict:
        return {"n_crossings": self.n_crossings, "tv_crossing_states": self.tv_crossing_states,
                "crossing_rate_original": self.crossing_rate_original,
                "crossing_rate_reduced": self.crossing_rate_reduced,
                "zero_rate_original": self.zero_rate_original,
                "zero_rate_reduced": self.zero_rate_reduced,
                "mu_hat_plus": self.ladder.plus.to_json(),
                "mu_hat_minus": self.ladder.minus.to_json()}


def ladder_reduction_check(spec: WalkSpec, n_crossings: int = 10**5, seed: int = 0,
                           n_ladder_samples: int = 10**5,
                           max_steps: int = 10**9) -> LadderReductionReport:
    """Compare X(mu, mu') watched at ladder epochs with a walk driven by the ladder laws.

    Both walks share their crossing chain, so the crossing-state laws must
    agree; rates are crossings per ladder epoch (original) and per step
    (reduced), zero rates likewise.
    """
    if spec.alpha != 0.0:
        raise PreconditionError("the ladder reduction is stated for alpha = 0")
    orig = run_trajectory(spec, max_steps, seed, 0, stop_after_crossings=n_crossings)
    ladder = empirical_ladder_measures(spec, n_ladder_samples, seed)
    reduced_spec = WalkSpec(ladder.plus.to_measure(), ladder.minus.to_measure(), 0.0, spec.x0)
    red = run_trajectory(reduced_spec, max_steps, seed, 1, stop_after_crossings=n_crossings)
    a = EmpiricalMeasure(Counter(orig.crossing_states.tolist()), len(orig.crossing_states))
    b = EmpiricalMeasure(Counter(red.crossing_states.tolist()), len(red.crossing_states))
    n_lad = max(len(orig.ladder_times), 1)
    return LadderReductionReport(
        n_crossings=min(len(orig.crossing_states), len(red.crossing_states)),
        tv_crossing_states=a.tv(b.frequencies()),
        crossing_rate_original=len(orig.crossing_times) / n_lad,
        crossing_rate_reduced=len(red.crossing_times) / red.steps,
        zero_rate_original=float(np.mean(orig.ladder_states == 0)) if len(orig.ladder_states) else 0.0,
        zero_rate_reduced=len(red.zero_times) / red.steps,
        ladder=ladder)


@dataclass(eq=False)
class OccupationIdentityReport:
    sites: list
    empirical: list
    predicted: list
    relative_errors: list
    n_excursions: int
    censored: int

    @property
    def max_relative_error(self) -> float:
        return max(self.relative_errors)

    def to_json(self) -> dict:
        return dict(self.__dict__, max_relative_error=self.max_relative_error)


def occupation_identity_check(mu: LatticeMeasure, mu_prime: LatticeMeasure,
                              n_excursions: int = 10**6, seed: int = 0, sites=None,
                              max_steps: int = 10**6) -> OccupationIdentityReport:
    """Mean visits before the first crossing, from rho-distributed starts, against nu.

    Starting from rho restricted to the crossing classes and normalized, the
    expected number of visits to n before C_1 equals nu(n) / |rho|.
    """
    trs = truncate(mu, 1e-13), truncate(mu_prime, 1e-13)
    window = (-trs[1].max_abs_site, trs[0].max_abs_site)
    cls = crossing_classes(mu, mu_prime)
    r = rho_measure(mu, mu_prime, window).masked(lambda x: any(x in c for c in cls))
    mass = r.total()
    nu_m = nu_measure(mu, mu_prime, window=window)
    if sites is None:
        sites = [s for s in (-1, 0, 1) if nu_m[s] > 0]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(3, 0))))
    starts = rng.choice(r.sites, size=n_excursions, p=r.values / mass).astype(np.int64)
    lo = min(sites)
    counts = np.zeros(max(sites) - lo + 1, dtype=np.int64)
    spec = WalkSpec(mu, mu_prime)
    cens, st = _engine.excursion_occupation(starts, np.int64(max_steps), np.float64(0.0),
                                            stream_key(seed, 3, 1), np.int64(lo),
                                            *spec.kernel_args(), counts)
    if st != _engine.OK:
        _raise_overflow("occupation_identity_check")
    emp = [counts[s - lo] / n_excursions for s in sites]
    pred = [nu_m[s] / mass for s in sites]
    rel = [abs(e - p) / p for e, p in zip(emp, pred)]
    return OccupationIdentityReport(list(sites), emp, pred, rel, n_excursions, int(cens))


def occupation_tv(stats, target) -> float:
    """TV between normalized occupation counts and a normalized ZMeasure."""
    occ = stats.occupation
    total = sum(occ.values())
    tgt = target.normalized()
    keys = set(occ) | {int(x) for x in tgt.sites}
    return 0.5 * math.fsum(abs(occ.get(k, 0) / total - tgt[k]) for k in keys) + 0.5 * tgt.tail_bound


def export_stats(stats: EnsembleStats, json_path, csv_path=None, extra: dict | None = None) -> None:
    report = stats.to_json()
    if extra:
        report.update(extra)
    with open(json_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["site", "count"])
            for k in sorted(stats.occupation):
                w.writerow([k, stats.occupation[k]])
