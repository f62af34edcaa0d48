"""One-step transition rows and the crossing-chain kernel.

The crossing kernel from x < 0 sums over the last pre-crossing position:
C(x, y) = sum_{t=0}^{-x-1} mu(y - x - t) U(t), with U the renewal potential
of mu.  Rows from x >= 0 are obtained from the mirrored pair through the
map x -> -x - 1, which swaps Z0+ and Z- and keeps crossing times intact.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .classes import crossing_classes
from .errors import PreconditionError
from .measures import (
    DEFAULT_EPS_MASS,
    STRICTLY_NEGATIVE,
    STRICTLY_POSITIVE,
    LatticeMeasure,
    Potential,
    potential,
    support_summary,
    truncate,
    upper_tail,
)

ROW_TOL = 1e-10


@dataclass(frozen=True)
class KernelRow:
    source: int
    entries: dict[int, float]
    lost_mass: float = 0.0

    def total(self) -> float:
        return math.fsum(self.entries.values())

    def defect(self) -> float:
        return abs(self.total() + self.lost_mass - 1.0)

    def __getitem__(self, y: int) -> float:
        return self.entries.get(int(y), 0.0)


def _accumulate(targets: np.ndarray, weights: np.ndarray) -> dict[int, float]:
    uniq, inv = np.unique(targets, return_inverse=True)
    sums = np.zeros(len(uniq))
    np.add.at(sums, inv, weights)
    return {int(y): float(w) for y, w in zip(uniq, sums) if w > 0}


def full_kernel_row(mu: LatticeMeasure, mu_prime: LatticeMeasure, alpha: float, x: int,
                    eps_mass: float = DEFAULT_EPS_MASS) -> KernelRow:
    """Row x of the one-step operator of the oscillating walk.

    Jumps follow mu at x <= -1, mu_prime at x >= 1 and the mixture
    alpha*mu + (1-alpha)*mu_prime at 0.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if x < 0:
        parts = [(1.0, truncate(mu, eps_mass))]
    elif x > 0:
        parts = [(1.0, truncate(mu_prime, eps_mass))]
    else:
        parts = [(w, truncate(m, eps_mass)) for w, m in ((alpha, mu), (1.0 - alpha, mu_prime))
                 if w > 0]
    targets = np.concatenate([x + tr.sites for _, tr in parts])
    weights = np.concatenate([w * tr.masses for w, tr in parts])
    lost = math.fsum(w * tr.lost_mass for w, tr in parts)
    return KernelRow(int(x), _accumulate(targets, weights), lost)


@dataclass(frozen=True, eq=False)
class FullKernel:
    """Transition matrix of the walk restricted to ``window``.

    ``lost`` holds, per source row, the mass that left the window or was
    truncated away.  ``jump`` is the largest jump of the truncated supports.
    """

    window: tuple[int, int]
    matrix: csr_matrix
    lost: np.ndarray
    jump: int
    alpha: float
    eps_mass: float


def transition_matrix(mu: LatticeMeasure, mu_prime: LatticeMeasure, alpha: float = 0.0,
                      window=(-50, 50), eps_mass: float = DEFAULT_EPS_MASS) -> FullKernel:
    lo, hi = int(window[0]), int(window[1])
    if hi < lo:
        raise ValueError(f"empty window {window}")
    n = hi - lo + 1
    rows, cols, vals = [], [], []
    lost = np.zeros(n)
    for i, x in enumerate(range(lo, hi + 1)):
        row = full_kernel_row(mu, mu_prime, alpha, x, eps_mass)
        out = row.lost_mass
        for y, p in row.entries.items():
            if lo <= y <= hi:
                rows.append(i)
                cols.append(y - lo)
                vals.append(p)
            else:
                out += p
        lost[i] = out
    jump = max(truncate(mu, eps_mass).max_abs_site, truncate(mu_prime, eps_mass).max_abs_site)
    mat = csr_matrix((vals, (rows, cols)), shape=(n, n))
    return FullKernel((lo, hi), mat, lost, jump, alpha, eps_mass)


# -- crossing kernel -----------------------------------------------------------

def _climb_row(x: int, m: LatticeMeasure, eps_mass: float,
               U: np.ndarray) -> tuple[dict[int, float], float]:
    """Landing law of the first entrance into Z0+ from x < 0 for a Z+-valued walk.

    From x + t the truncated atoms miss the jumps beyond
    max(K, -x - t - 1), so the lost mass is U(t) times that tail.
    """
    tr = truncate(m, eps_mass)
    sites, masses = tr.sites, tr.masses
    depth = -x
    targets, weights = [], []
    for t in range(depth):
        jump_ok = sites >= depth - t
        targets.append(x + t + sites[jump_ok])
        weights.append(masses[jump_ok] * U[t])
    entries = _accumulate(np.concatenate(targets), np.concatenate(weights))
    lost = 0.0
    if tr.lost_mass > 0:
        K = tr.max_abs_site
        need = np.maximum(K, depth - 1 - np.arange(depth))
        lost = float(np.dot(U[:depth], upper_tail(m, need)))
    return entries, lost


def _check_onesided(mu, mu_prime):
    if (support_summary(mu).sign_class != STRICTLY_POSITIVE
            or support_summary(mu_prime).sign_class != STRICTLY_NEGATIVE):
        raise PreconditionError("the crossing kernel needs mu on Z+ and mu' on Z-")


def crossing_kernel_row(mu: LatticeMeasure, mu_prime: LatticeMeasure, x: int,
                        eps_mass: float = DEFAULT_EPS_MASS, *, strict: bool = True,
                        potentials: tuple[Potential, Potential] | None = None,
                        classes=None) -> KernelRow:
    """Row x of the crossing-chain kernel.

    With ``strict`` (the default) x must belong to a crossing class I_C(r).
    The formula itself is a probability law from every x; pass
    ``strict=False`` to evaluate it from transient or non-crossing states.
    """
    _check_onesided(mu, mu_prime)
    x = int(x)
    if strict:
        cls = classes if classes is not None else crossing_classes(mu, mu_prime)
        if not any(x in c for c in cls):
            raise PreconditionError(f"state {x} is not in any crossing class I_C(r)")
    depth = -x if x < 0 else x + 1
    if x < 0:
        U = potentials[0] if potentials else potential(mu, "positive", depth - 1)
        entries, lost = _climb_row(x, mu, eps_mass, U.values)
        return KernelRow(x, entries, lost)
    # mirror: x >= 0 under (mu, mu') is -x-1 < 0 under (-mu', -mu)
    Up = potentials[1] if potentials else potential(mu_prime, "negative", depth - 1)
    entries, lost = _climb_row(-x - 1, mu_prime.mirror(), eps_mass, Up.values)
    return KernelRow(x, {-y - 1: p for y, p in entries.items()}, lost)


@dataclass(frozen=True, eq=False)
class CrossingKernel:
    """Crossing-chain rows for every x in I_C cap window.

    Targets are kept on ``[lo - jump, hi + jump]``; anything beyond, and
    mass lost to truncation, is booked in each row's ``lost_mass`` rather
    than renormalized.
    """

    window: tuple[int, int]
    rows: dict[int, KernelRow]
    U: Potential
    U_prime: Potential
    eps_mass: float
    jump: int
    max_row_defect: float

    @property
    def target_window(self) -> tuple[int, int]:
        return (self.window[0] - self.jump, self.window[1] + self.jump)

    def row(self, x: int) -> KernelRow:
        return self.rows[int(x)]

    def to_sparse(self) -> tuple[csr_matrix, int]:
        """Matrix over the target window; returns (matrix, lowest site)."""
        lo, hi = self.target_window
        n = hi - lo + 1
        r, c, v = [], [], []
        for x, row in self.rows.items():
            for y, p in row.entries.items():
                r.append(x - lo)
                c.append(y - lo)
                v.append(p)
        return csr_matrix((v, (r, c)), shape=(n, n)), lo

    def metadata(self) -> dict:
        return {"window": list(self.window), "eps_mass": self.eps_mass,
                "max_row_defect": self.max_row_defect, "n_rows": len(self.rows),
                "sources": sorted(self.rows)}

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "prob"])
            for x in sorted(self.rows):
                for y in sorted(self.rows[x].entries):
                    w.writerow([x, y, repr(self.rows[x].entries[y])])

    def export_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)


def crossing_kernel_matrix(mu: LatticeMeasure, mu_prime: LatticeMeasure, window,
                           eps_mass: float = DEFAULT_EPS_MASS) -> CrossingKernel:
    _check_onesided(mu, mu_prime)
    lo, hi = int(window[0]), int(window[1])
    cls = crossing_classes(mu, mu_prime)
    sources = [x for x in range(lo, hi + 1) if any(x in c for c in cls)]
    if not sources:
        raise PreconditionError(f"window {window} does not meet any crossing class")
    radius = max(abs(lo), abs(hi) + 1, 1)
    pots = (potential(mu, "positive", radius), potential(mu_prime, "negative", radius))
    jump = max(truncate(mu, eps_mass).max_abs_site, truncate(mu_prime, eps_mass).max_abs_site)
    t_lo, t_hi = lo - jump, hi + jump
    rows: dict[int, KernelRow] = {}
    defect = 0.0
    for x in sources:
        row = crossing_kernel_row(mu, mu_prime, x, eps_mass, strict=False, potentials=pots)
        kept = {y: p for y, p in row.entries.items() if t_lo <= y <= t_hi}
        dropped = math.fsum(p for y, p in row.entries.items() if not t_lo <= y <= t_hi)
        row = KernelRow(x, kept, row.lost_mass + dropped)
        defect = max(defect, row.defect())
        rows[x] = row
    return CrossingKernel((lo, hi), rows, pots[0], pots[1], eps_mass, jump, defect)
