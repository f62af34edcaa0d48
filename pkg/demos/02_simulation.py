"""Seeded simulation: occupation frequencies against the normalized
invariant measure, and first-crossing laws against the exact kernel.
"""
from oscwalk import LatticeMeasure
from oscwalk.invariants import ZERO_POSITIVE, nu
from oscwalk.kernels import crossing_kernel_row
from oscwalk.simulate import WalkSpec, first_crossing_law, occupation_tv, run_ensemble, tv_tolerance

mu = LatticeMeasure.geometric(0.5)
mu_prime = LatticeMeasure.geometric(0.5, "negative")
spec = WalkSpec(mu, mu_prime, alpha=0.0, x0=0)

stats = run_ensemble(spec, n_traj=4, n_steps=250_000, master_seed=2024)
print("TV(occupation, nu) =", occupation_tv(stats, nu(mu, mu_prime, ZERO_POSITIVE, (-40, 40))))

n = 50_000
for x in (-3, 0, 5):
    row = crossing_kernel_row(mu, mu_prime, x, 1e-12, strict=False)
    emp = first_crossing_law(spec, x, n, seed=x + 10)
    print(f"from {x:>2}: TV {emp.tv(row.entries):.4f}  3-sigma bound {tv_tolerance(row.entries, n):.4f}")
