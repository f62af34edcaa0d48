"""Essential classes, the crossing kernel and the two invariant measures
for a walk that jumps up from the left half-line and down from the right.
"""
from oscwalk import LatticeMeasure
from oscwalk.classes import crossing_classes, essential_classes
from oscwalk.invariants import ZERO_POSITIVE, nu, rho, stationarity_residual, total_mass_identity_check
from oscwalk.kernels import crossing_kernel_matrix, transition_matrix

mu = LatticeMeasure.finite({2: 0.25, 4: 0.25, 10: 0.5})
mu_prime = LatticeMeasure.finite({-4: 0.5, -1: 0.5})

dec = essential_classes(mu, mu_prime)
print("period", dec.delta)
for c in dec.classes:
    print("essential class", c)
for cc in crossing_classes(mu, mu_prime):
    print("crossing states never entered from the other side:", sorted(cc.noncrossing))

window = (-6, 11)
n = nu(mu, mu_prime, ZERO_POSITIVE, window)
print("nu   ", n.to_dict())
P = transition_matrix(mu, mu_prime, 0.0, window)
print("nu P = nu up to", stationarity_residual(n, P).interior)

C = crossing_kernel_matrix(mu, mu_prime, window)
r = rho(mu, mu_prime, window).masked(lambda x: x in C.rows)
print("rho  ", r.to_dict())
print("rho C = rho up to", stationarity_residual(r, C).interior)

mass = total_mass_identity_check(mu, mu_prime)
print("mass of nu on each side", mass.plus_mass, mass.minus_mass)
