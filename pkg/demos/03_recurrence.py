"""Recurrence verdicts from moment conditions and the Kemperman
renewal diagnostic for a two-sided pair.
"""
from oscwalk import LatticeMeasure
from oscwalk.recurrence import classify, kemperman_diagnostic

pairs = {
    "geometric": (LatticeMeasure.geometric(0.5), LatticeMeasure.geometric(0.5, "negative")),
    "power 1.6": (LatticeMeasure.power(1.6), LatticeMeasure.power(1.6, "negative")),
    "power 1.4": (LatticeMeasure.power(1.4), LatticeMeasure.power(1.4, "negative")),
    "drifted": (LatticeMeasure.finite({-1: 0.3, 2: 0.7}), LatticeMeasure.finite({1: 0.3, -2: 0.7})),
}
for name, (mu, mup) in pairs.items():
    v = classify(mu, mup)
    print(f"{name:10s} {v.classification:18s} rule={v.rule} p={v.p}")

mu, mup = pairs["drifted"]
est = kemperman_diagnostic(mu, mup, h_max=20, n_sim=20_000, seed=1)
print("partial sums", est.partial_sums[[0, 4, 9, 19]])
for note in est.notes:
    print("note:", note)
