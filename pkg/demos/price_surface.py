"""Closed-form call prices on a spot/strike grid, checked against the quadrature pricer."""

import numpy as np

from wnslv.factors import CoefficientSchedule, compute_factors
from wnslv.kernels import transition_kernel
from wnslv.presets import REFERENCE_MODEL, SPOT_GRID, STRIKE_GRID
from wnslv.pricing import PricingRequest, price_by_quadrature, price_grid

T = 1.0
fs = compute_factors(CoefficientSchedule.constant((1.0,) * 5, 0.0, T), 0.0, T, 0.0)
spots = np.linspace(*SPOT_GRID)
strikes = np.linspace(*STRIKE_GRID)
pg = price_grid(fs, REFERENCE_MODEL, spots, strikes, v0=0.2)

print("S \\ K " + " ".join(f"{k:7.1f}" for k in strikes[::3]))
for s, row in zip(spots, pg.prices):
    print(f"{s:6.1f} " + " ".join(f"{p:7.3f}" for p in row[::3]))

kern = transition_kernel(fs, REFERENCE_MODEL)
worst = 0.0
for s in spots[::4]:
    for k in strikes[::4]:
        req = PricingRequest(s, k, 0.2, 0.0, T)
        closed = pg.prices[list(spots).index(s), list(strikes).index(k)]
        worst = max(worst, abs(closed - price_by_quadrature(kern, REFERENCE_MODEL, req)) / closed)
print(f"\nworst relative gap to the quadrature oracle: {worst:.2e}")
