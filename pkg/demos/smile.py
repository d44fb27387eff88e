"""Implied volatility across strikes for a few correlations.

With an affine local factor the spot marginal is a shifted lognormal, so the
curves are skews rather than smiles. Cells marked "oob" price below intrinsic:
the frozen-volatility price carries a correlation-dependent forward shift.
"""

import numpy as np

from wnslv.factors import CoefficientSchedule, compute_factors
from wnslv.implied import surface
from wnslv.presets import REFERENCE_MODEL
from wnslv.pricing import price_grid

strikes = np.linspace(70, 130, 7)
fs = compute_factors(CoefficientSchedule.constant((1.0,) * 5, 0.0, 1.0), 0.0, 1.0, 0.0)
print("rho   " + " ".join(f"{k:7.0f}" for k in strikes))
for rho in (-0.5, 0.0, 0.5):
    vs = surface(price_grid(fs, REFERENCE_MODEL.replace(rho=rho), [100.0], strikes, v0=0.2), 1.0)
    cells = (f"{v:7.4f}" if st == "ok" else f"{'oob':>7}" for v, st in zip(vs.vols[0], vs.status[0]))
    print(f"{rho:+.1f}  " + " ".join(cells))
