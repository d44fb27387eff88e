"""Reference parameter sets used by the demos, the CLI defaults and the tests."""

from .factors import CoefficientSchedule
from .model import ModelParams, SabrParams
from .montecarlo import McConfig

S0 = 100.0
V0 = 0.2
EXPIRY = 1.0

# c = 0 model whose spot leg matches SABR with beta = 1 and alpha = 0.2
REFERENCE_MODEL = ModelParams(m0=1.0, k_omega=0.0, k_mu=0.0, sigma0=0.0, sigma1=0.2,
                              gamma0=0.0, gamma1=0.2, rho=0.5, c=0.0)
UNIT_SCHEDULE = CoefficientSchedule.constant((1.0,) * 5, 0.0, EXPIRY)

REFERENCE_SABR = SabrParams(alpha=0.2, beta=1.0, rho=0.5, s0=S0, v0=V0)
BENCH_CONFIG = McConfig(n_paths=10_000, n_steps=250, t0=0.0, t_expiry=EXPIRY, seed=2024,
                        scheme="exact-vol-euler-asset", s0=S0, v0=V0, keep_paths=False)

SPOT_GRID = (80.0, 120.0, 9)
STRIKE_GRID = (70.0, 130.0, 13)
