"""Stochastic local volatility pricing via a Wei-Norman factorized propagator."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .model import ModelParams, SabrParams, gamma_of_S, validate_closure  # noqa: E402
from .factors import CoefficientSchedule, FactorSet, compute_factors, discriminant  # noqa: E402
from .kernels import TransformedPoint, transition_kernel, composed_kernel_c0, composed_kernel_c  # noqa: E402
from .pricing import PricingRequest, price_c0, price_by_quadrature, price_grid, to_transformed  # noqa: E402
from .montecarlo import McConfig, simulate_slv, simulate_sabr, ensemble_stats, benchmark_pair  # noqa: E402
from .implied import bs_call, implied_vol, surface  # noqa: E402
