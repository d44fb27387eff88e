"""European call pricing: coordinate maps, the closed-form c = 0 price and a quadrature pricer.

All prices are undiscounted (zero rates, no dividends).

The closed form treats the volatility state as frozen at its initial value:
the transition kernel is evaluated on the slice ``xv' = xv`` and normalized
there, which gives a Black-type expression in the spot coordinate. The raw
slice weight that this normalization divides out is exposed by
:func:`vol_state_density`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special as sp
from scipy.integrate import IntegrationWarning, quad

from .errors import (DegenerateVarianceError, DomainError, IntegrabilityError, ParameterError,
                     QuadratureError, TimeDomainError, WNSLVError)
from .factors import FactorSet, discriminant
from .kernels import GaussianTransition, TransformedPoint, kernel_for
from .model import ModelParams
from .special import erfiinv, erfinv


@dataclass(frozen=True)
class PricingRequest:
    s: float
    k_strike: float
    v0: float
    t0: float
    t_expiry: float

    def __post_init__(self):
        if not (self.s > 0 and self.k_strike > 0):
            raise ParameterError("spot and strike must be positive")
        if not self.t_expiry > self.t0:
            raise TimeDomainError(f"t_expiry={self.t_expiry} must exceed t0={self.t0}")


@dataclass(frozen=True)
class PriceTerms:
    d1: float
    d2: float


@dataclass
class PriceGrid:
    s_values: np.ndarray
    k_values: np.ndarray
    prices: np.ndarray
    status: np.ndarray = None
    errors: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status is None:
            self.status = np.full(self.prices.shape, "ok", dtype=object)

    def rows(self):
        for i, s in enumerate(self.s_values):
            for j, k in enumerate(self.k_values):
                yield float(s), float(k), float(self.prices[i, j]), self.status[i, j]


# --- coordinate maps -----------------------------------------------------------

def _spot_coordinate(params: ModelParams, s, name: str = "s"):
    s = np.asarray(s, dtype=float)
    if params.c == 0:
        arg = params.gamma0 + params.gamma1 * s
        if np.any(arg <= 0):
            raise DomainError(f"{name}: gamma0 + gamma1*{name} must be positive (log domain)")
        return np.log(arg)
    scale = params.m0 * params.gamma1
    if params.c > 0:
        lo, hi = params.s_domain
        if np.any((s <= lo) | (s >= hi)):
            raise DomainError(f"{name} outside the open interval ({lo:.6g}, {hi:.6g}) (erf domain)")
        return math.sqrt(2.0 / params.c) * scale * erfinv(math.sqrt(2.0 * params.c / math.pi) * (s - params.gamma0) / scale)
    return math.sqrt(-2.0 / params.c) * scale * erfiinv(math.sqrt(-2.0 * params.c / math.pi) * (s - params.gamma0) / scale)


def _spot_from_coordinate(params: ModelParams, xs):
    xs = np.asarray(xs, dtype=float)
    if params.c == 0:
        return (np.exp(xs) - params.gamma0) / params.gamma1
    scale = params.m0 * params.gamma1
    r = math.sqrt(abs(params.c) / 2.0) / scale
    amp = scale * math.sqrt(math.pi / (2.0 * abs(params.c)))
    fn = sp.erf if params.c > 0 else sp.erfi
    return params.gamma0 + amp * fn(r * xs)


def to_transformed(params: ModelParams, s: float, v: float) -> TransformedPoint:
    xs = float(_spot_coordinate(params, s))
    sv = params.sigma0 + params.sigma1 * v
    if not sv > 0:
        raise DomainError("v: sigma0 + sigma1*v must be positive (log domain)")
    return TransformedPoint(xs, math.log(sv))


def from_transformed(params: ModelParams, p: TransformedPoint) -> tuple[float, float]:
    s = float(_spot_from_coordinate(params, p.xs))
    v = (math.exp(p.xv) - params.sigma0) / params.sigma1
    return s, v


# --- closed form (c = 0) -------------------------------------------------------

def _check_c0(fs: FactorSet, params: ModelParams) -> float:
    if fs.c != 0 or params.c != 0:
        raise ParameterError("closed-form pricing needs c = 0; use price_by_quadrature")
    if not abs(params.rho) < 1:
        raise ParameterError(f"pricing needs |rho| < 1, got {params.rho}")
    if not fs.g5 > 0:
        raise DegenerateVarianceError(f"g5={fs.g5} must be positive")
    delta = discriminant(fs, params).value
    if not delta > 0:
        raise IntegrabilityError(f"discriminant {delta:.6g} <= 0")
    return delta


def d_terms(fs: FactorSet, params: ModelParams, xs: float, xk: float) -> PriceTerms:
    delta = _check_c0(fs, params)
    G1, s1, rho = params.gamma1, params.sigma1, params.rho
    g1, g2, g3, g5 = fs.g1, fs.g2, fs.g3, fs.g5
    num = (g5 * (2 * xk - 2 * xs - 2 * G1 * params.k_omega * g1 - G1 * rho * s1 * g3)
           + G1 * rho * g3 * (2 * params.k_mu * g2 + G1 * rho * g3))
    d1 = num / (2.0 * math.sqrt(2.0) * G1 * math.sqrt(g5 * delta))
    d2 = 0.5 * G1 * math.sqrt(delta / (2.0 * g5))
    return PriceTerms(d1, d2)


def price_c0(fs: FactorSet, params: ModelParams, req: PricingRequest) -> float:
    """Closed-form call price for c = 0 with the volatility state frozen at v0."""
    _check_c0(fs, params)
    xs = float(_spot_coordinate(params, req.s, "s"))
    xk = float(_spot_coordinate(params, req.k_strike, "k_strike"))
    d = d_terms(fs, params, xs, xk)
    G1, rho, g3, g5 = params.gamma1, params.rho, fs.g3, fs.g5
    expo = rho * G1 * g3 * (2 * params.k_mu * fs.g2 + G1 * rho * g3 - params.sigma1 * g5) / (2 * g5)
    fwd = xs + G1 * params.k_omega * fs.g1 - expo
    # erfc keeps both legs accurate deep in and out of the money
    val = 0.5 / G1 * (math.exp(fwd) * sp.erfc(d.d1 - d.d2) - math.exp(xk) * sp.erfc(d.d1 + d.d2))
    return max(float(val), 0.0)


def vol_state_density(fs: FactorSet, params: ModelParams) -> float:
    """Kernel weight of the frozen slice ``xv' = xv`` (integrated over the spot coordinate)."""
    if not fs.g5 > 0:
        raise DegenerateVarianceError(f"g5={fs.g5} must be positive")
    s1 = abs(params.sigma1)
    shift = 2 * params.k_mu * fs.g2 - params.sigma1 * fs.g5
    return math.exp(-shift**2 / (8 * fs.g5)) / (math.sqrt(2 * math.pi * fs.g5) * s1)


# --- quadrature pricer --------------------------------------------------------

@dataclass(frozen=True)
class PointPayoff:
    """Delta payoff at a transformed point; sifts the kernel in ``marginal`` mode."""

    point: TransformedPoint


def call_payoff(k_strike: float) -> Callable:
    return lambda s, v: np.maximum(np.asarray(s) - k_strike, 0.0)


def _quad(fn, lo, hi, points, epsabs, epsrel, limit=400):
    pts = [p for p in (points or ()) if lo < p < hi] or None
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, err = quad(fn, lo, hi, points=pts, epsabs=epsabs, epsrel=epsrel, limit=limit)
        except IntegrationWarning as exc:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", IntegrationWarning)
                val, err = quad(fn, lo, hi, points=pts, epsabs=epsabs, epsrel=epsrel, limit=limit)
            raise QuadratureError(f"quadrature did not converge: {exc}", estimate=val, error_bound=err) from None
    return val, err


def _box(kernel, frm: TransformedPoint, width: float):
    if hasattr(kernel, "support"):
        return kernel.support(frm.xs, frm.xv, width)
    raise ParameterError("kernel needs a support() method or an explicit box")


def price_by_quadrature(kernel, params: ModelParams, req: PricingRequest, payoff: Callable | None = None,
                        mode: str = "conditional", box=None, width: float = 10.0,
                        epsabs: float = 1e-13, epsrel: float = 1e-11) -> float:
    """Expected payoff under a transition density by adaptive quadrature.

    ``kernel(xs, xv, xs', xv')`` is a density in transformed coordinates and
    ``payoff(s, v)`` acts on original coordinates (default: the call on
    ``req.k_strike``). ``mode="conditional"`` integrates on the slice
    ``xv' = xv`` and normalizes by the slice mass, the same frozen-volatility
    reduction as :func:`price_c0`; ``mode="marginal"`` integrates over both
    target coordinates.
    """
    frm = to_transformed(params, req.s, req.v0)
    (xlo, xhi), (ylo, yhi) = box if box is not None else _box(kernel, frm, width)
    if payoff is None:
        payoff = call_payoff(req.k_strike)
    kink = []
    try:
        kink.append(float(_spot_coordinate(params, req.k_strike)))
    except DomainError:
        pass

    if isinstance(payoff, PointPayoff):
        if mode != "marginal":
            raise ParameterError("point payoffs sift only in marginal mode")
        return float(kernel(frm.xs, frm.xv, payoff.point.xs, payoff.point.xv))

    def value(xsp, xvp):
        s, v = from_transformed(params, TransformedPoint(xsp, xvp))
        return float(payoff(s, v))

    if mode == "conditional":
        y = frm.xv
        dens = lambda xp: float(kernel(frm.xs, frm.xv, xp, y))
        mass, _ = _quad(dens, xlo, xhi, kink, epsabs, epsrel)
        num, _ = _quad(lambda xp: dens(xp) * value(xp, y), xlo, xhi, kink, epsabs, epsrel)
        if not mass > 0:
            raise QuadratureError("slice mass vanished", estimate=mass, error_bound=0.0)
        return num / mass
    if mode == "marginal":
        def inner(yp):
            return _quad(lambda xp: float(kernel(frm.xs, frm.xv, xp, yp)) * value(xp, yp),
                         xlo, xhi, kink, epsabs, epsrel)[0]
        return _quad(inner, ylo, yhi, None, epsabs, epsrel)[0]
    raise ParameterError(f"unknown mode {mode!r}")


def price_grid(fs: FactorSet, params: ModelParams, s_values, k_values, v0: float = 1.0) -> PriceGrid:
    """Closed-form prices on an (S, K) grid; failing cells get a status instead of aborting."""
    s_values = np.asarray(s_values, dtype=float)
    k_values = np.asarray(k_values, dtype=float)
    prices = np.full((s_values.size, k_values.size), np.nan)
    status = np.full(prices.shape, "ok", dtype=object)
    errors = {}
    for i, s in enumerate(s_values):
        for j, k in enumerate(k_values):
            try:
                req = PricingRequest(s, k, v0, fs.t0, fs.t if fs.t > fs.t0 else fs.t0 + 1.0)
                prices[i, j] = price_c0(fs, params, req)
            except WNSLVError as exc:
                status[i, j] = exc.code
                errors[(i, j)] = str(exc)
    return PriceGrid(s_values, k_values, prices, status, errors)


def kernel_for_pricing(fs: FactorSet, params: ModelParams) -> GaussianTransition:
    """Transition kernel for quadrature pricing (runs the c != 0 self-test when needed)."""
    return kernel_for(fs, params)
