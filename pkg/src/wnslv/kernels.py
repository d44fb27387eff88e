"""Integral kernels: elementary solutions, heat transforms and composed SLV kernels.

Coordinates are the transformed ones, ``xs`` (spot) and ``xv`` (volatility
state). In them the generators read

    K1 = (m0^2 G1^2 / 2) (d_xx - d_x)        c = 0  (log spot)
    K1 = (m0^2 G1^2 / 2) d_xx + (c/2) xs d_x  c != 0 (erf spot)
    K2 = rho G1 s1 d_xy
    K3 = (s1^2 / 2) (d_yy - d_y)
    K4 = k_omega G1 d_x
    K5 = k_mu s1 d_y

(G1 = gamma1, s1 = sigma1). Every composed kernel is a bivariate Gaussian in
the target point, so it is stored as a mean map plus covariance rather than
as a long closed-form exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import (FormulaVerificationError, IntegrabilityError, NotTransformableError,
                     ParameterError, TimeDomainError)
from .factors import CoefficientSchedule, FactorSet, compute_factors, discriminant
from .model import ModelParams

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TransformedPoint:
    xs: float
    xv: float

    def __post_init__(self):
        if not (math.isfinite(self.xs) and math.isfinite(self.xv)):
            raise ParameterError("transformed coordinates must be finite")


@dataclass(frozen=True)
class KernelQuery:
    """A kernel evaluation request: elapsed time plus source and target points."""

    elapsed: float
    from_point: TransformedPoint
    to_point: TransformedPoint

    def __post_init__(self):
        if not self.elapsed >= 0:
            raise TimeDomainError(f"elapsed must be >= 0, got {self.elapsed}")


# --- elementary kernels -----------------------------------------------------

def heat_kernel(t, x, xp):
    """Fundamental solution of u_t = u_xx."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise TimeDomainError("heat kernel needs t > 0")
    d = np.asarray(xp, dtype=float) - np.asarray(x, dtype=float)
    return np.exp(-d * d / (4.0 * t)) / np.sqrt(4.0 * math.pi * t)


def mixed_kernel(t, x, y, xp, yp):
    """Formal kernel of u_t = u_xy.

    Not normalizable on its own: the real-space integral against a Gaussian
    converges only when the combined quadratic form is positive definite.
    Normalized as ``1 / (2 pi |t|)`` so that its Fourier multiplier is exactly
    ``exp(-t xi eta)``.
    """
    if np.any(np.asarray(t) == 0):
        raise TimeDomainError("mixed kernel needs t != 0")
    t = np.asarray(t, dtype=float)
    prod = (np.asarray(xp) - np.asarray(x)) * (np.asarray(yp) - np.asarray(y))
    return np.exp(-prod / t) / (_TWO_PI * np.abs(t))


def shift_kernel_apply(fn: Callable, t: float, direction: float = 1.0) -> Callable:
    """Action of the first-order kernel delta(x - x' + direction * t): x -> fn(x + direction t)."""
    if t == 0:
        return fn
    step = direction * t
    return lambda x: fn(np.asarray(x) + step)


def transport_apply(fn: Callable, f: Callable, t: float) -> Callable:
    """Action of exp(t f(x) d/dx), f > 0: x -> fn(x(t)) with dx/dtau = f(x), x(0) = x."""
    def flowed(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        for i, x0 in enumerate(x):
            sol = solve_ivp(lambda _, y: f(y), (0.0, t), [x0], rtol=1e-11, atol=1e-12)
            out[i] = sol.y[0, -1]
        return fn(out if out.size > 1 else out[0])
    return flowed


def kernel_k1(params: ModelParams, c: float, elapsed: float, xs, xsp):
    """Spot-diffusion kernel of K1 (the delta in xv is left implicit)."""
    if elapsed <= 0:
        raise TimeDomainError("k1 needs elapsed > 0")
    scale2 = (params.m0 * params.gamma1) ** 2
    xs, xsp = np.asarray(xs) + 0.0, np.asarray(xsp) + 0.0  # complex arguments pass through
    if c == 0:
        var = scale2 * elapsed
        d = xs - xsp
        return np.exp(-scale2 * elapsed / 8.0 - d * d / (2.0 * var) + 0.5 * d) / np.sqrt(_TWO_PI * var)
    grow = math.exp(0.5 * c * elapsed)
    var = scale2 * grow * math.sinh(0.5 * c * elapsed) / (0.5 * c)
    d = grow * xs - xsp
    return np.exp(-d * d / (2.0 * var)) / np.sqrt(_TWO_PI * var)


def kernel_k3(params: ModelParams, elapsed: float, xv, xvp):
    """Volatility-diffusion kernel of K3 (the delta in xs is left implicit)."""
    if elapsed <= 0:
        raise TimeDomainError("k3 needs elapsed > 0")
    var = params.sigma1**2 * elapsed
    d = (np.asarray(xv) + 0.0) - np.asarray(xvp)
    return np.exp(-params.sigma1**2 * elapsed / 8.0 - d * d / (2.0 * var) + 0.5 * d) / np.sqrt(_TWO_PI * var)


def kernel_k2(params: ModelParams, elapsed: float, xs, xv, xsp, xvp):
    """Mixed kernel of K2; see :func:`mixed_kernel` for its (non-)normalizability."""
    scale = params.rho * params.gamma1 * params.sigma1
    return mixed_kernel(scale * elapsed, xs, xv, xsp, xvp)


# --- reduction of f(x) u_xx to the heat equation ----------------------------

@dataclass(frozen=True)
class HeatTransform:
    """Variable change mapping u_t = f(x) u_xx onto the heat equation.

    ``phi`` reparameterizes time, ``psi(x, t) = sqrt(phi'(t)) g(x)`` maps space
    and ``xi`` is the gauge factor; ``g(x) = int_{x0}^x dx'/sqrt(f(x'))``.
    """

    c1: float
    c2: float
    f: Callable
    g: Callable
    x0: float
    residual: float

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        if self.c1 == 0:
            return t
        r = math.sqrt(abs(self.c1))
        return np.tan(r * t) / r if self.c1 > 0 else np.tanh(r * t) / r

    def dphi(self, t):
        t = np.asarray(t, dtype=float)
        if self.c1 == 0:
            return np.ones_like(t)
        r = math.sqrt(abs(self.c1))
        return 1.0 / np.cos(r * t) ** 2 if self.c1 > 0 else 1.0 / np.cosh(r * t) ** 2

    def d2phi_over_dphi(self, t):
        t = np.asarray(t, dtype=float)
        if self.c1 == 0:
            return np.zeros_like(t)
        r = math.sqrt(abs(self.c1))
        return 2.0 * r * np.tan(r * t) if self.c1 > 0 else -2.0 * r * np.tanh(r * t)

    def psi(self, x, t):
        return np.sqrt(self.dphi(t)) * self.g(x)

    def xi(self, x, t):
        gx = self.g(x)
        return (np.exp(-0.25 * self.c2 * np.asarray(t)) * (self.dphi(t) * self.f(x)) ** -0.25
                * np.exp(-0.125 * self.d2phi_over_dphi(t) * gx * gx))

    def kernel(self, t, x, xp, t0: float = 0.0):
        """Fundamental solution of u_t = f u_xx from (t0, xp) to (t, x), in dx' measure."""
        dpsi = np.sqrt(self.dphi(t0)) / np.sqrt(self.f(xp))
        return (dpsi * self.xi(xp, t0) / self.xi(x, t)
                * heat_kernel(self.phi(t) - self.phi(t0), self.psi(x, t), self.psi(xp, t0)))


def f_transform(f: Callable, domain: tuple, x0: float | None = None, tol: float = 1e-6,
                n: int = 201) -> HeatTransform:
    """Fit ``f'' - (3/4) f'^2 / f = c1 g^2 + c2`` on ``domain`` and build the transform.

    Raises :class:`NotTransformableError` when the least-squares residual,
    relative to the size of the left-hand side, exceeds ``tol``.
    """
    lo, hi = (float(d) for d in domain)
    if not lo < hi:
        raise ParameterError("domain must be an increasing interval")
    if x0 is None:
        x0 = 0.0 if lo <= 0.0 <= hi else lo
    pad = 1e-3 * (hi - lo)
    xs = np.linspace(lo + pad, hi - pad, n)
    fx = np.asarray(f(xs), dtype=float)
    if np.any(fx <= 0):
        raise ParameterError("f must be positive on the domain")
    h = 1e-4 * np.maximum(1.0, np.abs(xs))
    fp = (np.asarray(f(xs + h)) - np.asarray(f(xs - h))) / (2 * h)
    fpp = (np.asarray(f(xs + h)) - 2 * fx + np.asarray(f(xs - h))) / h**2
    lhs = fpp - 0.75 * fp**2 / fx

    def g(x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x)
        out = np.empty_like(flat)
        from scipy.integrate import quad
        for i, xi in enumerate(flat):
            out[i] = quad(lambda s: 1.0 / math.sqrt(float(f(s))), x0, xi, epsabs=1e-13, epsrel=1e-12)[0]
        return out.reshape(x.shape)[()] if x.ndim == 0 else out.reshape(x.shape)

    gx = g(xs)
    design = np.column_stack([gx**2, np.ones_like(gx)])
    (c1, c2), *_ = np.linalg.lstsq(design, lhs, rcond=None)
    scale = max(1.0, float(np.max(np.abs(lhs))))
    resid = float(np.max(np.abs(design @ np.array([c1, c2]) - lhs))) / scale
    if resid > tol:
        raise NotTransformableError(f"condition residual {resid:.3g} exceeds tol {tol:g}")
    snap = 10 * tol * scale
    c1 = 0.0 if abs(c1) < snap else float(c1)
    c2 = 0.0 if abs(c2) < snap else float(c2)
    return HeatTransform(c1=c1, c2=c2, f=f, g=g, x0=float(x0), residual=resid)


# --- composed kernels ---------------------------------------------------------

@dataclass(frozen=True)
class GaussianTransition:
    """Bivariate Gaussian transition density in transformed coordinates.

    Target mean is ``(scale * xs + shift_s, xv + shift_v)``; ``cov`` is the
    2x2 covariance of the target point.
    """

    scale: float
    shift_s: float
    shift_v: float
    cov: tuple
    c: float

    @property
    def det(self) -> float:
        (a, b), (_, d) = self.cov
        return a * d - b * b

    def mean(self, xs, xv):
        return self.scale * np.asarray(xs) + self.shift_s, np.asarray(xv) + self.shift_v

    def __call__(self, xs, xv, xsp, xvp):
        (cxx, cxy), (_, cyy) = self.cov
        mx, my = self.mean(xs, xv)
        dx = np.asarray(xsp) - mx
        dy = np.asarray(xvp) - my
        det = self.det
        q = (cyy * dx * dx - 2.0 * cxy * dx * dy + cxx * dy * dy) / det
        return np.exp(-0.5 * q) / (_TWO_PI * math.sqrt(det))

    def support(self, xs, xv, width: float = 10.0):
        """Box of ``width`` standard deviations around the target mean."""
        mx, my = self.mean(xs, xv)
        sx, sy = math.sqrt(self.cov[0][0]), math.sqrt(self.cov[1][1])
        return (float(mx) - width * sx, float(mx) + width * sx), (float(my) - width * sy, float(my) + width * sy)

    def conditional_s(self, xs, xv, xvp):
        """Mean and variance of the spot coordinate given the target xv'."""
        (cxx, cxy), (_, cyy) = self.cov
        mx, my = self.mean(xs, xv)
        return mx + cxy / cyy * (xvp - my), cxx - cxy * cxy / cyy


def transition_kernel(fs: FactorSet, params: ModelParams) -> GaussianTransition:
    """Composed fundamental solution for the factor set (either c-case)."""
    if not abs(params.rho) < 1:
        raise ParameterError(f"kernels need |rho| < 1, got {params.rho}")
    disc = discriminant(fs, params)
    if not disc.value > 0:
        raise IntegrabilityError(f"discriminant {disc.value:.6g} <= 0; kernel is not integrable")
    G1, s1 = params.gamma1, params.sigma1
    shift_v = params.k_mu * s1 * fs.g2 - 0.5 * s1**2 * fs.g5
    cyy = s1**2 * fs.g5
    if fs.c == 0:
        scale = 1.0
        shift_s = params.k_omega * G1 * fs.g1 - 0.5 * (params.m0 * G1) ** 2 * fs.g4
        cxx = (params.m0 * G1) ** 2 * fs.g4
        cxy = params.rho * G1 * s1 * fs.g3
    else:
        scale = math.exp(0.5 * fs.c * fs.g4)
        shift_s = scale * params.k_omega * G1 * fs.g1
        cxx = (params.m0 * G1) ** 2 * fs.g4_tilde
        cxy = params.rho * G1 * s1 * fs.g3 * scale
    return GaussianTransition(scale=scale, shift_s=shift_s, shift_v=shift_v,
                              cov=((cxx, cxy), (cxy, cyy)), c=fs.c)


def composed_kernel_c0(fs: FactorSet, params: ModelParams, frm: TransformedPoint, to: TransformedPoint) -> float:
    if fs.c != 0:
        raise ParameterError("composed_kernel_c0 needs a c = 0 factor set")
    return float(transition_kernel(fs, params)(frm.xs, frm.xv, to.xs, to.xv))


def composed_kernel_c(fs: FactorSet, params: ModelParams, frm: TransformedPoint, to: TransformedPoint) -> float:
    if fs.c == 0:
        raise ParameterError("composed_kernel_c needs c != 0; use composed_kernel_c0")
    verify_kernel_c(params.replace(c=fs.c))
    return float(transition_kernel(fs, params)(frm.xs, frm.xv, to.xs, to.xv))


def kernel_for(fs: FactorSet, params: ModelParams) -> GaussianTransition:
    """Transition kernel, passing the c != 0 verification gate when needed."""
    if fs.c != 0:
        verify_kernel_c(params.replace(c=fs.c))
    return transition_kernel(fs, params)


# --- PDE residuals and the c != 0 gate -----------------------------------------

def apply_generator(params: ModelParams, c: float, alphas, fn: Callable, xs: float, xv: float,
                    hs: float, hv: float):
    """Central-difference ``sum_i alpha_i K_i fn`` at (xs, xv).

    Returns ``(value, scale)`` where scale sums the magnitudes of the terms.
    """
    a1, a2, a3, a4, a5 = alphas
    f0 = fn(xs, xv)
    fxp, fxm = fn(xs + hs, xv), fn(xs - hs, xv)
    fyp, fym = fn(xs, xv + hv), fn(xs, xv - hv)
    fx = (fxp - fxm) / (2 * hs)
    fy = (fyp - fym) / (2 * hv)
    fxx = (fxp - 2 * f0 + fxm) / hs**2
    fyy = (fyp - 2 * f0 + fym) / hv**2
    fxy = (fn(xs + hs, xv + hv) - fn(xs + hs, xv - hv) - fn(xs - hs, xv + hv) + fn(xs - hs, xv - hv)) / (4 * hs * hv)
    A = 0.5 * (params.m0 * params.gamma1) ** 2
    B = 0.5 * params.sigma1**2
    if c == 0:
        k1 = A * (fxx - fx)
    else:
        k1 = A * fxx + 0.5 * c * xs * fx
    terms = (a1 * k1,
             a2 * params.rho * params.gamma1 * params.sigma1 * fxy,
             a3 * B * (fyy - fy),
             a4 * params.k_omega * params.gamma1 * fx,
             a5 * params.k_mu * params.sigma1 * fy)
    return sum(terms), sum(abs(t) for t in terms)


def kernel_pde_residual(params: ModelParams, c: float, alphas, t: float, frm: TransformedPoint,
                        to: TransformedPoint, rel_step: float = 1e-3) -> float:
    """Relative residual of (d_t - L) k for the composed kernel with constant coefficients."""
    sched = CoefficientSchedule.constant(alphas, 0.0, 2.0 * t + 1.0)

    def k_at(tt):
        kern = transition_kernel(compute_factors(sched, 0.0, tt, c), params)
        return lambda xs, xv: float(kern(xs, xv, to.xs, to.xv))

    ht = rel_step * t
    dk = (k_at(t + ht)(frm.xs, frm.xv) - k_at(t - ht)(frm.xs, frm.xv)) / (2 * ht)
    kern = transition_kernel(compute_factors(sched, 0.0, t, c), params)
    hs = rel_step * math.sqrt(kern.cov[0][0])
    hv = rel_step * math.sqrt(kern.cov[1][1])
    lk, scale = apply_generator(params, c, alphas, k_at(t), frm.xs, frm.xv, hs, hv)
    return abs(dk - lk) / max(abs(dk), scale, 1e-300)


_GATE_TOL = 1e-4


@lru_cache(maxsize=64)
def verify_kernel_c(params: ModelParams) -> float:
    """Self-test of the c != 0 composed kernel against its PDE.

    Evaluated once per parameter set before any c != 0 kernel value is
    released; raises :class:`FormulaVerificationError` on failure.
    """
    rho = params.rho if abs(params.rho) < 0.5 * params.m0 else 0.5 * params.m0 * math.copysign(1.0, params.rho or 1.0)
    probe = params.replace(rho=rho)
    worst = 0.0
    rng = np.random.default_rng(20240607)
    for _ in range(4):
        alphas = tuple(rng.uniform(0.5, 1.5, 5))
        t = float(rng.uniform(0.2, 0.8))
        fs = compute_factors(CoefficientSchedule.constant(alphas, 0.0, 1.0), 0.0, t, params.c)
        kern = transition_kernel(fs, probe)
        frm = TransformedPoint(float(rng.normal(0, 0.5)), float(rng.normal(-1.5, 0.3)))
        mx, my = kern.mean(frm.xs, frm.xv)
        to = TransformedPoint(float(mx + 0.7 * math.sqrt(kern.cov[0][0]) * rng.normal()),
                              float(my + 0.7 * math.sqrt(kern.cov[1][1]) * rng.normal()))
        worst = max(worst, kernel_pde_residual(probe, params.c, alphas, t, frm, to))
    if not worst <= _GATE_TOL:
        raise FormulaVerificationError(f"formula verification failed: PDE residual {worst:.3g} > {_GATE_TOL:g}")
    return worst


# --- numerical composition of the factorized propagator ----------------------

def chain_kernel(fs: FactorSet, params: ModelParams, frm: TransformedPoint, to: TransformedPoint,
                 n_nodes: int = 400, width: float = 12.0) -> float:
    """Kernel of the factorized propagator composed numerically, factor by factor.

    The K1 and K3 kernels are Fourier transformed by Gauss-Legendre quadrature,
    K2 acts through its multiplier ``exp(-g3 rho G1 s1 xi eta)`` (its real-space
    integral diverges whenever the result is integrable), the inverse transform
    is a second 2D quadrature and K4, K5 are argument shifts. Independent of
    :func:`transition_kernel`.
    """
    c = fs.c
    G1, s1 = params.gamma1, params.sigma1
    tau = params.rho * G1 * s1 * fs.g3
    # width of k1 and k3 as functions of their first argument
    if c == 0:
        var_u = (params.m0 * G1) ** 2 * fs.g4
        centre_u = to.xs + 0.5 * var_u
    else:
        grow = math.exp(0.5 * c * fs.g4)
        var1 = (params.m0 * G1) ** 2 * grow * math.sinh(0.5 * c * fs.g4) / (0.5 * c)
        var_u = var1 / grow**2
        centre_u = to.xs / grow
    var_w = s1**2 * fs.g5
    centre_w = to.xv + 0.5 * var_w
    det = var_u * var_w - tau * tau
    if det <= 0:
        raise IntegrabilityError("factor chain does not converge: K2 multiplier dominates")

    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    r = abs(tau) / math.sqrt(var_u * var_w)
    # keep exp(|tau| xi eta) representable on the frequency box
    w_freq = min(width, math.sqrt(600.0 * (1.0 - r * r) / r)) if r > 0 else width
    xi = w_freq * math.sqrt(var_w / det) * nodes
    eta = w_freq * math.sqrt(var_u / det) * nodes
    wxi = w_freq * math.sqrt(var_w / det) * weights
    weta = w_freq * math.sqrt(var_u / det) * weights

    def transform(kfun, centre, var, freq):
        # integrate along Im(u) = -freq * var, where the integrand is a real bell
        half = width * math.sqrt(var)
        s = centre + half * nodes
        z = s[None, :] - 1j * freq[:, None] * var
        return (kfun(z) * np.exp(-1j * freq[:, None] * z)) @ (half * weights)

    if not fs.g4 > 0:
        raise TimeDomainError("chain composition needs g4 > 0")
    G1hat = transform(lambda z: kernel_k1(params, c, fs.g4, z, to.xs), centre_u, var_u, xi)
    G3hat = transform(lambda z: kernel_k3(params, fs.g5, z, to.xv), centre_w, var_w, eta)
    X = frm.xs + params.k_omega * G1 * fs.g1
    Y = frm.xv + params.k_mu * s1 * fs.g2
    left = wxi * G1hat * np.exp(1j * xi * X)
    right = weta * G3hat * np.exp(1j * eta * Y)
    mult = np.exp(-tau * np.outer(xi, eta))
    return float((left @ mult @ right).real / (4.0 * math.pi**2))


def rho_sign_change(fs_builder: Callable[[float], float], lo: float, hi: float) -> float:
    """Root in rho of a signed discriminant function on [lo, hi]."""
    return brentq(fs_builder, lo, hi, xtol=1e-14)
