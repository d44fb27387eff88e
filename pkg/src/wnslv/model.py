"""SLV model parameterization, coefficient functions and closure checks.

The model is

    dS = k_omega * Gamma(S) dt + m0 * Gamma(S) dW1
    dv = k_mu * sigma(v) dt + sigma(v) dW2,      sigma(v) = sigma0 + sigma1 * v

with the local factor ``Gamma`` fixed by ``m0**2 * Gamma * Gamma'' + c = 0``:
affine for ``c = 0``, an inverse-erf bump for ``c > 0`` (finite S-interval) and an
inverse-erfi profile for ``c < 0``.

Note on ``rho``: the kernel layer treats ``rho`` as the coefficient of the mixed
generator ``rho * Gamma(S) * sigma(v) * d2/dSdv``. For Wiener correlation ``r``
that coefficient is ``r * m0``, so the two readings agree when ``m0 = 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import BoundaryError, ParameterError, SpecError
from .special import erfiinv, erfinv

MODEL_KEYS = ("m0", "k_omega", "k_mu", "sigma0", "sigma1", "gamma0", "gamma1", "rho", "c")


@dataclass(frozen=True)
class ModelParams:
    m0: float
    k_omega: float
    k_mu: float
    sigma0: float
    sigma1: float
    gamma0: float
    gamma1: float
    rho: float
    c: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            val = float(getattr(self, f.name))
            if not math.isfinite(val):
                raise ParameterError(f"{f.name} must be finite, got {val}")
            object.__setattr__(self, f.name, val)
        if self.m0 < 0 or (self.m0 == 0 and self.c != 0):
            raise ParameterError(f"m0 must be positive (zero allowed only for c = 0), got {self.m0}")
        if self.gamma1 <= 0:
            raise ParameterError(f"gamma1 must be positive, got {self.gamma1}")
        if self.sigma1 == 0:
            raise ParameterError("sigma1 must be nonzero")
        # |rho| = 1 is a degenerate but simulable case; kernels and pricing reject it
        if not abs(self.rho) <= 1:
            raise ParameterError(f"|rho| must be <= 1, got {self.rho}")

    @property
    def branch(self) -> str:
        """``'affine'`` (c = 0), ``'erf'`` (c > 0) or ``'erfi'`` (c < 0)."""
        if self.c == 0:
            return "affine"
        return "erf" if self.c > 0 else "erfi"

    @property
    def half_width(self) -> float:
        """Half-width of the admissible S-interval; ``inf`` unless c > 0."""
        if self.c > 0:
            return math.sqrt(math.pi / (2.0 * self.c)) * self.m0 * self.gamma1
        return math.inf

    @property
    def s_domain(self) -> tuple[float, float]:
        if self.c > 0:
            return (self.gamma0 - self.half_width, self.gamma0 + self.half_width)
        if self.c == 0:
            return (-self.gamma0 / self.gamma1, math.inf)
        return (-math.inf, math.inf)

    def replace(self, **changes) -> "ModelParams":
        return ModelParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in MODEL_KEYS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        missing = [k for k in MODEL_KEYS if k not in data]
        if missing:
            raise SpecError(f"model is missing key(s): {', '.join(missing)}",
                            code="schema_violation", missing=missing)
        return cls(**{k: data[k] for k in MODEL_KEYS})

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SabrParams:
    alpha: float
    beta: float
    rho: float
    s0: float
    v0: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ParameterError(f"alpha must be non-negative, got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ParameterError(f"beta must lie in [0, 1], got {self.beta}")
        if abs(self.rho) > 1:
            raise ParameterError(f"|rho| must be <= 1, got {self.rho}")
        if self.s0 <= 0 or self.v0 <= 0:
            raise ParameterError("s0 and v0 must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "SabrParams":
        keys = ("alpha", "beta", "rho", "s0", "v0")
        missing = [k for k in keys if k not in data]
        if missing:
            raise SpecError(f"sabr params missing key(s): {', '.join(missing)}",
                            code="schema_violation", missing=missing)
        return cls(**{k: float(data[k]) for k in keys})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ConditionReport:
    violations: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "violations": [list(v) for v in self.violations],
                "residuals": self.residuals,
                "warnings": list(self.warnings)}


def gamma_of_S(params: ModelParams, S):
    """Local volatility factor Gamma(S).

    Raises :class:`BoundaryError` for ``c > 0`` when S is at or beyond
    ``gamma0 ± half_width``.
    """
    S = np.asarray(S, dtype=float)
    if params.c == 0:
        out = params.gamma0 + params.gamma1 * S
    else:
        scale = params.m0 * params.gamma1
        if params.c > 0:
            lo, hi = params.s_domain
            if np.any((S <= lo) | (S >= hi)):
                raise BoundaryError(f"S outside the open interval ({lo}, {hi}) for c={params.c}")
            u = erfinv(math.sqrt(2.0 * params.c / math.pi) * (S - params.gamma0) / scale)
            out = params.gamma1 * np.exp(-u * u)
        else:
            u = erfiinv(math.sqrt(-2.0 * params.c / math.pi) * (S - params.gamma0) / scale)
            out = params.gamma1 * np.exp(u * u)
    return out[()] if np.ndim(out) == 0 else out


def gamma_clipped(params: ModelParams, S):
    """Gamma(S) that vanishes at and beyond the c > 0 boundary instead of raising."""
    S = np.asarray(S, dtype=float)
    if params.c <= 0:
        return gamma_of_S(params, S)
    lo, hi = params.s_domain
    inside = (S > lo) & (S < hi)
    out = np.zeros_like(S)
    if np.any(inside):
        out[inside] = gamma_of_S(params, S[inside])
    return out


def sigma_of_v(params: ModelParams, v):
    return params.sigma0 + params.sigma1 * np.asarray(v, dtype=float)


def coefficient_functions(params: ModelParams, S, v):
    """Return ``(m, omega, mu, sigma)`` evaluated at (S, v)."""
    sigma = sigma_of_v(params, v)
    omega = params.k_omega * gamma_of_S(params, S)
    mu = params.k_mu * sigma
    m = params.m0 * np.ones_like(np.asarray(v, dtype=float))
    return m[()] if np.ndim(m) == 0 else m, omega, mu, sigma


def default_closure_grid(params: ModelParams, n: int = 41) -> np.ndarray:
    if params.c > 0:
        return params.gamma0 + np.linspace(-0.9, 0.9, n) * params.half_width
    if params.c < 0:
        return params.gamma0 + np.linspace(-3.0, 3.0, n) * params.m0 * params.gamma1
    lo = max(params.s_domain[0], 0.0) + 1.0 / params.gamma1
    return np.linspace(lo, lo + 200.0, n)


def validate_closure(params: ModelParams, tol: float = 1e-4, gamma=None, S_grid=None) -> ConditionReport:
    """Check the Lie-algebra closure conditions on a sample grid.

    ``gamma`` optionally overrides Gamma(S) (a callable of S) to test arbitrary
    local-vol shapes against the ``m0^2 Gamma Gamma'' + c = 0`` condition.
    Failures are reported in the returned :class:`ConditionReport`, never raised.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    gfun = gamma if gamma is not None else (lambda s: gamma_of_S(params, s))
    S = np.asarray(S_grid if S_grid is not None else default_closure_grid(params), dtype=float)
    h = np.maximum(1e-5, 1e-5 * np.abs(S))
    g0 = np.asarray(gfun(S), dtype=float)
    g2 = (np.asarray(gfun(S + h)) - 2.0 * g0 + np.asarray(gfun(S - h))) / h**2
    report = ConditionReport()

    ode = float(np.max(np.abs(params.m0**2 * g0 * g2 + params.c)))
    report.residuals["gamma_ode"] = ode
    if not ode < tol:
        report.violations.append(("gamma_ode", ode))

    # Structural relations, checked on what coefficient_functions returns.
    v = np.linspace(0.05, 1.0, 7)
    Sg, Vg = np.meshgrid(S, v)
    m, omega, mu, sigma = coefficient_functions(params, Sg, Vg)
    gam = np.asarray(gamma_of_S(params, Sg), dtype=float)
    nz = np.abs(sigma) > 1e-12
    structural = {
        "m_constant": float(np.ptp(m)),
        "omega_proportional": float(np.max(np.abs(omega - params.k_omega * gam))),
        "mu_proportional": float(np.max(np.abs(mu[nz] / sigma[nz] - params.k_mu))) if np.any(nz) else 0.0,
        "sigma_affine": float(np.max(np.abs(np.diff(sigma, n=2, axis=0)))),
    }
    for name, res in structural.items():
        report.residuals[name] = res
        if not res < tol:
            report.violations.append((name, res))
    return report
