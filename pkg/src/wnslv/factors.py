"""Wei-Norman factor functions g1..g5 for piecewise-constant coefficient schedules.

The time-ordered propagator of ``sum_i alpha_i(t) K_i`` factorizes as

    P(t, t0) = exp(g1 K4) exp(g2 K5) exp(g3 K2) exp(g4 K1) exp(g5 K3)

with

    g1' = alpha4 - (c/2) alpha1 g1      g2' = alpha5
    g3' = alpha2 - (c/2) alpha1 g3      g4' = alpha1      g5' = alpha3

and g(t0) = 0. On a piece of constant coefficients every equation has an exact
solution, so the factors below carry no quadrature error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, OrderingError, ParameterError, SpecError
from .model import ModelParams
from .special import expm1_ratio


@dataclass(frozen=True)
class CoefficientSchedule:
    """Piecewise-constant alpha_1..alpha_5 on right-open intervals."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(tuple(float(a) for a in row) for row in self.values)
        if len(bp) < 2:
            raise ParameterError("schedule needs at least one interval")
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise ParameterError("breakpoints must be strictly ascending")
        if len(vals) != len(bp) - 1:
            raise ParameterError(f"{len(bp) - 1} intervals but {len(vals)} coefficient rows")
        if any(len(row) != 5 for row in vals):
            raise ParameterError("each interval needs exactly 5 coefficients")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, alphas, t0: float = 0.0, t1: float = 1.0) -> "CoefficientSchedule":
        return cls((t0, t1), (tuple(alphas),))

    @classmethod
    def from_dict(cls, data: dict) -> "CoefficientSchedule":
        for key in ("breakpoints", "alphas"):
            if key not in data:
                raise SpecError(f"schedule is missing key: {key}", code="schema_violation", missing=[key])
        return cls(tuple(data["breakpoints"]), tuple(tuple(r) for r in data["alphas"]))

    @classmethod
    def from_json(cls, text: str) -> "CoefficientSchedule":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {"breakpoints": list(self.breakpoints), "alphas": [list(r) for r in self.values]}

    def alpha_at(self, t: float) -> np.ndarray:
        """Coefficients in force at time t (right-open intervals; the last is closed)."""
        bp = self.breakpoints
        if t < bp[0] or t > bp[-1]:
            raise CoverageError(f"t={t} outside schedule [{bp[0]}, {bp[-1]}]")
        idx = min(int(np.searchsorted(bp, t, side="right")) - 1, len(self.values) - 1)
        return np.array(self.values[idx])

    def pieces(self, t0: float, t: float):
        """Yield ``(length, alphas)`` for the pieces of [t0, t] in time order."""
        bp = self.breakpoints
        if t0 < bp[0] or t > bp[-1]:
            raise CoverageError(f"[{t0}, {t}] not covered by schedule [{bp[0]}, {bp[-1]}]")
        for i, row in enumerate(self.values):
            a, b = max(bp[i], t0), min(bp[i + 1], t)
            if b > a:
                yield b - a, row


@dataclass(frozen=True)
class FactorSet:
    t0: float
    t: float
    g: tuple
    g4_tilde: float
    c: float

    @property
    def g1(self):
        return self.g[0]

    @property
    def g2(self):
        return self.g[1]

    @property
    def g3(self):
        return self.g[2]

    @property
    def g4(self):
        return self.g[3]

    @property
    def g5(self):
        return self.g[4]

    @property
    def alpha_bar(self) -> np.ndarray:
        return averaged_coefficients(self)


@dataclass(frozen=True)
class Discriminant:
    value: float
    case: str  # "c-zero" | "c-nonzero"

    @property
    def positive(self) -> bool:
        return self.value > 0


def g4_tilde(g4: float, c: float) -> float:
    """``(exp(c g4) - 1) / c`` with the c -> 0 limit g4."""
    return float(g4 * expm1_ratio(c * g4))


def compute_factors(schedule: CoefficientSchedule, t0: float, t: float, c: float) -> FactorSet:
    if t < t0:
        raise OrderingError(f"t={t} precedes t0={t0}")
    g1 = g2 = g3 = g4 = g5 = 0.0
    for h, (a1, a2, a3, a4, a5) in schedule.pieces(t0, t):
        # damped pieces: y(h) = y(0) e^{-k h} + a h phi(-k h), k = c a1 / 2
        z = -0.5 * c * a1 * h
        decay = math.exp(z)
        ramp = h * float(expm1_ratio(z))
        g1 = g1 * decay + a4 * ramp
        g3 = g3 * decay + a2 * ramp
        g2 += a5 * h
        g4 += a1 * h
        g5 += a3 * h
    return FactorSet(t0=float(t0), t=float(t), g=(g1, g2, g3, g4, g5),
                     g4_tilde=g4_tilde(g4, c), c=float(c))


def constant_factors(alphas, dt: float, c: float) -> tuple:
    """Closed-form factors for constant coefficients over an interval of length dt."""
    a1, a2, a3, a4, a5 = (float(a) for a in alphas)
    if c == 0:
        damp = dt
    else:
        k = 0.5 * a1 * c
        damp = -math.expm1(-k * dt) / k
    return (a4 * damp, a5 * dt, a2 * damp, a1 * dt, a3 * dt)


def averaged_coefficients(fs: FactorSet) -> np.ndarray:
    """Time-averaged coefficients, returned in alpha order (a1..a5).

    Each a_i is the factor it drives divided by t - t0: a1 from g4, a2 from
    g3, a3 from g5, a4 from g1, a5 from g2. Replaying these as a constant
    schedule reproduces g2, g4, g5 always and g1, g3 only when c = 0.
    """
    dt = fs.t - fs.t0
    if dt == 0:
        raise ZeroDivisionError("averaged coefficients undefined on a zero-length interval")
    g1, g2, g3, g4, g5 = fs.g
    return np.array([g4, g3, g5, g1, g2]) / dt


def discriminant(fs: FactorSet, params: ModelParams) -> Discriminant:
    """Signed discriminant of the composed kernel's quadratic form.

    Returned even when non-positive; kernel and price functions reject it.
    """
    if fs.c == 0:
        val = params.m0**2 * fs.g4 * fs.g5 - params.rho**2 * fs.g3**2
        return Discriminant(val, "c-zero")
    val = params.m0**2 * fs.g5 * fs.g4_tilde - params.rho**2 * math.exp(fs.c * fs.g4) * fs.g3**2
    return Discriminant(val, "c-nonzero")


def rho_bound_unit(m0: float, c: float, dt: float) -> float:
    """Largest admissible |rho| for unit coefficients over dt."""
    if c == 0:
        return m0
    x = c * dt
    return m0 * math.sqrt(x * math.expm1(x)) / abs(2.0 * math.expm1(x / 2.0))
