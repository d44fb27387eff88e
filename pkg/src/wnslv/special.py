"""Inverse error functions and cancellation-safe exponential ratios."""

from __future__ import annotations

import math

import numpy as np
from scipy import special as sp

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
_SERIES_CUTOFF = 1e-8
_HALLEY_STEPS = 5


def _erfinv_guess(z):
    # Giles' single-precision polynomial approximation.
    w = -np.log((1.0 - z) * (1.0 + z))
    central = w < 5.0
    wc = np.where(central, w - 2.5, 0.0)
    pc = 2.81022636e-08
    for coef in (3.43273939e-07, -3.5233877e-06, -4.39150654e-06, 0.00021858087,
                 -0.00125372503, -0.00417768164, 0.246640727, 1.50140941):
        pc = coef + pc * wc
    wt = np.where(central, 0.0, np.sqrt(np.maximum(w, 0.0)) - 3.0)
    pt = -0.000200214257
    for coef in (0.000100950558, 0.00134934322, -0.00367342844, 0.00573950773,
                 -0.0076224613, 0.00943887047, 1.00167406, 2.83297682):
        pt = coef + pt * wt
    return np.where(central, pc, pt) * z


def erfinv(z):
    """Inverse of the error function on (-1, 1).

    Starts from a polynomial guess and applies Halley steps on ``erf``
    (on ``erfc`` in the tails, where ``1 - |z|`` is exact). Returns ``±inf`` at
    ``z = ±1`` and ``nan`` outside ``[-1, 1]``.
    """
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    inside = a < 1.0
    za = np.where(inside, a, 0.0)
    x = _erfinv_guess(za)
    tail = za > 0.5
    for _ in range(_HALLEY_STEPS):
        f = np.where(tail, -(sp.erfc(x) - (1.0 - za)), sp.erf(x) - za)
        fp = _TWO_OVER_SQRT_PI * np.exp(-x * x)
        u = f / fp
        x = x - u / (1.0 + x * u)
    out = np.where(inside, np.copysign(x, z), np.where(a == 1.0, np.copysign(np.inf, z), np.nan))
    return out[()] if out.ndim == 0 else out


def _erfiinv_scalar(y: float) -> float:
    if y == 0.0:
        return 0.0
    target = abs(y)
    hi = 1.0
    while sp.erfi(hi) < target:
        hi *= 2.0
        if hi > 64.0:
            return math.copysign(math.inf, y)
    x = math.sqrt(math.pi) * target / 2.0 if target < 1e-3 else hi
    # erfi is convex on x > 0, so Newton from above the root decreases monotonically.
    if target >= 1e-3:
        from scipy.optimize import brentq

        x = brentq(lambda s: sp.erfi(s) - target, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    for _ in range(2):
        fp = _TWO_OVER_SQRT_PI * math.exp(x * x)
        x -= (sp.erfi(x) - target) / fp
    return math.copysign(x, y)


def erfiinv(y):
    """Inverse of the imaginary error function ``erfi``, a bijection of the reals."""
    y = np.asarray(y, dtype=float)
    out = np.vectorize(_erfiinv_scalar, otypes=[float])(y)
    return out[()] if out.ndim == 0 else out


def expm1_ratio(x):
    """``(exp(x) - 1) / x`` with a series branch near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 + x / 2.0 + x * x / 6.0, np.expm1(safe) / safe)
    return out[()] if out.ndim == 0 else out
