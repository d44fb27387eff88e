"""Zero-rate Black-Scholes calls and their inversion to implied volatility."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import AboveBoundError, BelowIntrinsicError, NoSolutionError, ParameterError, WNSLVError

VOL_BRACKET = (1e-6, 5.0)
MAX_VOL = 1e3
PRICE_TOL = 1e-10


def _bs_put(s, k, sd):
    d1 = math.log(s / k) / sd + 0.5 * sd
    return k * ndtr(sd - d1) - s * ndtr(-d1)


def bs_call(s, k, t, vol):
    if min(s, k, t, vol) <= 0:
        raise ParameterError("bs_call needs positive s, k, t and vol")
    sd = vol * math.sqrt(t)
    if s > k:
        # in the money: intrinsic plus the (small, accurately computed) put
        return (s - k) + _bs_put(s, k, sd)
    d1 = math.log(s / k) / sd + 0.5 * sd
    return s * ndtr(d1) - k * ndtr(d1 - sd)


def implied_vol(price, s, k, t) -> float:
    """Volatility reproducing ``price`` under :func:`bs_call` (Brent's method)."""
    if min(s, k, t) <= 0:
        raise ParameterError("implied_vol needs positive s, k and t")
    intrinsic = max(s - k, 0.0)
    if not price > intrinsic:
        raise BelowIntrinsicError(f"price {price!r} <= intrinsic value {intrinsic!r}")
    if not price < s:
        raise AboveBoundError(f"price {price!r} >= spot {s!r}")
    lo, hi = VOL_BRACKET
    if s > k:
        time_value = price - (s - k)
        f = lambda vol: _bs_put(s, k, vol * math.sqrt(t)) - time_value
    else:
        f = lambda vol: bs_call(s, k, t, vol) - price
    while f(hi) < 0:
        hi *= 2.0
        if hi > MAX_VOL:
            raise NoSolutionError(f"no volatility below {MAX_VOL:g} reaches price {price!r}")
    if f(lo) > 0:
        raise NoSolutionError(f"price {price!r} below the value at vol={lo:g}")
    vol = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(vol)) > PRICE_TOL * max(1.0, s):
        raise NoSolutionError(f"root-finder stalled at vol={vol!r}")
    return vol


_STATUS = {"below_intrinsic": "out-of-bounds", "above_bound": "out-of-bounds"}


@dataclass
class VolSurfaceGrid:
    s_values: np.ndarray
    k_values: np.ndarray
    vols: np.ndarray
    status: np.ndarray
    prices: np.ndarray | None = None

    @property
    def ok_fraction(self) -> float:
        return float(np.mean(self.status == "ok")) if self.status.size else 1.0

    def rows(self):
        for i, s in enumerate(self.s_values):
            for j, k in enumerate(self.k_values):
                price = float(self.prices[i, j]) if self.prices is not None else float("nan")
                yield float(s), float(k), price, float(self.vols[i, j]), self.status[i, j]


def surface(pg, t: float) -> VolSurfaceGrid:
    """Invert every cell of a price grid; failures become cell statuses."""
    if not t > 0:
        raise ParameterError("t must be positive")
    s_values = np.asarray(pg.s_values, dtype=float)
    k_values = np.asarray(pg.k_values, dtype=float)
    vols = np.full((s_values.size, k_values.size), np.nan)
    status = np.full(vols.shape, "ok", dtype=object)
    cell_status = getattr(pg, "status", None)
    for i, s in enumerate(s_values):
        for j, k in enumerate(k_values):
            if cell_status is not None and cell_status[i, j] != "ok":
                status[i, j] = "no-solution"
                continue
            try:
                vols[i, j] = implied_vol(float(pg.prices[i, j]), s, k, t)
            except WNSLVError as exc:
                status[i, j] = _STATUS.get(exc.code, "no-solution")
    return VolSurfaceGrid(s_values, k_values, vols, status, np.asarray(pg.prices, dtype=float))


def single_interior_minimum(row, tol_cells: int = 1) -> bool:
    """True when the row falls then rises: one sign change of the discrete gradient.

    Sign flips confined to ``tol_cells`` cells around the vertex are tolerated,
    and the minimum must lie strictly inside the row.
    """
    row = np.asarray(row, dtype=float)
    if row.size < 3 or not np.all(np.isfinite(row)):
        return False
    imin = int(np.argmin(row))
    if imin == 0 or imin == row.size - 1:
        return False
    grad = np.diff(row)
    # grad[imin-1] <= 0 <= grad[imin] always; tolerance reaches one step further out
    left = grad[:max(imin - 1 - tol_cells, 0)]
    right = grad[imin + 1 + tol_cells:]
    return bool(np.all(left <= 0) and np.all(right >= 0))
