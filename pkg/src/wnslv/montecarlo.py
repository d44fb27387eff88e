"""Euler-Maruyama path simulation for the SLV model and for SABR.

Random numbers come from a counter-based generator (Philox): step ``n`` of a
run with seed ``s`` always draws from the stream keyed by ``s`` at counter
``n``, and path ``i`` takes the ``i``-th pair of that block. Results therefore
do not depend on how the work is scheduled.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyEnsembleError, ParameterError
from .factors import CoefficientSchedule
from .model import ModelParams, SabrParams, gamma_clipped

SCHEMES = ("euler", "exact-vol-euler-asset")


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    n_steps: int
    t0: float = 0.0
    t_expiry: float = 1.0
    seed: int = 0
    scheme: str = "euler"
    s0: float = 100.0
    v0: float = 0.2
    keep_paths: bool = True
    schedule: CoefficientSchedule | None = None

    def __post_init__(self):
        if int(self.n_paths) < 1 or int(self.n_steps) < 1:
            raise ParameterError("n_paths and n_steps must be >= 1")
        if not self.t_expiry > self.t0:
            raise ParameterError("t_expiry must exceed t0")
        if self.scheme not in SCHEMES:
            raise ParameterError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must fit in 64 bits")

    @property
    def dt(self) -> float:
        return (self.t_expiry - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t_expiry, self.n_steps + 1)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("n_paths", "n_steps", "t0", "t_expiry", "seed", "scheme",
                                             "s0", "v0", "keep_paths")}
        out["schedule"] = self.schedule.to_dict() if self.schedule is not None else None
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "McConfig":
        data = dict(data)
        sched = data.pop("schedule", None)
        if sched is not None:
            data["schedule"] = CoefficientSchedule.from_dict(sched)
        return cls(**data)


@dataclass
class PathEnsemble:
    """Simulated paths. With ``keep_paths=False`` only the initial and terminal columns are stored."""

    times: np.ndarray
    s_paths: np.ndarray
    v_paths: np.ndarray
    elapsed_cpu: float
    seed: int
    flagged: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_flagged(self) -> int:
        return int(self.flagged.sum())

    @property
    def s_terminal(self) -> np.ndarray:
        return self.s_paths[:, -1]

    @property
    def v_terminal(self) -> np.ndarray:
        return self.v_paths[:, -1]


@dataclass
class EnsembleStats:
    mean_s: np.ndarray
    mean_v: np.ndarray
    std_s: np.ndarray
    std_v: np.ndarray
    se_s: np.ndarray
    se_v: np.ndarray
    n_used: int


def correlate(z1, z2, rho: float):
    if abs(rho) > 1:
        raise ParameterError(f"|rho| must be <= 1, got {rho}")
    z1 = np.asarray(z1)
    return z1, rho * z1 + math.sqrt(1.0 - rho * rho) * np.asarray(z2)


def step_normals(seed: int, step: int, n_paths: int):
    """Independent standard normal pairs for one time step."""
    gen = np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, int(step), 0]))
    z = gen.standard_normal(2 * n_paths)
    return z[:n_paths], z[n_paths:]


class _Recorder:
    def __init__(self, cfg: McConfig, s0: float, v0: float):
        cols = cfg.n_steps + 1 if cfg.keep_paths else 2
        self.keep = cfg.keep_paths
        self.s = np.empty((cfg.n_paths, cols))
        self.v = np.empty((cfg.n_paths, cols))
        self.s[:, 0] = s0
        self.v[:, 0] = v0
        self.times = cfg.times if cfg.keep_paths else np.array([cfg.t0, cfg.t_expiry])

    def store(self, n: int, s, v, last: bool):
        if self.keep:
            self.s[:, n] = s
            self.v[:, n] = v
        elif last:
            self.s[:, 1] = s
            self.v[:, 1] = v


def _flag(flagged, s, v):
    bad = ~(np.isfinite(s) & np.isfinite(v))
    if bad.any():
        flagged |= bad
        s[bad] = np.nan
        v[bad] = np.nan


def simulate_slv(params: ModelParams, cfg: McConfig) -> PathEnsemble:
    """Euler-Maruyama for the SLV dynamics; ``params.rho`` is the Wiener correlation.

    For ``c > 0`` steps leaving the admissible S-interval are clamped to its
    edge, where the local factor vanishes.
    """
    n, dt = int(cfg.n_paths), cfg.dt
    sq = math.sqrt(dt)
    rec = _Recorder(cfg, cfg.s0, cfg.v0)
    s = np.full(n, float(cfg.s0))
    v = np.full(n, float(cfg.v0))
    flagged = np.zeros(n, dtype=bool)
    lo, hi = params.s_domain
    clamp = params.c > 0
    neg_v = 0
    clamped = 0
    sched = cfg.schedule
    affine = params.c == 0
    g0, g1 = params.gamma0, params.gamma1
    drift_s, vol_s = params.k_omega * dt, params.m0 * sq
    drift_v, vol_v = params.k_mu * dt, sq
    gam = np.empty(n)
    sig = np.empty(n)
    t_start = time.perf_counter()
    for k in range(cfg.n_steps):
        rho = params.rho
        if sched is not None:
            a1, a2, a3, a4, a5 = sched.alpha_at(cfg.t0 + k * dt)
            rho = max(-1.0, min(1.0, a2 * params.rho / math.sqrt(a1 * a3)))
            drift_s, vol_s = a4 * params.k_omega * dt, math.sqrt(a1) * params.m0 * sq
            drift_v, vol_v = a5 * params.k_mu * dt, math.sqrt(a3) * sq
        z1, z2 = step_normals(cfg.seed, k, n)
        w1, w2 = correlate(z1, z2, rho)
        if affine:
            np.multiply(s, g1, out=gam)
            gam += g0
        else:
            gam = gamma_clipped(params, s)
        np.multiply(v, params.sigma1, out=sig)
        sig += params.sigma0
        s += gam * (drift_s + vol_s * w1)
        v += sig * (drift_v + vol_v * w2)
        if clamp:
            out = (s <= lo) | (s >= hi)
            clamped += int(out.sum())
            np.clip(s, lo, hi, out=s)
        neg_v += int(np.count_nonzero(v < 0))
        _flag(flagged, s, v)
        rec.store(k + 1, s, v, k == cfg.n_steps - 1)
    elapsed = time.perf_counter() - t_start
    diag = {"negative_v_fraction": neg_v / (n * cfg.n_steps), "boundary_clamps": clamped}
    return PathEnsemble(rec.times, rec.s, rec.v, elapsed, int(cfg.seed), flagged, diag)


def simulate_sabr(sp: SabrParams, cfg: McConfig) -> PathEnsemble:
    """SABR paths: exact lognormal vol steps under ``exact-vol-euler-asset``, Euler otherwise."""
    n, dt = int(cfg.n_paths), cfg.dt
    sq = math.sqrt(dt)
    rec = _Recorder(cfg, sp.s0, sp.v0)
    s = np.full(n, float(sp.s0))
    v = np.full(n, float(sp.v0))
    flagged = np.zeros(n, dtype=bool)
    exact = cfg.scheme == "exact-vol-euler-asset"
    t_start = time.perf_counter()
    for k in range(cfg.n_steps):
        z1, z2 = step_normals(cfg.seed, k, n)
        w1, w2 = correlate(z1, z2, sp.rho)
        with np.errstate(invalid="ignore"):
            s_next = s + v * np.power(s, sp.beta) * sq * w1
        if exact:
            v = v * np.exp(sp.alpha * sq * w2 - 0.5 * sp.alpha**2 * dt)
        else:
            v = v + sp.alpha * v * sq * w2
        s = s_next
        _flag(flagged, s, v)
        rec.store(k + 1, s, v, k == cfg.n_steps - 1)
    elapsed = time.perf_counter() - t_start
    return PathEnsemble(rec.times, rec.s, rec.v, elapsed, int(cfg.seed), flagged, {})


def ensemble_stats(pe: PathEnsemble) -> EnsembleStats:
    good = ~pe.flagged
    m = int(good.sum())
    if m < 2:
        raise EmptyEnsembleError(f"only {m} unflagged paths; need at least 2")
    s, v = pe.s_paths[good], pe.v_paths[good]
    std_s, std_v = s.std(axis=0, ddof=1), v.std(axis=0, ddof=1)
    root = math.sqrt(m)
    return EnsembleStats(s.mean(axis=0), v.mean(axis=0), std_s, std_v, std_s / root, std_v / root, m)


def mc_call_price(pe: PathEnsemble, k_strike: float) -> tuple[float, float]:
    """Undiscounted call price estimate and its standard error from terminal spots."""
    st = pe.s_terminal[~pe.flagged]
    pay = np.maximum(st - k_strike, 0.0)
    return float(pay.mean()), float(pay.std(ddof=1) / math.sqrt(pay.size))


def benchmark_pair(params: ModelParams, sp: SabrParams, cfg: McConfig, repeats: int = 5) -> list[dict]:
    """Median stepping-loop time for both models at the same workload and seed."""
    if repeats < 3:
        raise ParameterError("repeats must be >= 3")
    runs = {"wn": [], "sabr": []}
    last = {}
    for r in range(repeats):
        order = ("wn", "sabr") if r % 2 == 0 else ("sabr", "wn")
        for model in order:
            pe = simulate_slv(params, cfg) if model == "wn" else simulate_sabr(sp, cfg)
            runs[model].append(pe.elapsed_cpu)
            last[model] = pe
    report = []
    for model in ("wn", "sabr"):
        pe = last[model]
        good = ~pe.flagged
        report.append({"model": model,
                       "median_seconds": float(np.median(runs[model])),
                       "mean_S_T": float(pe.s_terminal[good].mean()),
                       "mean_v_T": float(pe.v_terminal[good].mean()),
                       "flagged_paths": pe.n_flagged,
                       "repeats": repeats})
    return report
