"""Exit criteria. Each test prints one PASS/FAIL line and records it for the run summary."""

import dataclasses
import filecmp
import itertools
import json
import math
import time

import numpy as np
import pytest
from scipy.integrate import dblquad, solve_ivp

from wnslv import kernels
from wnslv.errors import FormulaVerificationError
from wnslv.factors import CoefficientSchedule, compute_factors
from wnslv.implied import bs_call, implied_vol, single_interior_minimum, surface
from wnslv.io import ExperimentSpec, run_experiment
from wnslv.kernels import (TransformedPoint, apply_generator, chain_kernel, composed_kernel_c,
                           composed_kernel_c0, heat_kernel, kernel_for, kernel_k1, kernel_pde_residual,
                           transition_kernel, verify_kernel_c)
from wnslv.model import ModelParams
from wnslv.montecarlo import McConfig, benchmark_pair, ensemble_stats, mc_call_price, simulate_slv
from wnslv.presets import BENCH_CONFIG, REFERENCE_SABR, SPOT_GRID, STRIKE_GRID
from wnslv.pricing import PricingRequest, price_by_quadrature, price_c0, price_grid

pytestmark = pytest.mark.acceptance


def _report(criterion, num, ok, detail):
    criterion(num, ok, detail)
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _rel(a, b):
    return abs(a - b) / abs(b)


# 1 ----------------------------------------------------------------------------

def _closed_form(alphas, dt, c):
    a1, a2, a3, a4, a5 = alphas
    if c == 0:
        ramp = dt
    else:
        lam = 0.5 * c * a1
        ramp = (1.0 - math.exp(-lam * dt)) / lam
    return np.array([a4 * ramp, a5 * dt, a2 * ramp, a1 * dt, a3 * dt])


def _ode_factors(sched, t0, t1, c):
    def rhs(t, g):
        a1, a2, a3, a4, a5 = sched.alpha_at(min(t, sched.breakpoints[-1]))
        return [a4 - 0.5 * c * a1 * g[0], a5, a2 - 0.5 * c * a1 * g[2], a1, a3]
    # integrate piece by piece so the breakpoint is a step boundary
    g = np.zeros(5)
    edges = [t0] + [b for b in sched.breakpoints if t0 < b < t1] + [t1]
    for lo, hi in zip(edges, edges[1:]):
        sol = solve_ivp(rhs, (lo, hi), g, method="DOP853", rtol=1e-13, atol=1e-15,
                        first_step=(hi - lo) / 50)
        g = sol.y[:, -1]
    return g


def test_criterion_1_factor_exactness(criterion):
    grid = list(itertools.product((0.5, 1.0, 2.0), repeat=5))
    cases = [(c, a, dt) for c in (0.0, 1.0, -1.0) for a in grid for dt in (0.1, 1.0, 5.0)]
    start = time.perf_counter()
    computed = [compute_factors(CoefficientSchedule.constant(a, 0.0, dt), 0.0, dt, c).g for c, a, dt in cases]
    elapsed = time.perf_counter() - start
    worst = max(float(np.max(np.abs(np.array(g) - _closed_form(a, dt, c)) / np.abs(_closed_form(a, dt, c))))
                for g, (c, a, dt) in zip(computed, cases))

    rng = np.random.default_rng(11)
    worst_ode = 0.0
    for c in (0.0, 1.0, -1.0):
        for _ in range(6):
            rows = tuple(tuple(rng.uniform(0.3, 2.0, 5)) for _ in range(2))
            bp = (0.0, float(rng.uniform(0.2, 0.8)), 1.5)
            sched = CoefficientSchedule(bp, rows)
            t1 = float(rng.uniform(bp[1] + 0.1, 1.5))
            g = np.array(compute_factors(sched, 0.0, t1, c).g)
            ref = _ode_factors(sched, 0.0, t1, c)
            worst_ode = max(worst_ode, float(np.max(np.abs(g - ref) / np.abs(ref))))
    ok = worst <= 1e-12 and worst_ode <= 1e-9 and elapsed < 1.0
    _report(criterion, 1, ok, f"closed-form rel err {worst:.2e} (<=1e-12), two-piece vs ODE {worst_ode:.2e} "
                              f"(<=1e-9), {len(cases)} cases in {elapsed:.3f}s (<1s)")


# 2 ----------------------------------------------------------------------------

def _mass(kern, frm):
    (xlo, xhi), (ylo, yhi) = kern.support(frm.xs, frm.xv, 10.0)
    val, _ = dblquad(lambda xp, yp: kern(frm.xs, frm.xv, xp, yp), ylo, yhi, xlo, xhi,
                     epsabs=1e-10, epsrel=1e-10)
    return val


def test_criterion_2_kernel_normalization(criterion, ref_params):
    start = time.perf_counter()
    worst0 = 0.0
    frm = TransformedPoint(math.log(20.0), math.log(0.04))
    for rho in (0.0, 0.5):
        for dt in (0.25, 1.0):
            p = ref_params.replace(rho=rho)
            fs = compute_factors(CoefficientSchedule.constant((1.0,) * 5, 0.0, dt), 0.0, dt, 0.0)
            worst0 = max(worst0, abs(_mass(transition_kernel(fs, p), frm) - 1.0))
    pc = ref_params.replace(c=1.0, rho=0.3, gamma1=1.0, k_omega=0.2, k_mu=0.1)
    fs = compute_factors(CoefficientSchedule.constant((1.0,) * 5, 0.0, 0.5), 0.0, 0.5, 1.0)
    errc = abs(_mass(kernel_for(fs, pc), TransformedPoint(0.3, math.log(0.04))) - 1.0)
    elapsed = time.perf_counter() - start
    ok = worst0 <= 1e-6 and errc <= 1e-5 and elapsed < 30
    _report(criterion, 2, ok, f"|mass-1| c=0 max {worst0:.2e} (<=1e-6), c=1 {errc:.2e} (<=1e-5), {elapsed:.1f}s")


# 3 ----------------------------------------------------------------------------

def test_criterion_3_composition_equivalence(criterion, ref_params):
    p = ref_params.replace(rho=0.3, k_omega=0.3, k_mu=0.2)
    fs = compute_factors(CoefficientSchedule.constant((1.0,) * 5, 0.0, 1.0), 0.0, 1.0, 0.0)
    frm = TransformedPoint(math.log(20.0), math.log(0.04))
    kern = transition_kernel(fs, p)
    mx, my = kern.mean(frm.xs, frm.xv)
    sx, sy = math.sqrt(kern.cov[0][0]), math.sqrt(kern.cov[1][1])
    worst = 0.0
    for a, b in ((0.0, 0.0), (1.0, -0.7), (-1.3, 0.4), (0.6, 1.5)):
        to = TransformedPoint(mx + a * sx, my + b * sy)
        worst = max(worst, _rel(chain_kernel(fs, p, frm, to), composed_kernel_c0(fs, p, frm, to)))
    _report(criterion, 3, worst <= 1e-4, f"factor-chain vs closed-form kernel, 4 probes: max rel {worst:.2e} (<=1e-4)")


# 4 ----------------------------------------------------------------------------

def _residual_1d(k, op, t, x, rel=1e-3, width=1.0):
    ht = rel * t
    h = rel * width
    kt = (k(t + ht, x) - k(t - ht, x)) / (2 * ht)
    kx = (k(t, x + h) - k(t, x - h)) / (2 * h)
    kxx = (k(t, x + h) - 2 * k(t, x) + k(t, x - h)) / h**2
    lk, scale = op(x, kx, kxx)
    return abs(kt - lk) / max(abs(kt), scale)


def test_criterion_4_pde_residual(criterion, ref_params, monkeypatch):
    rng = np.random.default_rng(4)
    res = {}
    # heat kernel
    pts = [(float(rng.uniform(0.2, 1.0)), float(rng.normal(0, 0.5)), 0.1) for _ in range(10)]
    res["k_H"] = max(_residual_1d(lambda t, x, xp=xp: heat_kernel(t, x, xp), lambda x, kx, kxx: (kxx, abs(kxx)),
                                  t, x, width=math.sqrt(t)) for t, x, xp in pts)
    # k1, both branches
    p = ref_params.replace(gamma1=1.0)
    A = 0.5 * (p.m0 * p.gamma1) ** 2
    for c in (0.0, 1.0, -1.0):
        def op(x, kx, kxx, c=c):
            terms = (A * kxx, -A * kx) if c == 0 else (A * kxx, 0.5 * c * x * kx)
            return sum(terms), sum(abs(v) for v in terms)
        worst = 0.0
        for _ in range(10):
            t = float(rng.uniform(0.2, 1.0))
            xp = float(rng.normal(0, 0.3))
            x = xp + float(rng.normal(0, 0.8)) * math.sqrt(t)
            worst = max(worst, _residual_1d(lambda tt, xx: kernel_k1(p, c, tt, xx, xp), op, t, x,
                                            width=math.sqrt(t)))
        res[f"k1(c={c:g})"] = worst
    # composed kernels against the full generator, constant coefficients
    for c in (0.0, 1.0, -1.0):
        pc = ref_params.replace(c=c, rho=0.3, k_omega=0.25, k_mu=-0.15, gamma1=0.5 if c else 0.2)
        worst = 0.0
        for _ in range(10):
            alphas = tuple(rng.uniform(0.5, 1.5, 5))
            t = float(rng.uniform(0.2, 1.0))
            fs = compute_factors(CoefficientSchedule.constant(alphas, 0.0, 3.0), 0.0, t, c)
            kern = transition_kernel(fs, pc)
            frm = TransformedPoint(float(rng.normal(0.5, 0.5)), float(rng.normal(-1.6, 0.3)))
            mx, my = kern.mean(frm.xs, frm.xv)
            to = TransformedPoint(mx + float(rng.normal()) * math.sqrt(kern.cov[0][0]),
                                  my + float(rng.normal()) * math.sqrt(kern.cov[1][1]))
            worst = max(worst, kernel_pde_residual(pc, c, alphas, t, frm, to))
        res["k(0)" if c == 0 else f"k(c={c:g})"] = worst

    # the c != 0 gate blocks pricing output when the formula is wrong
    broken = lambda fs, params: dataclasses.replace(transition_kernel(fs, params), scale=1.0)
    monkeypatch.setattr(kernels, "transition_kernel", broken)
    verify_kernel_c.cache_clear()
    pc = ref_params.replace(c=1.0, gamma1=1.0)
    fs = compute_factors(CoefficientSchedule.constant((1.0,) * 5), 0.0, 0.5, 1.0)
    try:
        composed_kernel_c(fs, pc, TransformedPoint(0, -1.6), TransformedPoint(0.1, -1.6))
        gate_blocks = False
    except FormulaVerificationError:
        gate_blocks = True
    monkeypatch.undo()
    verify_kernel_c.cache_clear()
    gate_passes = verify_kernel_c(pc) <= 1e-4

    worst = max(res.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in res.items())
    ok = worst <= 1e-4 and gate_blocks and gate_passes
    _report(criterion, 4, ok, f"max residual {worst:.1e} (<=1e-4) [{detail}]; gate blocks broken formula: "
                              f"{gate_blocks}, passes correct: {gate_passes}")


# 5 ----------------------------------------------------------------------------

def test_criterion_5_c_to_zero(criterion, ref_params):
    p = ref_params.replace(rho=0.3, k_omega=0.2, k_mu=0.1)
    sched = CoefficientSchedule.constant((1.0, 0.8, 1.2, 0.9, 1.1), 0.0, 2.0)
    fs_c = compute_factors(sched, 0.0, 1.0, 1e-6)
    fs_0 = compute_factors(sched, 0.0, 1.0, 0.0)
    k_c = kernel_for(fs_c, p.replace(c=1e-6))
    k_0 = transition_kernel(fs_0, p)
    drift = 0.5 * (p.m0 * p.gamma1) ** 2 * fs_0.g4
    core = dataclasses.replace(k_0, shift_s=k_0.shift_s + drift)
    rng = np.random.default_rng(5)
    worst, factors = 0.0, []
    for _ in range(10):
        frm = TransformedPoint(float(rng.normal(0, 0.5)), float(rng.normal(-1.6, 0.3)))
        mx, my = core.mean(frm.xs, frm.xv)
        xsp = mx + float(rng.normal()) * math.sqrt(core.cov[0][0])
        xvp = my + float(rng.normal()) * math.sqrt(core.cov[1][1])
        a = float(k_c(frm.xs, frm.xv, xsp, xvp))
        b = float(core(frm.xs, frm.xv, xsp, xvp))
        worst = max(worst, _rel(a, b))
        factors.append(float(k_0(frm.xs, frm.xv, xsp, xvp)) / b)
    _report(criterion, 5, worst <= 1e-5,
            f"k(c=1e-6) vs Gaussian core of k(0): max rel {worst:.2e} (<=1e-5); "
            f"k(0)/core drift factor in [{min(factors):.4f}, {max(factors):.4f}]")


# 6 ----------------------------------------------------------------------------

def test_criterion_6_formula_vs_oracle(criterion, ref_params):
    unit = CoefficientSchedule.constant((1.0,) * 5, 0.0, 1.0)
    fs = compute_factors(unit, 0.0, 1.0, 0.0)
    kern = transition_kernel(fs, ref_params)
    grid_err = 0.0
    for s in np.linspace(80, 120, 5):
        for k in np.linspace(80, 120, 5):
            req = PricingRequest(s, k, 0.2, 0.0, 1.0)
            grid_err = max(grid_err, _rel(price_c0(fs, ref_params, req), price_by_quadrature(kern, ref_params, req)))

    sweep_err = 0.0
    sched = CoefficientSchedule.constant((1.0, 0.5, 1.0, 1.0, 1.0), 0.0, 1.0)
    fs2 = compute_factors(sched, 0.0, 1.0, 0.0)
    for rho, m0, drift in itertools.product((-0.5, 0.0, 0.5), (0.5, 1.0), (False, True)):
        p = ref_params.replace(rho=rho, m0=m0, k_omega=0.3 if drift else 0.0, k_mu=-0.2 if drift else 0.0)
        kern2 = transition_kernel(fs2, p)
        for s, k in ((90.0, 100.0), (100.0, 100.0), (110.0, 95.0)):
            req = PricingRequest(s, k, 0.2, 0.0, 1.0)
            sweep_err = max(sweep_err, _rel(price_c0(fs2, p, req), price_by_quadrature(kern2, p, req)))

    eps = 1e-4
    fs_e = compute_factors(unit, 0.0, eps, 0.0)
    s_vals = np.linspace(50, 150, 101)
    cell = s_vals[1] - s_vals[0]
    lim_err = max(abs(price_c0(fs_e, ref_params, PricingRequest(s, 100.0, 0.2, 0.0, eps)) - max(s - 100.0, 0.0))
                  for s in s_vals if abs(s - 100.0) > cell)
    ok = grid_err <= 1e-6 and sweep_err <= 1e-5 and lim_err < 1.0
    _report(criterion, 6, ok, f"5x5 grid rel {grid_err:.2e} (<=1e-6), rho/m0/drift sweep {sweep_err:.2e} (<=1e-5), "
                              f"payoff limit at t0+1e-4 {lim_err:.2e} (<1.0)")


# 7 ----------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_7_mc_vs_analytics(criterion, ref_params):
    p = ref_params.replace(rho=0.0)
    cfg = McConfig(n_paths=100_000, n_steps=250, seed=2024, keep_paths=False)
    start = time.perf_counter()
    pe = simulate_slv(p, cfg)
    elapsed = time.perf_counter() - start
    fs = compute_factors(CoefficientSchedule.constant((1.0,) * 5, 0.0, 1.0), 0.0, 1.0, 0.0)
    mc, se = mc_call_price(pe, 100.0)
    analytic = price_c0(fs, p, PricingRequest(100.0, 100.0, 0.2, 0.0, 1.0))
    st = ensemble_stats(pe)
    z_price = abs(mc - analytic) / se
    z_s = abs(st.mean_s[-1] - 100.0) / st.se_s[-1]
    v_err = abs(st.mean_v[-1] - 0.20)
    ok = z_price <= 3 and z_s <= 3 and v_err <= 0.005 and elapsed < 60
    _report(criterion, 7, ok, f"call MC {mc:.4f} vs closed form {analytic:.4f} ({z_price:.2f} SE), "
                              f"mean S_T {st.mean_s[-1]:.3f} ({z_s:.2f} SE), mean v_T {st.mean_v[-1]:.5f}, "
                              f"{elapsed:.1f}s")


# 8 ----------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_8_timing_direction(criterion, ref_params):
    report = {r["model"]: r for r in benchmark_pair(ref_params, REFERENCE_SABR, BENCH_CONFIG, repeats=7)}
    wn, sabr = report["wn"]["median_seconds"], report["sabr"]["median_seconds"]
    _report(criterion, 8, wn <= sabr, f"median stepping time SLV {wn:.4f}s vs SABR {sabr:.4f}s (7 repeats, 1e4 paths)")


# 9 ----------------------------------------------------------------------------

def test_criterion_9_implied_vol(criterion, ref_params):
    worst, misses, total = 0.0, [], 0
    for vol in np.linspace(0.05, 1.0, 20):
        for m in np.linspace(0.5, 2.0, 16):
            total += 1
            s = 100.0 * m
            try:
                err = abs(implied_vol(bs_call(s, 100.0, 1.0, vol), s, 100.0, 1.0) - vol)
            except Exception:
                err = math.inf
            worst = max(worst, err)
            if not err <= 1e-8:
                misses.append((round(float(vol), 3), round(float(m), 2)))
    fs = compute_factors(CoefficientSchedule.constant((1.0,) * 5, 0.0, 1.0), 0.0, 1.0, 0.0)
    pg = price_grid(fs, ref_params, np.linspace(*SPOT_GRID), np.linspace(*STRIKE_GRID), v0=0.2)
    vs = surface(pg, 1.0)
    smiles = [single_interior_minimum(row) for row in vs.vols]
    mid = vs.vols[len(vs.vols) // 2]
    ok = not misses and vs.ok_fraction >= 0.95 and all(smiles)
    _report(criterion, 9, ok,
            f"round trip: {total - len(misses)}/{total} cells within 1e-8 (misses {misses[:4]}...), "
            f"surface ok {vs.ok_fraction:.0%} (>=95%), rows with interior minimum {sum(smiles)}/{len(smiles)}; "
            f"middle row vols {np.round(mid[[0, 3, 6, 9, 12]], 4).tolist()}")


# 10 ---------------------------------------------------------------------------

_MODEL = {"m0": 1, "k_omega": 0, "k_mu": 0, "sigma0": 0, "sigma1": 0.2, "gamma0": 0, "gamma1": 0.2,
          "rho": 0.5, "c": 0}
_SPECS = [
    {"name": "pg", "kind": "price-grid", "model": _MODEL,
     "grids": {"s_values": [90, 100, 110], "k_values": [80, 100, 120]}},
    {"name": "iv", "kind": "implied-surface", "model": _MODEL,
     "grids": {"s_values": [90, 100, 110], "k_values": [80, 100, 120]}},
    {"name": "kc", "kind": "kernel-check", "model": _MODEL},
    {"name": "mc", "kind": "mc-compare", "model": _MODEL, "repeats": 3,
     "sabr": {"alpha": 0.2, "beta": 1, "rho": 0.5, "s0": 100, "v0": 0.2},
     "mc": {"n_paths": 2000, "n_steps": 50, "seed": 9, "keep_paths": False, "scheme": "exact-vol-euler-asset"}},
]


def test_criterion_10_determinism(criterion, tmp_path):
    mismatched, compared = [], 0
    for raw in _SPECS:
        spec = ExperimentSpec.from_dict(json.loads(json.dumps(raw)))
        runs = [run_experiment(spec, seed=17, out_dir=tmp_path / f"run{i}") for i in range(2)]
        volatile = set(runs[0].manifest["volatile"])
        for f in runs[0].files:
            name = f.split("/")[-1]
            if name in volatile:
                continue
            other = str(tmp_path / "run1" / spec.name / name)
            compared += 1
            if not filecmp.cmp(f, other, shallow=False):
                mismatched.append(f"{spec.name}/{name}")
    _report(criterion, 10, not mismatched,
            f"{compared} artifacts over 4 experiment kinds byte-identical across reruns; mismatches: {mismatched}")
