"""Compare the closed-form transition kernel with the numerically composed factor chain."""

import math

from wnslv.factors import CoefficientSchedule, compute_factors
from wnslv.kernels import TransformedPoint, chain_kernel, kernel_for, kernel_pde_residual
from wnslv.presets import REFERENCE_MODEL

alphas = (1.0, 0.8, 1.2, 1.0, 1.0)
for c in (0.0, 1.0):
    p = REFERENCE_MODEL.replace(c=c, gamma0=100.0 if c else 0.0)
    fs = compute_factors(CoefficientSchedule.constant(alphas, 0.0, 1.0), 0.0, 0.7, c)
    kern = kernel_for(fs, p)
    frm = TransformedPoint(0.3 if c else math.log(20.0), math.log(0.2 * p.sigma1))
    mx, my = kern.mean(frm.xs, frm.xv)
    sx, sy = math.sqrt(kern.cov[0][0]), math.sqrt(kern.cov[1][1])
    print(f"c = {c:g}")
    for a, b in ((0, 0), (1, -1), (-1.5, 0.5)):
        to = TransformedPoint(mx + a * sx, my + b * sy)
        closed = float(kern(frm.xs, frm.xv, to.xs, to.xv))
        chain = chain_kernel(fs, p, frm, to)
        res = kernel_pde_residual(p, c, alphas, 0.7, frm, to)
        print(f"  ({a:+.1f}, {b:+.1f}) sd: closed {closed:.10g}  chain {chain:.10g}  pde residual {res:.1e}")
