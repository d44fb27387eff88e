"""Command-line front end (``wnslv``).

Errors go to stderr as one JSON object ``{"error": code, "message": ...}``.
Exit status 2 marks invalid input, 1 a numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import SpecError, WNSLVError
from .factors import CoefficientSchedule, compute_factors
from .implied import surface
from .io import (ExperimentSpec, error_payload, load_json, parse_grid, run_experiment, simulate_rows,
                 split_model_file, validate_config, write_csv)
from .kernels import kernel_for
from .model import SabrParams
from .montecarlo import McConfig, benchmark_pair, simulate_sabr, simulate_slv
from .pricing import PriceGrid, PricingRequest, kernel_for_pricing, price_by_quadrature, price_c0, price_grid

_INPUT_ERRORS = ("schema_violation", "parse_error", "unknown_kind", "invalid_spec", "parameter_error",
                 "domain_error", "boundary_error", "time_domain_error", "ordering_error", "coverage_error")


def _model_and_schedule(args):
    model, sched = split_model_file(load_json(args.model))
    if getattr(args, "schedule", None):
        sched = CoefficientSchedule.from_dict(load_json(args.schedule))
    elif getattr(args, "alpha", None):
        try:
            alphas = [float(a) for a in args.alpha.split(",")]
        except ValueError:
            raise SpecError(f"--alpha {args.alpha!r} is not a comma-separated list", code="schema_violation") from None
        sched = CoefficientSchedule.constant(alphas, args.t0, args.expiry)
    if sched is None:
        sched = CoefficientSchedule.constant((1.0,) * 5, args.t0, args.expiry)
    return model, sched


def _out_path(args, default: str):
    if getattr(args, "out", None):
        return Path(args.out)
    if args.out_dir:
        return Path(args.out_dir) / default
    return None


def _emit_csv(args, default, header, rows):
    path = _out_path(args, default)
    if path is None:
        sys.stdout.write(",".join(header) + "\n")
        from .io import fmt
        for row in rows:
            sys.stdout.write(",".join(fmt(x) for x in row) + "\n")
    else:
        write_csv(path, header, rows)


def cmd_price(args):
    model, sched = _model_and_schedule(args)
    fs = compute_factors(sched, args.t0, args.expiry, model.c)
    if not (args.spot_grid or args.strike_grid):
        if args.spot is None or args.strike is None:
            raise SpecError("give --spot/--strike or --spot-grid/--strike-grid", code="schema_violation")
        req = PricingRequest(args.spot, args.strike, args.v0, args.t0, args.expiry)
        price = (price_by_quadrature(kernel_for_pricing(fs, model), model, req) if args.oracle
                 else price_c0(fs, model, req))
        _emit_csv(args, "prices.csv", ("S", "K", "price"), [(args.spot, args.strike, price)])
        return 0
    s_vals = parse_grid(args.spot_grid) if args.spot_grid else np.array([args.spot])
    k_vals = parse_grid(args.strike_grid) if args.strike_grid else np.array([args.strike])
    if s_vals[0] is None or k_vals[0] is None:
        raise SpecError("give both a spot and a strike (value or grid)", code="schema_violation")
    if args.oracle:
        kern = kernel_for_pricing(fs, model)
        prices = np.array([[price_by_quadrature(kern, model, PricingRequest(s, k, args.v0, args.t0, args.expiry))
                            for k in k_vals] for s in s_vals])
        pg = PriceGrid(s_vals, k_vals, prices)
    else:
        pg = price_grid(fs, model, s_vals, k_vals, v0=args.v0)
    # grids never abort: failing cells carry their error code
    _emit_csv(args, "prices.csv", ("S", "K", "price", "status"), pg.rows())
    return 0


def cmd_kernel(args):
    model, sched = _model_and_schedule(args)
    if (args.case == "c0") != (model.c == 0):
        raise SpecError(f"--case {args.case} does not match model c={model.c}", code="schema_violation")
    fs = compute_factors(sched, args.t0, args.expiry, model.c)
    kern = kernel_for(fs, model)
    pts = np.atleast_2d(np.loadtxt(args.points, delimiter=",", skiprows=1, ndmin=2))
    if pts.shape[1] != 4:
        raise SpecError("points CSV needs columns xs,xv,xsp,xvp", code="schema_violation")
    dens = kern(pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3])
    _emit_csv(args, "kernel.csv", ("xs", "xv", "xsp", "xvp", "density"),
              (tuple(p) + (d,) for p, d in zip(pts, dens)))
    return 0


def cmd_simulate(args):
    data = load_json(args.params)
    cfg = McConfig(n_paths=args.paths, n_steps=args.steps, t_expiry=args.expiry, seed=args.seed,
                   scheme=args.scheme, s0=float(data.get("s0", 100.0)), v0=float(data.get("v0", 0.2)))
    if args.model == "wn":
        model, _ = split_model_file(data)
        pe = simulate_slv(model, cfg)
    else:
        pe = simulate_sabr(SabrParams.from_dict(data), cfg)
    _emit_csv(args, "paths.csv", ("path_id", "step", "t", "S", "v"), simulate_rows(pe))
    return 0


def cmd_bench(args):
    model, _ = split_model_file(load_json(args.params_wn))
    sabr = SabrParams.from_dict(load_json(args.params_sabr))
    cfg = McConfig(n_paths=args.paths, n_steps=args.steps, seed=args.seed, scheme="exact-vol-euler-asset",
                   s0=sabr.s0, v0=sabr.v0, keep_paths=False)
    report = benchmark_pair(model, sabr, cfg, args.repeats)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    path = _out_path(args, "bench.json")
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return 0


def cmd_surface(args):
    model, sched = _model_and_schedule(args)
    fs = compute_factors(sched, args.t0, args.expiry, model.c)
    pg = price_grid(fs, model, parse_grid(args.spot_grid), parse_grid(args.strike_grid), v0=args.v0)
    vs = surface(pg, args.expiry - args.t0)
    _emit_csv(args, "surface.csv", ("S", "K", "price", "implied_vol", "status"), vs.rows())
    return 0


def cmd_validate(args):
    report = validate_config(args.file)
    sys.stdout.write(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0 if report.passed else 1


def cmd_run(args):
    spec = ExperimentSpec.from_file(args.spec)
    result = run_experiment(spec, seed=args.seed, out_dir=args.out_dir)
    sys.stdout.write(json.dumps({"status": result.status, "files": result.files}, indent=2) + "\n")
    return result.status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wnslv", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=None, help="random seed (simulation and run)")
    ap.add_argument("--threads", type=int, default=1, help="advisory parallelism width (currently serial)")
    ap.add_argument("--out-dir", default=None, help="directory for output files")
    sub = ap.add_subparsers(dest="command", required=True)

    def model_args(p, expiry_required=False):
        p.add_argument("--model", required=True, help="model JSON")
        p.add_argument("--schedule", help="coefficient schedule JSON (default: unit coefficients)")
        p.add_argument("--alpha", help="constant coefficients a1,a2,a3,a4,a5")
        p.add_argument("--t0", type=float, default=0.0)
        p.add_argument("--expiry", type=float, default=1.0, required=expiry_required)
        p.add_argument("--v0", type=float, default=0.2)
        p.add_argument("--out", help="output file (default: stdout or --out-dir)")

    p = sub.add_parser("price", help="call prices on a point or an (S, K) grid")
    model_args(p)
    p.add_argument("--spot", type=float)
    p.add_argument("--strike", type=float)
    p.add_argument("--spot-grid")
    p.add_argument("--strike-grid")
    p.add_argument("--oracle", action="store_true", help="price by quadrature of the transition kernel")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("kernel", help="evaluate the composed transition kernel")
    p.add_argument("action", choices=["eval"])
    model_args(p)
    p.add_argument("--case", choices=["c0", "c"], required=True)
    p.add_argument("--points", required=True, help="CSV with header xs,xv,xsp,xvp")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("simulate", help="Monte Carlo paths")
    p.add_argument("--model", choices=["wn", "sabr"], required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--steps", type=int, default=250)
    p.add_argument("--expiry", type=float, default=1.0)
    p.add_argument("--scheme", default="euler", choices=["euler", "exact-vol-euler-asset"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="time SLV against SABR at matched workloads")
    p.add_argument("--params-wn", required=True)
    p.add_argument("--params-sabr", required=True)
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--steps", type=int, default=250)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("implied-surface", help="implied volatilities of a price grid")
    model_args(p)
    p.add_argument("--spot-grid", required=True)
    p.add_argument("--strike-grid", required=True)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("validate", help="check a model config")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run an experiment spec")
    p.add_argument("spec")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command in ("simulate", "bench") and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except WNSLVError as exc:
        sys.stderr.write(json.dumps(error_payload(exc), sort_keys=True) + "\n")
        return 2 if exc.code in _INPUT_ERRORS else 1
    except (OSError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": "io_error" if isinstance(exc, OSError) else "invalid_input",
                                     "message": str(exc)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
