"""Config loading, CSV/JSON emission and the experiment runner."""

from __future__ import annotations

import hashlib
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import SpecError
from .factors import CoefficientSchedule, compute_factors, discriminant
from .implied import surface
from .kernels import TransformedPoint, chain_kernel, kernel_for, kernel_pde_residual
from .model import ConditionReport, ModelParams, SabrParams, validate_closure
from .montecarlo import McConfig, benchmark_pair
from .pricing import price_grid, to_transformed

KINDS = ("price-grid", "implied-surface", "mc-compare", "kernel-check")
VOLATILE = ("timing.json",)


# --- low-level writers ---------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(x) for x in row) + "\n")
    return path


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(dumps(obj))
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:n`` to an ascending linspace."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise SpecError(f"grid {text!r} is not of the form lo:hi:n", code="schema_violation") from None
    if n < 1 or (n > 1 and not hi > lo):
        raise SpecError(f"grid {text!r} must have n >= 1 and hi > lo", code="schema_violation")
    return np.linspace(lo, hi, n)


def load_json(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: {exc.msg} at line {exc.lineno}, column {exc.colno}",
                        code="parse_error", line=exc.lineno, column=exc.colno) from None


def split_model_file(data: dict):
    """Accept either a bare model mapping or ``{"model": ..., "schedule": ...}``."""
    if "model" in data and isinstance(data["model"], dict):
        model = ModelParams.from_dict(data["model"])
        sched = data.get("schedule")
    else:
        model = ModelParams.from_dict(data)
        sched = None
    return model, CoefficientSchedule.from_dict(sched) if sched else None


# --- configuration validation --------------------------------------------------

def validate_config(path) -> ConditionReport:
    data = load_json(path)
    model, sched = split_model_file(data)
    report = validate_closure(model)
    unit = sched is None
    sched = sched or CoefficientSchedule.constant((1.0,) * 5, 0.0, 1.0)
    fs = compute_factors(sched, sched.breakpoints[0], sched.breakpoints[-1], model.c)
    disc = discriminant(fs, model)
    report.residuals["discriminant"] = disc.value
    if not disc.positive:
        which = "constant unit schedule" if unit else "given schedule"
        report.warnings.append(f"discriminant ({disc.case}) will be negative for the {which}: "
                               f"{disc.value:.6g} (needs |rho| < m0 for unit coefficients)")
    return report


# --- experiment specs ----------------------------------------------------------

@dataclass
class ExperimentSpec:
    name: str
    kind: str
    model: ModelParams
    schedule: CoefficientSchedule
    sabr: SabrParams | None = None
    mc: McConfig | None = None
    grids: tuple | None = None
    output_dir: str = "out"
    t0: float = 0.0
    expiry: float = 1.0
    v0: float = 0.2
    repeats: int = 5
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        for key in ("name", "kind"):
            if key not in data:
                raise SpecError(f"experiment spec is missing key: {key}", code="schema_violation", missing=[key])
        kind = data["kind"]
        if kind not in KINDS:
            raise SpecError(f"unknown experiment kind {kind!r}; expected one of {list(KINDS)}",
                            code="unknown_kind", kind=kind)
        if "model" not in data:
            raise SpecError("experiment spec is missing key: model", code="schema_violation", missing=["model"])
        model = ModelParams.from_dict(data["model"])
        t0 = float(data.get("t0", 0.0))
        expiry = float(data.get("expiry", 1.0))
        sched = (CoefficientSchedule.from_dict(data["schedule"]) if data.get("schedule")
                 else CoefficientSchedule.constant((1.0,) * 5, t0, expiry))
        sabr = SabrParams.from_dict(data["sabr"]) if data.get("sabr") else None
        mc = McConfig.from_dict(data["mc"]) if data.get("mc") else None
        grids = None
        if data.get("grids"):
            g = data["grids"]
            try:
                grids = (np.asarray(g["s_values"], dtype=float), np.asarray(g["k_values"], dtype=float))
            except (KeyError, TypeError):
                raise SpecError("grids needs s_values and k_values arrays", code="schema_violation") from None
        spec = cls(name=str(data["name"]), kind=kind, model=model, schedule=sched, sabr=sabr, mc=mc,
                   grids=grids, output_dir=str(data.get("output_dir", "out")), t0=t0, expiry=expiry,
                   v0=float(data.get("v0", 0.2)), repeats=int(data.get("repeats", 5)), raw=data)
        spec._check()
        return spec

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        return cls.from_dict(load_json(path))

    def _check(self):
        need = {"price-grid": ("grids",), "implied-surface": ("grids",),
                "mc-compare": ("sabr", "mc"), "kernel-check": ()}[self.kind]
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise SpecError(f"kind {self.kind} needs: {', '.join(missing)}", code="schema_violation",
                            missing=missing)

    def canonical(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))


@dataclass
class RunResult:
    status: int
    files: list
    manifest: dict


def _versions() -> dict:
    return {"wnslv": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _factors(spec: ExperimentSpec):
    return compute_factors(spec.schedule, spec.t0, spec.expiry, spec.model.c)


def _run_price_grid(spec, out: Path, seed):
    fs = _factors(spec)
    pg = price_grid(fs, spec.model, *spec.grids, v0=spec.v0)
    return [write_csv(out / "prices.csv", ("S", "K", "price", "status"), pg.rows())]


def _run_surface(spec, out: Path, seed):
    fs = _factors(spec)
    pg = price_grid(fs, spec.model, *spec.grids, v0=spec.v0)
    vs = surface(pg, spec.expiry - spec.t0)
    return [write_csv(out / "surface.csv", ("S", "K", "price", "implied_vol", "status"), vs.rows())]


def _run_mc(spec, out: Path, seed):
    mc = spec.mc
    if seed is not None:
        mc = McConfig.from_dict({**mc.to_dict(), "seed": int(seed)})
    report = benchmark_pair(spec.model, spec.sabr, mc, spec.repeats)
    stable = [{k: v for k, v in r.items() if k != "median_seconds"} for r in report]
    timing = {r["model"]: r["median_seconds"] for r in report}
    files = [write_json(out / "report.json", {"models": stable, "seed": mc.seed,
                                              "n_paths": mc.n_paths, "n_steps": mc.n_steps}),
             write_json(out / "timing.json", timing)]
    return files


def _run_kernel_check(spec, out: Path, seed):
    p = spec.model
    fs = _factors(spec)
    kern = kernel_for(fs, p)
    frm = to_transformed(p, 100.0 if p.c == 0 else p.gamma0, spec.v0)
    mx, my = kern.mean(frm.xs, frm.xv)
    sx, sy = math.sqrt(kern.cov[0][0]), math.sqrt(kern.cov[1][1])
    rows = []
    alphas = spec.schedule.values[0] if len(spec.schedule.values) == 1 else None
    for i, (a, b) in enumerate(((0.0, 0.0), (0.8, -0.5), (-0.6, 0.9), (1.2, 1.1))):
        to = TransformedPoint(float(mx + a * sx), float(my + b * sy))
        closed = float(kern(frm.xs, frm.xv, to.xs, to.xv))
        chain = chain_kernel(fs, p, frm, to)
        resid = (kernel_pde_residual(p, p.c, alphas, fs.t - fs.t0, frm, to)
                 if alphas is not None else float("nan"))
        rows.append((i, frm.xs, frm.xv, to.xs, to.xv, closed, chain, abs(closed - chain) / closed, resid))
    header = ("probe", "xs", "xv", "xsp", "xvp", "closed_form", "chain", "rel_diff", "pde_residual")
    return [write_csv(out / "kernel_check.csv", header, rows)]


_RUNNERS = {"price-grid": _run_price_grid, "implied-surface": _run_surface,
            "mc-compare": _run_mc, "kernel-check": _run_kernel_check}


def run_experiment(spec: ExperimentSpec, seed: int | None = None, out_dir=None) -> RunResult:
    """Run one experiment and write its artifacts plus ``manifest.json``.

    Every artifact except those listed as volatile (wall-clock timings) is a
    pure function of the experiment spec and seed.
    """
    out = Path(out_dir if out_dir is not None else spec.output_dir) / spec.name
    out.mkdir(parents=True, exist_ok=True)
    files = _RUNNERS[spec.kind](spec, out, seed)
    used_seed = seed if seed is not None else (spec.mc.seed if spec.mc is not None else None)
    manifest = {
        "name": spec.name,
        "kind": spec.kind,
        "spec_sha256": hashlib.sha256(spec.canonical().encode()).hexdigest(),
        "spec": spec.raw,
        "seed": used_seed,
        "versions": _versions(),
        "files": {f.name: sha256_file(f) for f in files if f.name not in VOLATILE},
        "volatile": [f.name for f in files if f.name in VOLATILE],
    }
    write_json(out / "manifest.json", manifest)
    return RunResult(0, [str(f) for f in files] + [str(out / "manifest.json")], manifest)


def error_payload(exc: Exception) -> dict:
    payload = {"error": getattr(exc, "code", "error"), "message": str(exc)}
    details = getattr(exc, "details", None)
    if details:
        payload["details"] = details
    return payload


def simulate_rows(pe):
    """CSV rows ``(path_id, step, t, S, v)`` of a path ensemble."""
    for i in range(pe.s_paths.shape[0]):
        for j, t in enumerate(pe.times):
            yield i, j, t, pe.s_paths[i, j], pe.v_paths[i, j]

