"""Command-line entry point ``fch``.

Exit codes: 0 success, 1 domain or solver error, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bifurcation import diagram, invariant_interval, parse_range, pearling_ordering, threshold_lines
from .coefficients import (
    CACHE_ENV,
    CoefficientCache,
    ModelParams,
    cached_coefficients,
    shape_factor_scan,
)
from .dynamics import DynamicsConfig, evolve
from .errors import DomainError, FCHError
from .mesh import GridSpec
from .operators import (
    assemble_bilayer_operator,
    assemble_filament_operator,
    spectrum,
)
from .output import RunManifest, dumps, sidecar_path, write_csv, write_json
from .profiles import SolverOptions, decay_rate_fit, solve_bilayer, solve_filament
from .well import WellParams, well_eval, well_positive_zero

log = logging.getLogger("fchmorph")

REPRO_XI = (-0.85, -0.7, -0.5, -0.3)


class UsageError(Exception):
    """Bad invocation or unreadable/ill-formed config (exit code 2)."""


# ----------------------------------------------------------------- helpers

def _grid(args, w: WellParams, geometry: str) -> GridSpec:
    L = args.L if args.L is not None else max(20.0, 12.0 / np.sqrt(w.alpha_minus))
    return GridSpec(L, args.N, geometry, args.degree)


def _opts(args) -> SolverOptions:
    return SolverOptions(tol=args.tol)


def _cache(args):
    if args.no_cache:
        return None
    return CoefficientCache(args.cache_dir)


def _coeffs(args, w, cache, which=("bilayer", "filament")):
    g = _grid(args, w, "line")
    return cached_coefficients(w, g, _opts(args), cache, which)


def _hits(cache):
    return cache.hits if cache is not None else 0


def _model(args, eta1=None, eta2=None):
    return ModelParams(epsilon=args.epsilon, eta1=args.eta1 if eta1 is None else eta1,
                       eta2=args.eta2 if eta2 is None else eta2, domain_volume=args.domain_volume)


def _emit(obj):
    sys.stdout.write(dumps(obj) + "\n")


# ----------------------------------------------------------------- commands

def cmd_well(args):
    w = WellParams(args.xi)
    try:
        ustar = well_positive_zero(w)
    except FCHError:
        ustar = None
    _emit({"xi": w.xi, "alpha_minus": w.alpha_minus, "W_at_bplus": well_eval(w.b_plus, w), "u_star": ustar})


def cmd_profile(args):
    man = RunManifest("profile", vars_public(args))
    w = WellParams(args.xi)
    geo = "line" if args.morphology == "bilayer" else "radial"
    g = _grid(args, w, geo)
    solver = solve_bilayer if args.morphology == "bilayer" else solve_filament
    p = solver(w, g, _opts(args))
    out = write_csv(args.out, ("coord", "value", "derivative"), zip(p.coord, p.values, p.derivative))
    man.outputs = [str(out)]
    side = {"residual_norm": p.residual_norm, "max_value": p.max_value,
            "decay_rate_fit": decay_rate_fit(p), "iterations": p.iterations,
            "tolerance": p.meta.get("tolerance"), "nodes": int(p.coord.size),
            "manifest": man.finish().to_dict()}
    write_json(sidecar_path(out), side)


def cmd_spectrum(args):
    w = WellParams(args.xi)
    if args.morphology == "bilayer":
        p = solve_bilayer(w, _grid(args, w, "line"), _opts(args))
        A = assemble_bilayer_operator(p)
        kern = np.concatenate((-p.derivative[::-1], p.derivative[1:]))
    else:
        p = solve_filament(w, _grid(args, w, "radial"), _opts(args))
        A = assemble_filament_operator(p, args.m)
        kern = p.derivative if args.m == 1 else None
    lam, _ = spectrum(A, 5)
    res = None
    if kern is not None:
        k = A.restrict(kern)
        r = A.apply(k)
        res = float(np.sqrt(A.inner(r, r) / A.inner(k, k)))
    _emit({"morphology": args.morphology, "xi": w.xi, "m": args.m if args.morphology == "filament" else None,
           "eigenvalues": lam.tolist(), "kernel_residual": res})


def cmd_coeffs(args):
    cache = _cache(args)
    w = WellParams(args.xi)
    c = _coeffs(args, w, cache)
    mp = _model(args)
    bc, fc = c["bilayer"], c["filament"]
    lines = threshold_lines(bc, fc, mp.eta1)
    inv = invariant_interval(bc, fc, mp)
    _emit({"xi": w.xi, "alpha_minus": w.alpha_minus, "bilayer": bc.to_dict(), "filament": fc.to_dict(),
           "model": {"epsilon": mp.epsilon, "eta1": mp.eta1, "eta2": mp.eta2, "eta_d": mp.eta_d,
                     "domain_volume": mp.domain_volume},
           "mu_b_star": bc.mu_b_star(mp), "mu_f_star": fc.mu_f_star(mp),
           "pearling_slopes": {"c_b": lines.pearling_bilayer.slope, "sign_S_b": lines.pearling_bilayer.sign_S,
                               "c_f": lines.pearling_filament.slope, "sign_S_f": lines.pearling_filament.sign_S},
           "invariant_interval": {"mu_lo": inv.mu_lo, "mu_hi": inv.mu_hi, "favored": inv.favored},
           "cache_hits": _hits(cache), "code_version": __version__})


def _xi_list(a, b, step):
    if step == 0 or (b - a) * step < 0:
        raise UsageError("--step must be nonzero and point from --from to --to")
    n = int(np.floor((b - a) / step + 1e-9)) + 1
    return [round(a + i * step, 12) for i in range(max(n, 0))]


def _scan(args, xis, out, cache, man):
    g = GridSpec(args.L if args.L is not None else 20.0, args.N, "line", args.degree)
    rows, brackets, _ = shape_factor_scan(xis, g, _opts(args), cache, jobs=args.jobs)
    path = write_csv(out, ("xi", "S_b", "S_f"), [(r["xi"], r["S_b"], r["S_f"]) for r in rows])
    man.cache_hits = _hits(cache)
    man.outputs.append(str(path))
    return path, rows, brackets


def cmd_scan_shape(args):
    cache = _cache(args)
    man = RunManifest("scan-shape", vars_public(args))
    xis = _xi_list(args.xi_from, args.xi_to, args.step)
    path, rows, brackets = _scan(args, xis, args.out, cache, man)
    write_json(sidecar_path(path), {"brackets": brackets,
                                    "errors": {str(r["xi"]): r["errors"] for r in rows if r["errors"]},
                                    "manifest": man.finish().to_dict()})


DIAGRAM_HEADER = ("eta_d", "mu1", "bp", "fp", "bf", "ff", "admissible", "d_bp", "d_fp", "d_bf", "d_ff")


def _diagram(args, xi, eta1, ed, mu, out, cache, man):
    w = WellParams(xi)
    c = _coeffs(args, w, cache)
    bc, fc = c["bilayer"], c["filament"]
    tab = diagram(bc, fc, eta1, ed, mu, tol=args.tol_classify)
    path = write_csv(out, DIAGRAM_HEADER, tab.rows())
    lines = threshold_lines(bc, fc, eta1)
    order, _ = pearling_ordering(tab)
    info = {"xi": xi, "eta1": eta1, "rows": len(tab), "admissible_cells": tab.admissible_count,
            "pearling_ordering_filament_above": order,
            "lines": {"c_b": lines.pearling_bilayer.slope, "sign_S_b": lines.pearling_bilayer.sign_S,
                      "c_f": lines.pearling_filament.slope, "sign_S_f": lines.pearling_filament.sign_S,
                      "mu_b_star_intercept": lines.fingering_bilayer.intercept,
                      "mu_b_star_slope": lines.fingering_bilayer.slope,
                      "mu_f_star": lines.fingering_filament.intercept},
            "bilayer": bc.to_dict(), "filament": fc.to_dict()}
    man.cache_hits = _hits(cache)
    man.outputs.append(str(path))
    return path, info


def cmd_diagram(args):
    cache = _cache(args)
    man = RunManifest("diagram", vars_public(args))
    ed, mu = parse_range(args.eta_d), parse_range(args.mu1)
    path, info = _diagram(args, args.xi, args.eta1, ed, mu, args.out, cache, man)
    info["manifest"] = man.finish().to_dict()
    write_json(sidecar_path(path), info)


def _load_config(path):
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(d, dict) or "well" not in d:
        raise UsageError(f"config {path} must be a JSON object with a 'well' entry")
    return d


def cmd_evolve(args):
    cache = _cache(args)
    d = _load_config(args.config)
    # flags override config fields
    if args.mode is not None:
        d["mode"] = args.mode
    if args.tau_final is not None:
        d["tau_final"] = args.tau_final
        if d.get("output_times"):
            d["output_times"] = [t for t in d["output_times"] if t <= args.tau_final]
    for key in ("rel_tol", "abs_tol", "r_min"):
        v = getattr(args, key)
        if v is not None:
            d.setdefault("integrator", {})[key] = v
    man = RunManifest("evolve", {"config": d, "argv": vars_public(args)})
    try:
        cfg = DynamicsConfig.from_dict(d)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    c = _coeffs(args, cfg.well, cache)
    bc, fc = c["bilayer"], c["filament"]
    tr = evolve(cfg, bc, fc)
    nb, nh = tr.sphere_radii.shape[1], tr.hoop_radii.shape[1]
    header = (["tau", "mu1", "mass_hat", "n_spheres", "n_hoops"]
              + [f"R_{i + 1}" for i in range(nb)] + [f"r_{j + 1}" for j in range(nh)])
    rows = (
        (t, m, M, int(ns), int(nh_), *R, *r)
        for t, m, M, ns, nh_, R, r in zip(tr.times, tr.mu1, tr.mass_hat, tr.n_spheres, tr.n_hoops,
                                         tr.sphere_radii, tr.hoop_radii)
    )
    path = write_csv(args.out, header, rows)
    man.cache_hits = _hits(cache)
    man.outputs = [str(path)]
    mp = cfg.model
    write_json(sidecar_path(path), {
        "events": tr.events, "mode": tr.mode, "mass_drift": tr.mass_drift, "stationary": tr.stationary,
        "mu_b_star": bc.mu_b_star(mp), "mu_f_star": fc.mu_f_star(mp),
        "manifest": man.finish().to_dict()})


def cmd_repro(args):
    cache = _cache(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest("repro", vars_public(args))
    xis = _xi_list(-0.95, -0.25, 0.025)
    path, rows, brackets = _scan(args, xis, out / "shape_factors.csv", cache, man)
    summary = {"shape_factors": {"csv": path.name, "brackets": brackets}, "diagrams": {}}
    ed, mu = parse_range(args.eta_d), parse_range(args.mu1)
    for xi in REPRO_XI:
        name = f"diagram_xi{xi:+.2f}.csv".replace("+", "p").replace("-", "m")
        p, info = _diagram(args, xi, args.eta1, ed, mu, out / name, cache, man)
        summary["diagrams"][str(xi)] = {"csv": p.name, **{k: info[k] for k in
                                                          ("admissible_cells", "pearling_ordering_filament_above",
                                                           "lines")}}
    summary["manifest"] = man.finish().to_dict()
    write_json(out / "manifest.json", summary)


# ----------------------------------------------------------------- parser

def vars_public(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--cache-dir", default=None,
                        help=f"coefficient cache directory (default ${CACHE_ENV} or .fch-cache/)")
    common.add_argument("--no-cache", action="store_true", help="disable the coefficient cache")
    common.add_argument("--log-level", default="WARNING")

    grid = _Parser(add_help=False)
    grid.add_argument("--L", type=float, default=None, help="truncation half-length")
    grid.add_argument("--N", type=int, default=2001, help="requested node count")
    grid.add_argument("--degree", type=int, default=4, help="spectral element degree")
    grid.add_argument("--tol", type=float, default=1e-10, help="Newton residual tolerance")

    model = _Parser(add_help=False)
    model.add_argument("--eta1", type=float, default=0.15)
    model.add_argument("--eta2", type=float, default=0.15)
    model.add_argument("--epsilon", type=float, default=0.05)
    model.add_argument("--domain-volume", type=float, default=1.0)

    ap = _Parser(prog="fch", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("well", parents=[common], help="well scalars as JSON")
    s.add_argument("--xi", type=float, required=True)
    s.set_defaults(func=cmd_well)

    s = sub.add_parser("profile", parents=[common, grid], help="equilibrium profile CSV")
    s.add_argument("morphology", choices=("bilayer", "filament"))
    s.add_argument("--xi", type=float, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("spectrum", parents=[common, grid], help="top eigenvalues as JSON")
    s.add_argument("morphology", choices=("bilayer", "filament"))
    s.add_argument("--xi", type=float, required=True)
    s.add_argument("--m", type=int, default=0, help="azimuthal index (filament)")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("coeffs", parents=[common, grid, model], help="coefficient record as JSON")
    s.add_argument("--xi", type=float, required=True)
    s.set_defaults(func=cmd_coeffs)

    s = sub.add_parser("scan-shape", parents=[common, grid], help="shape factors over a tilt range")
    s.add_argument("--from", dest="xi_from", type=float, required=True)
    s.add_argument("--to", dest="xi_to", type=float, required=True)
    s.add_argument("--step", type=float, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_scan_shape)

    s = sub.add_parser("diagram", parents=[common, grid], help="stability classification grid")
    s.add_argument("--xi", type=float, required=True)
    s.add_argument("--eta1", type=float, required=True)
    s.add_argument("--eta-d", default="-1:1:201", help="a:b:n")
    s.add_argument("--mu1", default="-1:1:201", help="a:b:n")
    s.add_argument("--tol-classify", type=float, default=1e-9, help="marginal band half-width")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_diagram)

    s = sub.add_parser("evolve", parents=[common, grid], help="sphere/hoop competition")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--mode", choices=("constraint", "paper_ode"), default=None)
    s.add_argument("--tau-final", type=float, default=None)
    s.add_argument("--rel-tol", type=float, default=None)
    s.add_argument("--abs-tol", type=float, default=None)
    s.add_argument("--r-min", type=float, default=None)
    s.set_defaults(func=cmd_evolve)

    s = sub.add_parser("repro", parents=[common, grid], help="shape-factor scan and stability diagrams")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--eta1", type=float, default=0.15)
    s.add_argument("--eta-d", default="-1:1:201")
    s.add_argument("--mu1", default="-1:1:201")
    s.add_argument("--tol-classify", type=float, default=1e-9)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_repro)
    return ap


RANGE_OPTIONS = ("--eta-d", "--mu1")


def _join_ranges(argv):
    # "a:b:n" with a negative start looks like a flag to argparse
    out, it = [], iter(argv)
    for tok in it:
        if tok in RANGE_OPTIONS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_ranges(argv))
    except UsageError as exc:
        sys.stderr.write(f"fch: usage error: {exc}\n")
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"fch: usage error: {exc}\n")
        return 2
    except FCHError as exc:
        sys.stderr.write(f"fch: error: {type(exc).__name__}: {exc}\n")
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
