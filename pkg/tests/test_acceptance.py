"""Acceptance criteria, one PASS/FAIL line each at the stated tolerances.

Run with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
Each line is written straight to the terminal (bypassing capture) and
collected again in the pytest terminal summary.
"""
import sys
import time

import numpy as np
import pytest

from fchmorph.bifurcation import diagram, parse_range, pearling_ordering, threshold_lines
from fchmorph.coefficients import (
    ModelParams,
    bilayer_coefficients,
    filament_coefficients,
    shape_factor_scan,
)
from fchmorph.dynamics import DynamicsConfig, DynamicsError, evolve
from fchmorph.mesh import GridSpec
from fchmorph.operators import (
    assemble_bilayer_operator,
    assemble_filament_operator,
    cosine_similarity,
    ground_state,
    nearest_zero,
    spectrum,
)
from fchmorph.profiles import first_integral_defect, solve_bilayer, solve_filament
from fchmorph.well import WellParams

from conftest import invariance_slack

RESULTS = []
LINE = GridSpec(20.0, 2001, "line")
RADIAL = GridSpec(20.0, 2001, "radial")


def report(number, ok, detail):
    line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    RESULTS.append(line)
    sys.__stdout__.write("\n" + line + "\n")
    sys.__stdout__.flush()
    return ok


def _coeffs(xi, line=LINE, radial=RADIAL, psi_scale=1.0):
    w = WellParams(xi)
    return (bilayer_coefficients(w, line, psi_scale=psi_scale),
            filament_coefficients(w, radial, psi_scale=psi_scale))


# ---------------------------------------------------------------- 1

def test_criterion_1_bilayer_profile():
    w = WellParams(-0.5)
    t0 = time.perf_counter()
    p = solve_bilayer(w, LINE)
    dt = time.perf_counter() - t0
    defect = first_integral_defect(p)
    err = abs(p.max_value - (5 - np.sqrt(13)) / 6)
    ok = defect < 1e-8 and err < 1e-6 and dt < 2.0
    report(1, ok, f"defect={defect:.3e} (<1e-8), |max-u*|={err:.3e} (<1e-6), runtime={dt:.3f}s (<2s)")
    assert ok


# ---------------------------------------------------------------- 2

@pytest.mark.parametrize("xi", [-0.85, -0.7, -0.5, -0.3])
def test_criterion_2_kernels(xi):
    w = WellParams(xi)
    t0 = time.perf_counter()
    pb = solve_bilayer(w, LINE)
    pf = solve_filament(w, RADIAL)
    Ab = assemble_bilayer_operator(pb)
    kb = nearest_zero(Ab)
    cb = cosine_similarity(Ab, kb.psi, np.concatenate((-pb.derivative[::-1], pb.derivative[1:])))
    lam_b0 = ground_state(Ab).lam
    A1 = assemble_filament_operator(pf, 1)
    k1 = nearest_zero(A1)
    c1 = cosine_similarity(A1, k1.psi, pf.derivative)
    top2 = spectrum(assemble_filament_operator(pf, 2), 1)[0][0]
    dt = time.perf_counter() - t0
    ok = (abs(kb.lam) < 1e-5 and cb > 0.999 and abs(k1.lam) < 1e-5 and c1 > 0.999
          and lam_b0 > 0 and top2 < 0 and dt < 30)
    report(f"2[xi={xi}]", ok,
           f"L_b0 kernel={kb.lam:.2e} cos={cb:.6f}; L_f1 kernel={k1.lam:.2e} cos={c1:.6f}; "
           f"lambda_b0={lam_b0:.6f}>0; top(L_f2)={top2:.4f}<0; runtime={dt:.2f}s (<30s)")
    assert ok


# ---------------------------------------------------------------- 3

def test_criterion_3_shape_factor_sign_changes():
    xis = np.round(np.arange(-0.9, -0.4 + 1e-9, 0.05), 10)
    t0 = time.perf_counter()
    rows, brackets, _ = shape_factor_scan(xis, LINE)
    dt = time.perf_counter() - t0

    def inside(br, lo, hi):
        return len(br) == 1 and lo <= br[0][0] and br[0][1] <= hi

    ok_b = inside(brackets["S_b"], -0.70, -0.60)
    ok_f = inside(brackets["S_f"], -0.75, -0.65)
    ok = ok_b and ok_f and dt < 300
    report(3, ok, f"S_b brackets={brackets['S_b']} (want one in [-0.70,-0.60]); "
                  f"S_f brackets={brackets['S_f']} (want one in [-0.75,-0.65]); runtime={dt:.1f}s (<300s)")
    assert ok


# ---------------------------------------------------------------- 4

def test_criterion_4_diagram_topology():
    eta1 = 0.15
    ed, mu = parse_range("-1:1:201"), parse_range("-1:1:201")
    tabs = {}
    for xi in (-0.85, -0.5, -0.3):
        bc, fc = _coeffs(xi)
        tabs[xi] = diagram(bc, fc, eta1, ed, mu)
    n85, n30 = tabs[-0.85].admissible_count, tabs[-0.3].admissible_count
    o85, _ = pearling_ordering(tabs[-0.85])
    o50, _ = pearling_ordering(tabs[-0.5])
    parts = {
        "nonempty at -0.85": n85 > 0,
        "empty at -0.3": n30 == 0,
        "filament above bilayer at -0.85": o85 == 1,
        "ordering reversed at -0.5": o50 == -1,
    }
    ok = all(parts.values())
    report(4, ok, f"admissible cells: xi=-0.85 -> {n85}, xi=-0.3 -> {n30}; ordering (+1 filament above): "
                  f"xi=-0.85 -> {o85}, xi=-0.5 -> {o50}; "
                  + ", ".join(f"{k}: {'ok' if v else 'NO'}" for k, v in parts.items()))
    assert ok


# ---------------------------------------------------------------- 5

def test_criterion_5_dynamics():
    w = WellParams(-0.85)
    bc, fc = _coeffs(-0.85)
    # frozen mu1: huge domain, tiny extinction floor
    mp = ModelParams(epsilon=0.05, eta1=0.15, eta2=0.15, domain_volume=1e14)
    mub = bc.mu_b_star(mp)
    mu1, R0 = mub - 0.2, 1.1
    tr = evolve(DynamicsConfig(w, mp, spheres=(R0,), mu1_init=mu1, tau_final=100.0, r_min=1e-4), bc, fc)
    expected = R0**2 / (4 * bc.nu_b * (mub - mu1))
    rel = abs(tr.events[0]["tau"] - expected) / expected if tr.events else np.inf
    ok_ext = rel < 1e-6

    mp10 = ModelParams(epsilon=0.05, eta1=0.15, eta2=0.15, domain_volume=60.0)
    tr = evolve(DynamicsConfig(w, mp10, spheres=(1.0, 1.3, 0.8), hoops=(1.2, 0.9), mu1_init=0.0,
                               tau_final=10.0), bc, fc)
    drift = tr.mass_drift
    ok_mass = drift < 1e-10

    rng = np.random.default_rng(2024)
    worst, stationary, bad_final = 0.0, 0, 0
    for _ in range(100):
        mp_r = ModelParams(epsilon=0.05, eta1=0.15, eta2=0.15, domain_volume=float(rng.uniform(20, 200)))
        lo, hi = sorted((bc.mu_b_star(mp_r), fc.mu_f_star(mp_r)))
        cfg = DynamicsConfig(w, mp_r, spheres=tuple(rng.uniform(0.8, 2.0, rng.integers(0, 4))),
                             hoops=tuple(rng.uniform(0.8, 2.0, rng.integers(0, 4))),
                             mu1_init=float(rng.uniform(lo, hi)), tau_final=200.0,
                             output_times=tuple(np.linspace(0, 200, 401)))
        try:
            tr = evolve(cfg, bc, fc)
        except DynamicsError:
            bad_final += 1
            continue
        esc = max(lo - tr.mu1.min(), tr.mu1.max() - hi, 0.0)
        worst = max(worst, esc / max(invariance_slack(tr, cfg, bc, fc), 1e-300))
        if tr.stationary:
            stationary += 1
            if tr.final.n_spheres and tr.final.n_hoops:
                bad_final += 1
    ok_inv = worst <= 1.0
    ok_one = bad_final == 0
    ok = ok_ext and ok_mass and ok_inv and ok_one
    report(5, ok, f"extinction rel err={rel:.2e} (<1e-6); mass drift={drift:.2e} (<1e-10); "
                  f"max escape/tolerance={worst:.3g} (<=1) over 100 runs; "
                  f"stationary runs={stationary}, with both families={bad_final}")
    assert ok


# ---------------------------------------------------------------- 6

def test_criterion_6_normalization_invariance():
    worst = 0.0
    for xi in (-0.85, -0.5):
        base = threshold_lines(*_coeffs(xi), 0.15)
        for c in (0.1, 10.0):
            lines = threshold_lines(*_coeffs(xi, psi_scale=c), 0.15)
            for a, b in ((base.pearling_bilayer, lines.pearling_bilayer),
                         (base.pearling_filament, lines.pearling_filament)):
                assert a.sign_S == b.sign_S
                worst = max(worst, abs(b.slope - a.slope) / abs(a.slope))
    ok = worst < 1e-12
    report(6, ok, f"max relative threshold change={worst:.2e} (<1e-12) for c in {{0.1, 10}}")
    assert ok


# ---------------------------------------------------------------- 7

def test_criterion_7_grid_convergence():
    worst, where = 0.0, ""
    for xi in (-0.85, -0.5):
        a = _coeffs(xi)
        b = _coeffs(xi, LINE.refined(), RADIAL.refined())
        for ra, rb in zip(a, b):
            for k, v in ra.to_dict().items():
                r = abs(getattr(rb, k) - v) / abs(v)
                if r > worst:
                    worst, where = r, f"{k} at xi={xi}"
    ok = worst < 1e-6
    report(7, ok, f"max relative change under (N,L)->(2N,1.5L)={worst:.2e} ({where}) (<1e-6)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
