import time

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from fchmorph.errors import ConvergenceError, DomainError
from fchmorph.mesh import GridSpec
from fchmorph.profiles import (
    EquilibriumProfile,
    SolverOptions,
    bilayer_quadrature_profile,
    decay_rate_fit,
    first_integral_defect,
    profile_residual,
    shoot_filament_amplitude,
    solve_bilayer,
    solve_filament,
)
from fchmorph.well import WellParams, well_positive_zero

from conftest import GRID_LINE, GRID_RADIAL


def test_bilayer_turning_point_and_first_integral(bilayer_profiles):
    p = bilayer_profiles[-0.5]
    assert abs(p.max_value - (5 - np.sqrt(13)) / 6) < 1e-6
    assert p.values[0] == p.max_value
    assert first_integral_defect(p) < 1e-8
    assert p.residual_norm < 1e-10


@pytest.mark.parametrize("xi", [-0.85, -0.5, -0.3])
def test_bilayer_matches_quadrature_oracle(bilayer_profiles, xi):
    p = bilayer_profiles[xi]
    z = p.coord[p.coord < 12.0]
    ref = bilayer_quadrature_profile(p.well, z)
    assert np.max(np.abs(p.values[: z.size] - ref)) < 1e-8


@pytest.mark.parametrize("xi", [-0.85, -0.5])
def test_bilayer_monotone_decreasing(bilayer_profiles, xi):
    p = bilayer_profiles[xi]
    assert np.all(np.diff(p.values) <= 1e-13)
    assert np.all(p.values > -1.0)


@pytest.mark.parametrize("xi", [-0.9, -0.5])
def test_decay_rates(bilayer_profiles, filament_profiles, xi):
    w = WellParams(xi)
    pb = bilayer_profiles.get(xi) or solve_bilayer(w, GRID_LINE)
    pf = filament_profiles.get(xi) or solve_filament(w, GRID_RADIAL)
    k = np.sqrt(2.0 + xi)
    assert decay_rate_fit(pb) == pytest.approx(k, rel=0.02)
    assert decay_rate_fit(pf) == pytest.approx(k, rel=0.02)


def test_decay_rate_sqrt_one_point_one():
    p = solve_bilayer(WellParams(-0.9), GRID_LINE)
    assert decay_rate_fit(p) == pytest.approx(np.sqrt(1.1), rel=0.02)


def test_residual_of_constant_state_is_zero():
    w = WellParams(-0.5)
    g = GridSpec(10.0, 201, "line")
    n = 201
    p = EquilibriumProfile(g, np.full(n, -1.0), np.zeros(n), "bilayer", 0.0, w)
    assert profile_residual(p) == 0.0


def test_residual_detects_perturbed_profile(bilayer_profiles):
    p = bilayer_profiles[-0.5]
    bumped = p.values + 1e-3 * np.exp(-((p.coord - 2.0) ** 2))
    q = EquilibriumProfile(p.grid, bumped, p.derivative, "bilayer", 0.0, p.well)
    assert profile_residual(q) > 1e-5


@pytest.mark.parametrize("xi", [-0.85, -0.5])
def test_filament_profile(filament_profiles, xi):
    p = filament_profiles[xi]
    assert p.residual_norm < 1e-10
    assert p.values[0] == pytest.approx(shoot_filament_amplitude(p.well)[0], abs=1e-6)
    assert p.derivative[0] == 0.0
    assert np.all(p.excess > -1e-12)
    assert p.values[-1] + 1.0 < 1e-6


@pytest.mark.parametrize("solver,geo", [(solve_bilayer, "line"), (solve_filament, "radial")])
def test_grid_convergence(solver, geo):
    w = WellParams(-0.5)
    g = GridSpec(20.0, 2001, geo)
    a = solver(w, g)
    b = solver(w, g.refined())
    # compare on the coarse nodes through a cubic spline of the fine profile
    fine = CubicSpline(b.coord, b.values)(a.coord)
    assert np.max(np.abs(fine - a.values)) < 1e-7
    assert abs(a.values[0] - b.values[0]) < 1e-9


def test_bilayer_runtime():
    t0 = time.perf_counter()
    solve_bilayer(WellParams(-0.5), GridSpec(20.0, 2001, "line"))
    assert time.perf_counter() - t0 < 2.0


def test_bilayer_rejects_nonnegative_tilt():
    with pytest.raises(DomainError, match="no homoclinic"):
        solve_bilayer(WellParams(0.1), GRID_LINE)


def test_wrong_geometry_rejected():
    with pytest.raises(DomainError):
        solve_bilayer(WellParams(-0.5), GRID_RADIAL)
    with pytest.raises(DomainError):
        solve_filament(WellParams(-0.5), GRID_LINE)


def test_newton_budget_exhaustion_reports_residual():
    opts = SolverOptions(tol=1e-30, max_iter=1)
    with pytest.raises(ConvergenceError) as info:
        solve_filament(WellParams(-0.5), GridSpec(20.0, 201, "radial"), opts)
    assert info.value.residual is not None


def test_quadrature_profile_at_origin_is_turning_point():
    w = WellParams(-0.7)
    assert bilayer_quadrature_profile(w, np.array([0.0]))[0] == pytest.approx(well_positive_zero(w), abs=1e-12)
