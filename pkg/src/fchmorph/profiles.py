"""Bilayer and filament equilibrium profiles.

Both profiles solve ``Delta phi = W'(phi)`` on a truncated domain, the
bilayer on the half-line ``z in [0, L]`` (even symmetry) and the filament in
the radial variable ``R in [0, L]``. The discretization is a GLL
spectral-element Galerkin scheme (see :mod:`fchmorph.mesh`); the far field is
enforced by a Robin condition that encodes the exponential tail.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded

from .errors import ConvergenceError, DomainError
from .mesh import GridSpec, Mesh, to_banded
from .well import WellParams, well_derivative, well_positive_zero

__all__ = [
    "SolverOptions",
    "EquilibriumProfile",
    "default_grid",
    "solve_bilayer",
    "solve_filament",
    "profile_residual",
    "decay_rate_fit",
    "first_integral_defect",
    "bilayer_quadrature_profile",
    "shoot_filament_amplitude",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    """Damped Newton controls; ``tol`` bounds the max-norm strong residual."""

    tol: float = 1e-10
    max_iter: int = 60
    min_damping: float = 2.0**-12


@dataclass
class EquilibriumProfile:
    grid: GridSpec
    values: np.ndarray
    derivative: np.ndarray
    morphology: str
    residual_norm: float
    well: WellParams
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def mesh(self) -> Mesh:
        return mesh_for(self.grid)

    @property
    def coord(self) -> np.ndarray:
        return self.mesh.nodes

    @property
    def excess(self) -> np.ndarray:
        """``phi - b_-``, the quantity that decays in the far field."""
        return self.values - self.well.b_minus

    @property
    def max_value(self) -> float:
        return float(np.max(self.values))


@lru_cache(maxsize=32)
def mesh_for(g: GridSpec) -> Mesh:
    return Mesh.from_grid(g)


def default_grid(w: WellParams, geometry="line", n_points=2001) -> GridSpec:
    """Default truncation ``L = max(20, 12/sqrt(alpha_-))``."""
    return GridSpec(max(20.0, 12.0 / np.sqrt(w.alpha_minus)), n_points, geometry)


def robin_coefficient(w: WellParams, g: GridSpec) -> float:
    """Boundary term of the far-field condition ``phi' = -k (phi - b_-)``.

    For the radial problem the decaying solution behaves like
    ``exp(-sqrt(alpha) R) / sqrt(R)``, so ``k`` carries the ``1/(2L)``
    correction, and the boundary term includes the weight ``rho(L) = L``.
    """
    k = np.sqrt(w.alpha_minus)
    L = g.half_length
    if g.geometry == "radial":
        return (k + 0.5 / L) * L
    return k


def _row_scale(mesh: Mesh) -> np.ndarray:
    # mass with the origin node (zero radial weight) replaced by its neighbour's
    s = mesh.mass.copy()
    if s[0] == 0.0:
        s[0] = s[1]
    return s


def _system(phi_hat, w, mesh, robin):
    phi = phi_hat + w.b_minus
    F = mesh.apply_stiffness(phi_hat) + mesh.mass * well_derivative(phi, 1, w)
    F[-1] += robin * phi_hat[-1]
    return F


def roundoff_floor(phi_hat, w, mesh, scale=None) -> float:
    """Attainable max-norm residual in double precision.

    The strong residual divides by nodal masses that shrink like ``h^2`` at
    GLL endpoints, so its rounding level grows with refinement. This bound,
    ``eps * max_i (|K| |phi_hat| + M |W'|)_i / M_i``, lets the stopping test
    use ``max(tol, floor)``.
    """
    scale = _row_scale(mesh) if scale is None else scale
    a = abs(mesh.stiffness) @ np.abs(phi_hat) + mesh.mass * np.abs(well_derivative(phi_hat + w.b_minus, 1, w))
    return float(np.finfo(float).eps * np.max(a / scale))


def _newton(phi_hat, w, mesh, robin, opts: SolverOptions, label: str):
    scale = _row_scale(mesh)
    bw = mesh.bandwidth
    Kb = to_banded(mesh.stiffness, bw)
    F = _system(phi_hat, w, mesh, robin)
    res = np.max(np.abs(F / scale))
    for it in range(1, opts.max_iter + 1):
        Jb = Kb.copy()
        Jb[bw] += mesh.mass * well_derivative(phi_hat + w.b_minus, 2, w)
        Jb[bw, -1] += robin
        step = solve_banded((bw, bw), Jb, -F)
        t = 1.0
        while True:
            trial = phi_hat + t * step
            Ft = _system(trial, w, mesh, robin)
            rt = np.max(np.abs(Ft / scale))
            if rt < res or t <= opts.min_damping:
                break
            t *= 0.5
        phi_hat, F, res_prev, res = trial, Ft, res, rt
        log.debug("%s newton it=%d damping=%g residual=%.3e", label, it, t, res)
        tol = max(opts.tol, roundoff_floor(phi_hat, w, mesh, scale))
        if res < tol:
            return phi_hat, res, it, tol
        if t <= opts.min_damping and rt >= res_prev:
            break
    raise ConvergenceError(
        f"{label}: Newton did not converge in {opts.max_iter} iterations "
        f"(final residual {res:.3e}, tol {opts.tol:.1e})", residual=res, iterations=opts.max_iter)


def _finish(phi_hat, w, g, morphology, it, meta):
    mesh = mesh_for(g)
    values = phi_hat + w.b_minus
    deriv = mesh.gradient(values)
    deriv[0] = 0.0  # symmetry / regularity at the origin, imposed weakly
    prof = EquilibriumProfile(g, values, deriv, morphology, 0.0, w, it, meta)
    prof.residual_norm = profile_residual(prof)
    return prof


def solve_bilayer(w: WellParams, g: GridSpec | None = None, opts: SolverOptions | None = None) -> EquilibriumProfile:
    """Homoclinic bilayer profile on the half-line with ``phi'(0) = 0``.

    Raises
    ------
    DomainError
        For ``xi >= 0`` (no homoclinic orbit) or a radial grid.
    ConvergenceError
        If damped Newton stalls.
    """
    opts = opts or SolverOptions()
    g = g or default_grid(w, "line")
    if g.geometry != "line":
        raise DomainError("bilayer profile requires a line grid")
    ustar = well_positive_zero(w)  # raises for xi >= 0
    mesh = mesh_for(g)
    guess = bilayer_quadrature_profile(w, mesh.nodes) - w.b_minus
    phi_hat, res, it, tol = _newton(guess, w, mesh, robin_coefficient(w, g), opts, "bilayer")
    prof = _finish(phi_hat, w, g, "bilayer", it, {"u_star": ustar, "tolerance": tol})
    return prof


def bilayer_quadrature_profile(w: WellParams, z, floor=1e-9, panels=2000) -> np.ndarray:
    """Bilayer profile from the first integral ``z(phi) = int du / sqrt(2 W(u))``.

    Near the turning point the substitution ``phi = u* - s^2`` removes the
    square-root singularity; below ``(u* - b_-)/2`` the variable
    ``t = log(phi - b_-)`` keeps the integrand bounded. Both pieces use
    composite Gauss-Legendre rules, and ``z -> phi`` is recovered by
    cubic interpolation. Past ``phi - b_- = floor`` the linear tail
    ``exp(-sqrt(alpha_-) z)`` is appended. Used as the Newton seed and as an
    independent accuracy oracle.
    """
    from scipy.interpolate import CubicSpline

    from .well import well_bracket

    ustar = well_positive_zero(w)
    bm = w.b_minus
    top = ustar - bm
    xg, wg = np.polynomial.legendre.leggauss(8)

    def cumulative(a, b, g):
        e = np.linspace(a, b, panels + 1)
        c, hw = 0.5 * (e[:-1] + e[1:]), 0.5 * (e[1:] - e[:-1])
        pts = c[:, None] + hw[:, None] * xg[None, :]
        vals = (g(pts) * wg[None, :]).sum(axis=1) * hw
        return e, np.concatenate(([0.0], np.cumsum(vals)))

    # Q = (u - u*)(u - r2)/2 with r2 the second root of the bracket
    r2 = 2.0 * (w.b_plus + w.xi / 3.0) - ustar

    def g_s(s):
        u = ustar - s * s
        return 2.0 / ((u - bm) * np.sqrt(0.5 * (r2 - u)))

    def g_t(t):
        ph = np.exp(t)
        return -1.0 / np.sqrt(well_bracket(ph + bm, w))

    sa, za = cumulative(0.0, np.sqrt(0.5 * top), g_s)
    tb, zb = cumulative(np.log(0.5 * top), np.log(floor), g_t)
    zs = np.concatenate((za, za[-1] + zb[1:]))
    hs = np.concatenate((top - sa**2, np.exp(tb[1:])))
    spline = CubicSpline(zs, hs)
    z = np.abs(np.asarray(z, dtype=float))
    k = np.sqrt(w.alpha_minus)
    inside = z <= zs[-1]
    out = np.empty_like(z)
    out[inside] = spline(z[inside])
    out[~inside] = floor * np.exp(-k * (z[~inside] - zs[-1]))
    return out + bm


def shoot_filament_amplitude(w: WellParams, r_max=30.0, iters=40, rtol=1e-10):
    """Center value ``phi_f(0)`` of the radial homoclinic by shooting.

    Integrates ``phi'' + phi'/R = W'(phi)`` from the origin and bisects on
    the center value: a too-large start undershoots through ``b_-`` and a
    too-small one turns back before reaching it.

    Returns
    -------
    a : float
        Bisected center value (lower bracket).
    sol : OdeResult
        The trajectory shot from ``a``.
    """
    bm = w.b_minus
    lo, hi = bm + 1e-9, w.b_plus - 1e-9

    def rhs(R, y):
        return [y[1], well_derivative(y[0], 1, w) - y[1] / R]

    def turn(R, y):
        return y[1]

    def undershoot(R, y):
        return y[0] - bm

    turn.terminal = undershoot.terminal = True
    turn.direction = 1.0

    def shot(a):
        R0 = 1e-6
        f1 = well_derivative(a, 1, w)
        y0 = [a + 0.25 * f1 * R0**2, 0.5 * f1 * R0]
        s = solve_ivp(rhs, (R0, r_max), y0, events=(turn, undershoot), method="DOP853",
                      rtol=rtol, atol=1e-13, dense_output=False)
        return (-1 if s.t_events[1].size else 1), s

    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if shot(mid)[0] > 0:
            lo = mid
        else:
            hi = mid
    return lo, shot(lo)[1]


def _filament_guess(w: WellParams, R: np.ndarray):
    a, s = shoot_filament_amplitude(w)
    Rs, ys = s.t, s.y[0] - w.b_minus
    # keep the trajectory up to its closest approach to b_-, then an exponential tail
    k = int(np.argmin(np.where(ys > 0, ys, np.inf)))
    Rc, yc = Rs[k], ys[k]
    k0 = np.sqrt(w.alpha_minus)
    tail = yc * np.exp(-k0 * (R - Rc)) * np.sqrt(Rc / np.maximum(R, Rc))
    guess = np.where(R <= Rc, np.interp(R, Rs, ys, left=a - w.b_minus), tail)
    return a, guess


def solve_filament(w: WellParams, g: GridSpec | None = None, opts: SolverOptions | None = None) -> EquilibriumProfile:
    """Radial filament profile with ``phi'(0) = 0`` and ``phi -> b_-``.

    The center value is located by shooting and bisection; the shot
    trajectory (with an exponential tail) seeds damped Newton on the
    spectral-element system. Existence is not guaranteed by the model, so a
    failure to converge, or convergence to a different branch, is reported as
    :class:`ConvergenceError` with diagnostics.
    """
    opts = opts or SolverOptions()
    g = g or default_grid(w, "radial")
    if g.geometry != "radial":
        raise DomainError("filament profile requires a radial grid")
    mesh = mesh_for(g)
    a, guess = _filament_guess(w, mesh.nodes)
    phi_hat, res, it, tol = _newton(guess, w, mesh, robin_coefficient(w, g), opts, "filament")
    center = phi_hat[0] + w.b_minus
    if abs(center - a) > 1e-3 or np.min(phi_hat) < -1e-6:
        raise ConvergenceError(
            f"filament: Newton left the shooting branch (center {center:.6g}, shooting {a:.6g})",
            residual=res, iterations=it)
    return _finish(phi_hat, w, g, "filament", it, {"shooting_center": a, "tolerance": tol})


def profile_residual(p: EquilibriumProfile) -> float:
    """Max-norm of the strong ODE residual, recomputed from the nodal values.

    Rebuilds the discrete system from the grid and evaluates
    ``(K phi_hat + boundary + M W'(phi)) / M`` row by row, with the origin row
    of the radial system scaled by its neighbour's mass. This is independent
    of any state kept by the solver.
    """
    mesh = Mesh.from_grid(p.grid)
    F = _system(p.values - p.well.b_minus, p.well, mesh, robin_coefficient(p.well, p.grid))
    return float(np.max(np.abs(F / _row_scale(mesh))))


def first_integral_defect(p: EquilibriumProfile) -> float:
    """``max |(phi')^2 / 2 - W(phi)|`` over the nodes (bilayer invariant)."""
    from .well import well_eval

    return float(np.max(np.abs(0.5 * p.derivative**2 - well_eval(p.values, p.well))))


def decay_rate_fit(p: EquilibriumProfile, window=(0.5, 0.75)) -> float:
    """Exponential decay rate of ``phi - b_-`` from a log-linear fit.

    For the radial profile the algebraic prefactor ``R^{-1/2}`` of the
    decaying Bessel solution is removed before fitting.
    """
    x = p.coord
    L = p.grid.half_length
    sel = (x >= window[0] * L) & (x <= window[1] * L)
    y = np.abs(p.excess[sel])
    if np.any(y <= 0):
        raise DomainError("profile tail is not strictly above b_- in the fit window")
    ly = np.log(y)
    if p.grid.geometry == "radial":
        ly = ly + 0.5 * np.log(x[sel])
    slope = np.polyfit(x[sel], ly, 1)[0]
    return float(-slope)
