"""Competition between spherical bilayers and filament hoops.

Reduced system on the slow time ``tau``::

    dR_i/dtau = 2 nu_b (mu1 - mu_b*) / R_i
    dr_j/dtau =   nu_f (mu1 - mu_f*) / r_j

closed either by the leading-order mass constraint (``constraint`` mode)::

    mu1 = (alpha^2/|Omega|) (M_hat - m_b sum 4 pi R_i^2 - 2 pi m_f eps sum 2 pi r_j)

or by the reduced chemical-potential equation (``paper_ode`` mode)::

    dmu1/dtau = -(alpha^2/|Omega|) [16 pi nu_b (mu1 - mu_b*) N_b
                                   + 2 eps pi nu_f (mu1 - mu_f*) sum 1/r_j]

Radii are integrated through their squares, for which the right-hand sides
are smooth up to extinction and identical within a family; a member is
removed when its radius reaches ``r_min``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .coefficients import BilayerCoefficients, FilamentCoefficients, ModelParams
from .errors import DomainError, FCHError
from .well import WellParams

__all__ = [
    "HybridState",
    "DynamicsConfig",
    "Trajectory",
    "DynamicsError",
    "rhs",
    "mu1_from_mass",
    "mass_total",
    "evolve",
]

log = logging.getLogger(__name__)

MODES = ("constraint", "paper_ode")


class DynamicsError(FCHError):
    """Integration failure; ``state`` holds the last accepted state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass
class HybridState:
    tau: float
    sphere_radii: np.ndarray
    hoop_radii: np.ndarray
    mu1: float
    extinct_spheres: list = field(default_factory=list)  # (index, tau)
    extinct_hoops: list = field(default_factory=list)
    sphere_ids: np.ndarray | None = None
    hoop_ids: np.ndarray | None = None
    residual_mass: float = 0.0  # mass frozen in members removed at r_min

    def __post_init__(self):
        self.sphere_radii = np.asarray(self.sphere_radii, dtype=float).ravel()
        self.hoop_radii = np.asarray(self.hoop_radii, dtype=float).ravel()
        if self.sphere_ids is None:
            self.sphere_ids = np.arange(self.sphere_radii.size)
        if self.hoop_ids is None:
            self.hoop_ids = np.arange(self.hoop_radii.size)
        self.mu1 = float(self.mu1)

    @property
    def n_spheres(self) -> int:
        return int(self.sphere_radii.size)

    @property
    def n_hoops(self) -> int:
        return int(self.hoop_radii.size)


@dataclass(frozen=True)
class DynamicsConfig:
    well: WellParams
    model: ModelParams
    spheres: tuple = ()
    hoops: tuple = ()
    mu1_init: float | None = None
    mass_hat: float | None = None
    mode: str = "constraint"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    r_min: float | None = None
    max_step: float = np.inf
    tau_final: float = 1.0
    output_times: tuple | None = None
    method: str = "DOP853"

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if (self.mu1_init is None) == (self.mass_hat is None):
            raise DomainError("exactly one of mu1_init and mass_hat must be given")
        if self.mode == "paper_ode" and self.mu1_init is None and self.mass_hat is None:
            raise DomainError("paper_ode mode needs an initial mu1")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("tolerances must be positive")
        if not self.radius_floor > 0:
            raise DomainError("r_min must be positive")
        if not self.tau_final >= 0:
            raise DomainError("tau_final must be nonnegative")
        r = np.concatenate((np.asarray(self.spheres, float).ravel(), np.asarray(self.hoops, float).ravel()))
        if r.size and (not np.all(np.isfinite(r)) or np.any(r <= self.radius_floor)):
            raise DomainError(f"initial radii must exceed r_min = {self.radius_floor}")
        if self.output_times is not None:
            t = np.asarray(self.output_times, float)
            if t.size and (np.any(np.diff(t) < 0) or t[0] < 0 or t[-1] > self.tau_final):
                raise DomainError("output_times must be sorted and lie in [0, tau_final]")

    @property
    def radius_floor(self) -> float:
        return 10.0 * self.model.epsilon if self.r_min is None else float(self.r_min)

    def times(self) -> np.ndarray:
        if self.output_times is None:
            return np.linspace(0.0, self.tau_final, 101)
        return np.asarray(self.output_times, dtype=float)

    @classmethod
    def from_dict(cls, d: dict) -> "DynamicsConfig":
        """Build from the JSON config schema (see the README)."""
        try:
            well = WellParams(float(d["well"]["xi"]))
            m = d.get("model", {})
            model = ModelParams(epsilon=float(m.get("epsilon", 0.05)), eta1=float(m.get("eta1", 0.0)),
                                eta2=float(m.get("eta2", 0.0)),
                                domain_volume=float(m.get("domain_volume", 1.0)))
            it = d.get("integrator", {})
            kw = dict(
                spheres=tuple(float(x) for x in d.get("spheres", [])),
                hoops=tuple(float(x) for x in d.get("hoops", [])),
                mu1_init=None if d.get("mu1_init") is None else float(d["mu1_init"]),
                mass_hat=None if d.get("mass_hat") is None else float(d["mass_hat"]),
                mode=d.get("mode", "constraint"),
                rel_tol=float(it.get("rel_tol", 1e-10)), abs_tol=float(it.get("abs_tol", 1e-12)),
                r_min=None if it.get("r_min") is None else float(it["r_min"]),
                max_step=float(it.get("max_step", np.inf)),
                tau_final=float(d.get("tau_final", 1.0)),
                output_times=None if d.get("output_times") is None
                else tuple(float(x) for x in d["output_times"]),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise DomainError(f"malformed dynamics config: {exc!r}") from exc
        unknown = set(d) - {"well", "model", "spheres", "hoops", "mu1_init", "mass_hat", "mode",
                            "integrator", "tau_final", "output_times", "xi_grid"}
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(well, model, **kw)


class _Consts:
    """Scalars shared by the right-hand side and the mass relation."""

    def __init__(self, cfg: DynamicsConfig, bc: BilayerCoefficients, fc: FilamentCoefficients):
        mp = cfg.model
        self.a2v = cfg.well.alpha_minus**2 / mp.domain_volume
        self.mb, self.mf, self.eps = bc.m_b, fc.m_f, mp.epsilon
        self.nub, self.nuf = bc.nu_b, fc.nu_f
        self.mub, self.muf = bc.mu_b_star(mp), fc.mu_f_star(mp)
        self.vol = mp.domain_volume
        self.alpha2 = cfg.well.alpha_minus**2


def _morph_mass(c: _Consts, R, r):
    return c.mb * 4.0 * np.pi * np.sum(np.square(R)) + 2.0 * np.pi * c.mf * c.eps * 2.0 * np.pi * np.sum(r)


def mass_total(state: HybridState, cfg: DynamicsConfig, bc, fc) -> float:
    """``M_hat = mu1 |Omega|/alpha^2 + m_b sum 4 pi R^2 + 2 pi m_f eps sum 2 pi r``.

    Mass frozen in members removed at ``r_min`` (``state.residual_mass``) is
    included, so the total is conserved across extinctions.
    """
    c = _Consts(cfg, bc, fc)
    return state.mu1 / c.a2v + _morph_mass(c, state.sphere_radii, state.hoop_radii) + state.residual_mass


def mu1_from_mass(state: HybridState, cfg: DynamicsConfig, bc, fc, M_hat: float) -> float:
    """Far-field chemical potential from the leading-order mass constraint."""
    c = _Consts(cfg, bc, fc)
    return c.a2v * (M_hat - _morph_mass(c, state.sphere_radii, state.hoop_radii) - state.residual_mass)


def rhs(state: HybridState, cfg: DynamicsConfig, bc, fc):
    """Time derivatives ``(dR, dr, dmu1)`` of a state with positive radii.

    In ``constraint`` mode ``dmu1`` is the derivative implied by the
    algebraic relation (the state's ``mu1`` is taken as given).
    """
    R, r = state.sphere_radii, state.hoop_radii
    if np.any(R <= 0) or np.any(r <= 0):
        raise DomainError("radii must be positive; extinctions are handled by event detection")
    c = _Consts(cfg, bc, fc)
    gb, gf = c.nub * (state.mu1 - c.mub), c.nuf * (state.mu1 - c.muf)
    dR = 2.0 * gb / R
    dr = gf / r
    if cfg.mode == "paper_ode":
        dmu = -c.a2v * (16.0 * np.pi * gb * R.size + 2.0 * c.eps * np.pi * gf * np.sum(1.0 / r))
    else:
        dmu = -c.a2v * (c.mb * 8.0 * np.pi * np.sum(R * dR) + 4.0 * np.pi**2 * c.mf * c.eps * np.sum(dr))
    return dR, dr, float(dmu)


@dataclass
class Trajectory:
    times: np.ndarray
    mu1: np.ndarray
    mass_hat: np.ndarray
    sphere_radii: np.ndarray  # (n_times, N_b), 0 after extinction
    hoop_radii: np.ndarray
    n_spheres: np.ndarray
    n_hoops: np.ndarray
    events: list
    final: HybridState
    mode: str
    stationary: bool = False

    @property
    def mass_drift(self) -> float:
        return float(np.max(np.abs(self.mass_hat - self.mass_hat[0]))) if self.mass_hat.size else 0.0


def _initial_state(cfg, c: _Consts):
    R = np.asarray(cfg.spheres, float)
    r = np.asarray(cfg.hoops, float)
    st = HybridState(0.0, R, r, 0.0)
    if cfg.mu1_init is not None:
        st.mu1 = float(cfg.mu1_init)
        M = st.mu1 / c.a2v + _morph_mass(c, R, r)
    else:
        M = float(cfg.mass_hat)
        st.mu1 = c.a2v * (M - _morph_mass(c, R, r))
    return st, M


def evolve(cfg: DynamicsConfig, bc: BilayerCoefficients, fc: FilamentCoefficients,
           stationary_tol: float = 1e-9) -> Trajectory:
    """Integrate the reduced competition with extinction events.

    Every sphere obeys the same ``d(R^2)/dtau`` and every hoop the same
    ``d(r^2)/dtau``, so the integrated state is the pair of common shifts
    ``(D_b, D_f)`` of the squared radii since the last restart (plus ``mu1``
    in ``paper_ode`` mode). Error control then acts on the small shifts
    rather than on the radii themselves, and in ``constraint`` mode ``mu1``
    follows from them without cancellation::

        mu1 = mu1_restart - a (4 pi m_b N_b D_b + 4 pi^2 m_f eps sum(sqrt(q0 + D_f) - sqrt(q0)))

    Uses an embedded Runge-Kutta pair (``cfg.method``, default DOP853) with
    dense output; an extinction is located as a root of ``R^2 - r_min^2`` on
    the dense interpolant. Members removed at the same event time are
    processed in index order.

    Raises
    ------
    DynamicsError
        On integrator failure (for example step-size underflow), carrying
        the last accepted state.
    """
    c = _Consts(cfg, bc, fc)
    state, M_hat = _initial_state(cfg, c)
    rmin2 = cfg.radius_floor**2
    times = cfg.times()
    ns0, nh0 = state.n_spheres, state.n_hoops
    out_mu, out_mass, out_R, out_r, out_ns, out_nh = [], [], [], [], [], []
    events = []
    ode_mode = cfg.mode == "paper_ode"
    kb, kf = 4.0 * np.pi * c.mb, 4.0 * np.pi**2 * c.mf * c.eps

    def hoop_gain(q0, d):
        # sum(sqrt(q0 + d) - sqrt(q0)) without cancellation
        return float(np.sum(d / (np.sqrt(np.maximum(q0 + d, 0.0)) + np.sqrt(q0)))) if q0.size else 0.0

    t = 0.0
    sids, hids = state.sphere_ids.copy(), state.hoop_ids.copy()
    s0, q0 = state.sphere_radii**2, state.hoop_radii**2
    mu0 = state.mu1
    residue = 0.0

    def mu_of(y):
        if ode_mode:
            return y[2]
        return mu0 - c.a2v * (kb * s0.size * y[0] + kf * hoop_gain(q0, y[1]))

    def record(tt, y):
        mu = mu_of(y)
        R_full, r_full = np.zeros(ns0), np.zeros(nh0)
        R_full[sids] = np.sqrt(np.maximum(s0 + y[0], 0.0))
        r_full[hids] = np.sqrt(np.maximum(q0 + y[1], 0.0))
        out_mu.append(mu)
        out_mass.append(mu / c.a2v + _morph_mass(c, R_full, r_full) + residue)
        out_R.append(R_full)
        out_r.append(r_full)
        out_ns.append(len(sids))
        out_nh.append(len(hids))

    y = np.array([0.0, 0.0, mu0] if ode_mode else [0.0, 0.0])
    k_out = 0
    while True:
        nb, nh = sids.size, hids.size

        def f(tau, y, nb=nb, nh=nh, q0=q0):
            mu = mu_of(y)
            gb, gf = c.nub * (mu - c.mub), c.nuf * (mu - c.muf)
            ds = 4.0 * gb if nb else 0.0
            dq = 2.0 * gf if nh else 0.0
            if ode_mode:
                inv_r = np.sum(1.0 / np.sqrt(q0 + y[1])) if nh else 0.0
                dmu = -c.a2v * (16.0 * np.pi * gb * nb + 2.0 * c.eps * np.pi * gf * inv_r)
                return np.array([ds, dq, dmu])
            return np.array([ds, dq])

        evs = []
        for i in range(nb + nh):
            if i < nb:
                def ev(tau, y, base=s0[i]):
                    return base + y[0] - rmin2
            else:
                def ev(tau, y, base=q0[i - nb]):
                    return base + y[1] - rmin2
            ev.terminal, ev.direction = True, -1.0
            evs.append(ev)
        if t >= cfg.tau_final or nb + nh == 0:
            # nothing left to integrate: mu1 and radii are constant
            for tt in times[k_out:]:
                record(tt, y)
            k_out = times.size
            break
        # integrate up to the next output time so that outputs are step
        # endpoints rather than samples of the dense interpolant
        while k_out < times.size and times[k_out] <= t:
            record(times[k_out], y)
            k_out += 1
        t_next = times[k_out] if k_out < times.size else cfg.tau_final
        sol = solve_ivp(f, (t, t_next), y, method=cfg.method, rtol=cfg.rel_tol,
                        atol=cfg.abs_tol, events=evs or None, max_step=cfg.max_step)
        if sol.status < 0:
            st = HybridState(t, np.sqrt(s0 + y[0]), np.sqrt(q0 + y[1]), mu_of(y),
                             sphere_ids=sids, hoop_ids=hids, residual_mass=residue)
            raise DynamicsError(f"integration failed at tau={t:.6g}: {sol.message}", state=st)
        if sol.status != 1:
            y = sol.y[:, -1].copy()
            t = t_next
            if k_out < times.size:
                record(times[k_out], y)
                k_out += 1
            if t >= cfg.tau_final:
                break
            continue
        t = min(float(te[0]) for te in sol.t_events if te.size)
        y = sol.y_events[[i for i, te in enumerate(sol.t_events) if te.size and te[0] == t][0]][0].copy()
        # restart: fold the shifts into the base radii
        mu0 = mu_of(y)
        s, q = s0 + y[0], q0 + y[1]
        hit = {i for i, te in enumerate(sol.t_events) if te.size}
        # simultaneous extinctions: every member at or below the floor at t
        hit |= {i for i in range(nb) if s[i] <= rmin2 * (1 + 1e-12)}
        hit |= {nb + j for j in range(nh) if q[j] <= rmin2 * (1 + 1e-12)}
        for i in sorted(hit):
            if i < nb:
                events.append({"family": "sphere", "index": int(sids[i]), "tau": float(t)})
                residue += kb * s[i]
            else:
                events.append({"family": "hoop", "index": int(hids[i - nb]), "tau": float(t)})
                residue += kf * np.sqrt(max(q[i - nb], 0.0))
        keep_s = [i for i in range(nb) if i not in hit]
        keep_h = [j for j in range(nh) if nb + j not in hit]
        s0, q0 = s[keep_s], q[keep_h]
        sids, hids = sids[keep_s], hids[keep_h]
        y = np.array([0.0, 0.0, mu0] if ode_mode else [0.0, 0.0])
        log.info("extinction at tau=%.10g: %s", t, [e for e in events if e["tau"] == t])
        # mu1 stays continuous: the removed mass is kept in the residue

    nb, nh = sids.size, hids.size
    mu_final = mu_of(y)
    final = HybridState(t, np.sqrt(s0 + y[0]), np.sqrt(q0 + y[1]), mu_final,
                        extinct_spheres=[(e["index"], e["tau"]) for e in events if e["family"] == "sphere"],
                        extinct_hoops=[(e["index"], e["tau"]) for e in events if e["family"] == "hoop"],
                        sphere_ids=sids, hoop_ids=hids, residual_mass=residue)
    dR, dr, dmu = rhs(final, cfg, bc, fc) if (nb + nh) else (np.zeros(0), np.zeros(0), 0.0)
    speed = max([abs(dmu)] + list(np.abs(dR)) + list(np.abs(dr)))
    traj = Trajectory(times[:len(out_mu)], np.array(out_mu), np.array(out_mass),
                      np.array(out_R).reshape(len(out_mu), ns0), np.array(out_r).reshape(len(out_mu), nh0),
                      np.array(out_ns), np.array(out_nh), events, final, cfg.mode,
                      stationary=bool(speed < stationary_tol))
    if traj.stationary and nb and nh and abs(c.mub - c.muf) > stationary_tol:
        raise DynamicsError("stationary state with both families present", state=final)
    return traj
