"""Derived scalars of the bilayer and filament profiles.

Bilayer (line, full real axis)::

    m_b = int phi_hat dz,  B_1 = int phi_hat^2 dz,  sigma_b = int (phi')^2 dz
    nu_b = m_b / B_1,      mu_b* = -(eta1 + eta2) sigma_b / (2 m_b)
    S_b = int Phi_b1 W'''(phi_b) psi_b0^2 dz

Filament (radial, ``R dR`` measure)::

    m_f = int phi_hat R dR,  sigma_f = int (phi')^2 R dR,  S_2 = int phi_hat^2 R dR
    nu_f = 2 m_f / S_2,      mu_f* = eta1 sigma_f / (2 m_f)
    S_f = 2 pi int Phi_f1 W'''(phi_f) psi_f00^2 R dR

with ``phi_hat = phi - b_-``. Norms of the ground states use the same
measures (no angular factor ``2 pi`` for the filament).
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError, FCHError
from .mesh import GridSpec
from .operators import (
    assemble_bilayer_operator,
    assemble_filament_operator,
    check_single_positive_eigenvalue,
    ground_state,
    solve_phi,
)
from .profiles import SolverOptions, solve_bilayer, solve_filament
from .well import WellParams, well_derivative

__all__ = [
    "ModelParams",
    "BilayerCoefficients",
    "FilamentCoefficients",
    "bilayer_coefficients",
    "filament_coefficients",
    "shape_factor_scan",
    "CoefficientCache",
    "default_cache",
    "cached_coefficients",
    "CACHE_ENV",
]

log = logging.getLogger(__name__)

CACHE_ENV = "FCH_CACHE_DIR"
DEFAULT_CACHE_DIR = ".fch-cache"


@dataclass(frozen=True)
class ModelParams:
    """Model constants of the reduced flow.

    ``eta_d`` is stored redundantly and must equal ``eta1 - eta2``; it is
    filled in when omitted.
    """

    epsilon: float = 0.05
    eta1: float = 0.0
    eta2: float = 0.0
    domain_volume: float = 1.0
    eta_d: float | None = None

    def __post_init__(self):
        d = self.eta1 - self.eta2
        if self.eta_d is None:
            object.__setattr__(self, "eta_d", d)
        elif abs(self.eta_d - d) > 1e-15 * max(1.0, abs(self.eta1), abs(self.eta2)):
            raise DomainError(f"eta_d = {self.eta_d} is inconsistent with eta1 - eta2 = {d}")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if not self.domain_volume > 0:
            raise DomainError("domain_volume must be positive")

    @classmethod
    def from_eta_d(cls, eta1, eta_d, **kw) -> "ModelParams":
        """Fixed-``eta1`` slice parameterization: ``eta2 = eta1 - eta_d``."""
        return cls(eta1=eta1, eta2=eta1 - eta_d, eta_d=eta_d, **kw)


class _Record:
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class BilayerCoefficients(_Record):
    m_b: float
    B_1: float
    sigma_b: float
    nu_b: float
    lambda_b0: float
    psi_b0_norm_sq: float
    S_b: float

    def mu_b_star(self, mp: ModelParams) -> float:
        return -0.5 * (mp.eta1 + mp.eta2) * self.sigma_b / self.m_b


@dataclass(frozen=True)
class FilamentCoefficients(_Record):
    m_f: float
    sigma_f: float
    S_2: float
    nu_f: float
    lambda_f00: float
    psi_f00_norm_sq: float
    dpsi_f00_norm_sq: float
    S_f: float

    def mu_f_star(self, mp: ModelParams) -> float:
        return mp.eta1 * self.sigma_f / (2.0 * self.m_f)


def _grid(g: GridSpec | None, geometry: str, w: WellParams) -> GridSpec:
    if g is None:
        return GridSpec(max(20.0, 12.0 / np.sqrt(w.alpha_minus)), 2001, geometry)
    if g.geometry != geometry:
        g = GridSpec(g.half_length, g.n_points, geometry, g.degree)
    return g


def bilayer_coefficients(w: WellParams, g: GridSpec | None = None, opts: SolverOptions | None = None,
                         psi_scale: float = 1.0) -> BilayerCoefficients:
    """Quadrature of the bilayer constants on the spectral-element grid.

    ``psi_scale`` multiplies the unit-norm ground state before the pearling
    quadratures (``S_b`` and ``||psi||^2``); thresholds built from them must
    not depend on it.
    """
    p = solve_bilayer(w, _grid(g, "line", w), opts)
    mesh = p.mesh
    ph = p.excess
    m_b = 2.0 * mesh.integrate(ph)
    B_1 = 2.0 * mesh.integrate(ph * ph)
    sigma_b = 2.0 * mesh.energy(ph)
    A = assemble_bilayer_operator(p)
    gs = ground_state(A)
    psi = psi_scale * gs.psi
    phi1 = solve_phi(A, 1)
    full = A.mesh
    phi_full = np.concatenate((p.values[::-1], p.values[1:]))
    S_b = full.integrate(phi1 * well_derivative(phi_full, 3, w) * psi**2)
    return BilayerCoefficients(
        m_b=m_b, B_1=B_1, sigma_b=sigma_b, nu_b=m_b / B_1, lambda_b0=gs.lam,
        psi_b0_norm_sq=full.integrate(psi**2), S_b=S_b)


def filament_coefficients(w: WellParams, g: GridSpec | None = None, opts: SolverOptions | None = None,
                          psi_scale: float = 1.0) -> FilamentCoefficients:
    """Quadrature of the filament constants in the ``R dR`` measure.

    Raises
    ------
    AssumptionViolation
        If ``L_f0`` does not have exactly one positive eigenvalue and a
        trivial kernel.
    """
    p = solve_filament(w, _grid(g, "radial", w), opts)
    mesh = p.mesh
    ph = p.excess
    m_f = mesh.integrate(ph)
    S_2 = mesh.integrate(ph * ph)
    sigma_f = mesh.energy(ph)
    A = assemble_filament_operator(p, 0)
    check_single_positive_eigenvalue(A)
    gs = ground_state(A)
    psi = psi_scale * gs.psi
    phi1 = solve_phi(A, 1)
    S_f = 2.0 * np.pi * mesh.integrate(phi1 * well_derivative(p.values, 3, w) * psi**2)
    if not m_f > 0:
        msg = f"filament mass m_f = {m_f:.6g} is not positive; downstream inequalities flip"
        log.warning(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return FilamentCoefficients(
        m_f=m_f, sigma_f=sigma_f, S_2=S_2, nu_f=2.0 * m_f / S_2, lambda_f00=gs.lam,
        psi_f00_norm_sq=mesh.integrate(psi**2), dpsi_f00_norm_sq=mesh.energy(psi), S_f=S_f)


# ---------------------------------------------------------------- cache

_WRITE_LOCK = threading.Lock()


def _key(morphology, w, g, opts) -> dict:
    return {"morphology": morphology, "xi": repr(float(w.xi)), "L": repr(float(g.half_length)),
            "N": int(g.n_points), "degree": int(g.degree), "tol": repr(float(opts.tol)),
            "version": __version__}


class CoefficientCache:
    """JSON-file cache of coefficient records.

    One file per key ``(morphology, xi, L, N, degree, tol, code version)``.
    Writes go through a process-wide lock and an atomic rename, so readers
    never observe a partial file. Python's float repr round-trips exactly,
    so reloaded records are bit-identical.
    """

    def __init__(self, directory=None):
        self.directory = Path(directory if directory is not None
                              else os.environ.get(CACHE_ENV, DEFAULT_CACHE_DIR))
        self.hits = 0
        self.misses = 0

    def path(self, key: dict) -> Path:
        h = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:20]
        return self.directory / f"{key['morphology']}-{h}.json"

    def get(self, key: dict):
        path = self.path(key)
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, ValueError):
            return None
        if doc.get("key") != key:
            return None
        return doc["value"]

    def put(self, key: dict, value: dict):
        path = self.path(key)
        with _WRITE_LOCK:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
            with os.fdopen(fd, "w") as fh:
                json.dump({"key": key, "value": value}, fh, sort_keys=True, indent=1)
            os.replace(tmp, path)

    def clear(self):
        if self.directory.is_dir():
            for f in self.directory.glob("*.json"):
                f.unlink()


def default_cache() -> CoefficientCache:
    return CoefficientCache()


def cached_coefficients(w: WellParams, g: GridSpec | None = None, opts: SolverOptions | None = None,
                        cache: CoefficientCache | None = None, which=("bilayer", "filament")):
    """Bilayer and/or filament coefficients, read from or written to ``cache``.

    Returns a dict keyed by morphology. ``cache=None`` disables caching.
    """
    opts = opts or SolverOptions()
    out = {}
    for morph in which:
        geo = "line" if morph == "bilayer" else "radial"
        gg = _grid(g, geo, w)
        cls = BilayerCoefficients if morph == "bilayer" else FilamentCoefficients
        fn = bilayer_coefficients if morph == "bilayer" else filament_coefficients
        key = _key(morph, w, gg, opts)
        rec = cache.get(key) if cache is not None else None
        if rec is not None:
            cache.hits += 1
            out[morph] = cls.from_dict(rec)
            continue
        val = fn(w, gg, opts)
        if cache is not None:
            cache.misses += 1
            cache.put(key, val.to_dict())
        out[morph] = val
    return out


# ---------------------------------------------------------------- scan

def _scan_one(args):
    xi, g, opts, cache_dir = args
    cache = CoefficientCache(cache_dir) if cache_dir is not None else None
    row = {"xi": xi, "S_b": float("nan"), "S_f": float("nan"), "errors": {}}
    try:
        w = WellParams(xi)
    except FCHError as exc:
        row["errors"]["well"] = str(exc)
        return row, 0
    hits = 0
    for morph, name in (("bilayer", "S_b"), ("filament", "S_f")):
        try:
            before = cache.hits if cache else 0
            rec = cached_coefficients(w, g, opts, cache, which=(morph,))[morph]
            hits += (cache.hits - before) if cache else 0
            row[name] = rec.S_b if morph == "bilayer" else rec.S_f
        except FCHError as exc:
            row["errors"][morph] = f"{type(exc).__name__}: {exc}"
    return row, hits


def shape_factor_scan(xis, g: GridSpec | None = None, opts: SolverOptions | None = None,
                      cache: CoefficientCache | None = None, jobs: int = 1):
    """Shape factors over a monotone list of tilts with bracketed sign changes.

    Per-tilt failures are recorded in the row's ``errors`` and the scan
    continues. Returns ``(rows, brackets, cache_hits)`` where ``brackets``
    maps ``"S_b"``/``"S_f"`` to lists of ``(xi_i, xi_{i+1})`` pairs.
    """
    xis = [float(x) for x in xis]
    if any(b <= a for a, b in zip(xis, xis[1:])) and any(b >= a for a, b in zip(xis, xis[1:])):
        raise DomainError("tilt list must be monotone")
    opts = opts or SolverOptions()
    cache_dir = str(cache.directory) if cache is not None else None
    tasks = [(x, g, opts, cache_dir) for x in xis]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_scan_one, tasks))
    else:
        results = [_scan_one(t) for t in tasks]
    rows = [r for r, _ in results]
    hits = sum(h for _, h in results)
    if cache is not None:
        cache.hits += hits
    brackets = {"S_b": sign_brackets(rows, "S_b"), "S_f": sign_brackets(rows, "S_f")}
    return rows, brackets, hits


def sign_brackets(rows, name):
    """Consecutive pairs of tilts across which ``name`` changes sign."""
    out = []
    for a, b in zip(rows, rows[1:]):
        va, vb = a[name], b[name]
        if np.isfinite(va) and np.isfinite(vb) and np.sign(va) != np.sign(vb):
            out.append((a["xi"], b["xi"]))
    return out
