"""Pearling and fingering thresholds in the (eta_d, mu1) plane.

The four stability conditions are

    bilayer pearling    mu1 S_b + eta_d lambda_b0 ||psi_b0||^2                 < 0
    filament pearling   mu1 S_f + eta_d (||psi_f00'||^2 + lambda_f00 ||psi_f00||^2) < 0
    bilayer fingering   mu1 - mu_b*  < 0
    filament fingering  mu1 - mu_f*  < 0

Each expression is classified stable (``< -tol``), unstable (``> tol``) or
marginal; a point is admissible when all four are stable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import BilayerCoefficients, FilamentCoefficients, ModelParams
from .errors import DomainError

__all__ = [
    "STABLE",
    "UNSTABLE",
    "MARGINAL",
    "RegionFlags",
    "PearlingLine",
    "FingeringLine",
    "ThresholdLines",
    "DiagramTable",
    "InvariantInterval",
    "expressions",
    "classify",
    "threshold_lines",
    "diagram",
    "invariant_interval",
    "parse_range",
    "pearling_ordering",
]

STABLE, UNSTABLE, MARGINAL = "S", "U", "M"
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class RegionFlags:
    bilayer_pearling: str
    filament_pearling: str
    bilayer_fingering: str
    filament_fingering: str

    @property
    def admissible(self) -> bool:
        return all(f == STABLE for f in (self.bilayer_pearling, self.filament_pearling,
                                         self.bilayer_fingering, self.filament_fingering))


def _flag(e, tol, degenerate=False):
    e = np.asarray(e, dtype=float)
    out = np.where(e < -tol, STABLE, np.where(e > tol, UNSTABLE, MARGINAL))
    if np.ndim(degenerate) or degenerate:
        out = np.where(degenerate, MARGINAL, out)
    return out


def _pearling_weights(bc: BilayerCoefficients, fc: FilamentCoefficients):
    qb = bc.lambda_b0 * bc.psi_b0_norm_sq
    qf = fc.dpsi_f00_norm_sq + fc.lambda_f00 * fc.psi_f00_norm_sq
    return qb, qf


def expressions(bc, fc, eta_d, mu1, mu_b_star, mu_f_star):
    """The four defining expressions (negative means stable)."""
    qb, qf = _pearling_weights(bc, fc)
    mu1 = np.asarray(mu1, dtype=float)
    eta_d = np.asarray(eta_d, dtype=float)
    return (mu1 * bc.S_b + eta_d * qb, mu1 * fc.S_f + eta_d * qf,
            mu1 - mu_b_star, mu1 - mu_f_star)


def classify(bc: BilayerCoefficients, fc: FilamentCoefficients, mp: ModelParams, mu1: float,
             tol: float = DEFAULT_TOL) -> RegionFlags:
    """Stability flags of one point; a zero shape factor makes its pearling flag marginal."""
    e = expressions(bc, fc, mp.eta_d, mu1, bc.mu_b_star(mp), fc.mu_f_star(mp))
    f = [str(_flag(e[0], tol, bc.S_b == 0)), str(_flag(e[1], tol, fc.S_f == 0)),
         str(_flag(e[2], tol)), str(_flag(e[3], tol))]
    return RegionFlags(*f)


@dataclass(frozen=True)
class PearlingLine:
    """Boundary ``mu1 sign(S) = -slope * eta_d``; ``slope = q / |S|``."""

    sign_S: int
    slope: float
    degenerate: bool = False

    def boundary(self, eta_d):
        """``mu1`` on the threshold (nan when ``S = 0``)."""
        if self.degenerate:
            return np.full(np.shape(eta_d), np.nan)
        return -self.sign_S * self.slope * np.asarray(eta_d, dtype=float)


@dataclass(frozen=True)
class FingeringLine:
    """``mu*(eta_d) = intercept + slope * eta_d`` at fixed ``eta1``."""

    intercept: float
    slope: float

    def boundary(self, eta_d):
        return self.intercept + self.slope * np.asarray(eta_d, dtype=float)


@dataclass(frozen=True)
class ThresholdLines:
    pearling_bilayer: PearlingLine
    pearling_filament: PearlingLine
    fingering_bilayer: FingeringLine
    fingering_filament: FingeringLine


def _pline(q, S):
    if S == 0:
        return PearlingLine(0, float("inf"), degenerate=True)
    return PearlingLine(int(np.sign(S)), float(q / abs(S)))


def threshold_lines(bc: BilayerCoefficients, fc: FilamentCoefficients, eta1: float) -> ThresholdLines:
    """Closed-form threshold lines on the fixed-``eta1`` slice.

    With ``eta2 = eta1 - eta_d``, ``mu_b*(eta_d) = -(2 eta1 - eta_d) sigma_b / (2 m_b)``
    and ``mu_f* = eta1 sigma_f / (2 m_f)`` is independent of ``eta_d``.
    """
    qb, qf = _pearling_weights(bc, fc)
    s = bc.sigma_b / (2.0 * bc.m_b)
    return ThresholdLines(
        pearling_bilayer=_pline(qb, bc.S_b),
        pearling_filament=_pline(qf, fc.S_f),
        fingering_bilayer=FingeringLine(-2.0 * eta1 * s, s),
        fingering_filament=FingeringLine(eta1 * fc.sigma_f / (2.0 * fc.m_f), 0.0),
    )


def parse_range(spec: str) -> np.ndarray:
    """``"a:b:n"`` to ``n`` equispaced values from ``a`` to ``b`` inclusive."""
    try:
        a, b, n = spec.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError as exc:
        raise DomainError(f"range must look like a:b:n, got {spec!r}") from exc
    if n < 1:
        raise DomainError(f"range needs n >= 1, got {spec!r}")
    return np.linspace(a, b, n) if n > 1 else np.array([a])


@dataclass
class DiagramTable:
    """Row-major (``eta_d`` outer, ``mu1`` inner) classification grid."""

    eta_d: np.ndarray
    mu1: np.ndarray
    flags: dict  # name -> array of "S"/"U"/"M"
    distances: dict  # name -> signed expression values
    admissible: np.ndarray

    COLUMNS = ("bp", "fp", "bf", "ff")

    def __len__(self):
        return self.eta_d.size

    @property
    def admissible_count(self) -> int:
        return int(np.sum(self.admissible))

    def rows(self):
        for i in range(len(self)):
            yield (self.eta_d[i], self.mu1[i], *(self.flags[c][i] for c in self.COLUMNS),
                   bool(self.admissible[i]), *(self.distances[c][i] for c in self.COLUMNS))


def diagram(bc: BilayerCoefficients, fc: FilamentCoefficients, eta1: float, eta_d_grid, mu1_grid,
            tol: float = DEFAULT_TOL) -> DiagramTable:
    """Classify every point of ``eta_d_grid x mu1_grid`` at fixed ``eta1``.

    The ``d_*`` distances are the defining expressions themselves, so a flag
    is stable exactly when its distance is below ``-tol``.
    """
    ed = np.asarray(eta_d_grid, dtype=float).ravel()
    mu = np.asarray(mu1_grid, dtype=float).ravel()
    if ed.size == 0 or mu.size == 0:
        raise DomainError("diagram grids must be nonempty")
    E, M = np.meshgrid(ed, mu, indexing="ij")
    E, M = E.ravel(), M.ravel()
    lines = threshold_lines(bc, fc, eta1)
    mub = lines.fingering_bilayer.boundary(E)
    muf = lines.fingering_filament.boundary(E)
    e = expressions(bc, fc, E, M, mub, muf)
    degen = (bc.S_b == 0, fc.S_f == 0, False, False)
    names = DiagramTable.COLUMNS
    flags = {n: _flag(x, tol, d) for n, x, d in zip(names, e, degen)}
    dist = {n: np.asarray(x, dtype=float) for n, x in zip(names, e)}
    adm = np.logical_and.reduce([flags[n] == STABLE for n in names])
    return DiagramTable(E, M, flags, dist, adm)


@dataclass(frozen=True)
class InvariantInterval:
    mu_lo: float
    mu_hi: float
    favored: str  # "bilayer", "filament" or "coexistence"


def invariant_interval(bc: BilayerCoefficients, fc: FilamentCoefficients, mp: ModelParams,
                       tol: float = 1e-12) -> InvariantInterval:
    """Attracting interval between the two equilibrium chemical potentials.

    The morphology with the smaller ``mu*`` is dynamically favored.
    """
    mb, mf = bc.mu_b_star(mp), fc.mu_f_star(mp)
    if abs(mb - mf) <= tol * max(1.0, abs(mb), abs(mf)):
        fav = "coexistence"
    else:
        fav = "bilayer" if mb < mf else "filament"
    return InvariantInterval(min(mb, mf), max(mb, mf), fav)


def pearling_ordering(table: DiagramTable, positive_eta_d=True):
    """Which pearling-unstable region lies higher along ``mu1``.

    For each ``eta_d`` column (restricted to ``eta_d > 0`` by default) where
    both the bilayer- and filament-pearling-unstable sets are nonempty, the
    mean ``mu1`` of the two sets is compared. Returns ``+1`` when the
    filament set lies above the bilayer set in every such column, ``-1``
    when it lies below in every column, ``0`` otherwise (mixed or no
    columns), together with the per-column signs. Columns where the two
    sets coincide on the grid (sign 0) do not discriminate and are
    ignored for the overall verdict.
    """
    cols = {}
    for ed in np.unique(table.eta_d):
        if positive_eta_d and not ed > 0:
            continue
        sel = table.eta_d == ed
        mu = table.mu1[sel]
        ub = mu[table.flags["bp"][sel] == UNSTABLE]
        uf = mu[table.flags["fp"][sel] == UNSTABLE]
        if ub.size and uf.size:
            cols[float(ed)] = int(np.sign(uf.mean() - ub.mean()))
    vals = set(cols.values()) - {0}
    overall = vals.pop() if len(vals) == 1 else 0
    return overall, cols
