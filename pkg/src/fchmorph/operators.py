"""Linearizations about the bilayer and filament profiles.

    L_b0  = d^2/dz^2 - W''(phi_b)                                on R
    L_fm  = d^2/dR^2 + (1/R) d/dR - m^2/R^2 - W''(phi_f)         on R_+

Each operator is stored as a symmetric bilinear form ``A_form`` together with
the lumped measure ``w``; the operator itself is ``diag(1/w) A_form`` and is
therefore exactly self-adjoint in the ``w``-weighted inner product. The radial
origin node carries zero weight: for ``m = 0`` it is eliminated by static
condensation (regularity ``f'(0) = 0`` is the natural condition), and for
``m >= 1`` the Dirichlet condition ``f(0) = 0`` removes it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eig_banded, solve_banded
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import AssumptionViolation, ConvergenceError, DomainError, SingularOperatorError
from .mesh import Mesh, to_banded
from .profiles import EquilibriumProfile, robin_coefficient
from .well import well_derivative

__all__ = [
    "DiscreteOperator",
    "EigenPair",
    "assemble_bilayer_operator",
    "assemble_filament_operator",
    "ground_state",
    "spectrum",
    "nearest_zero",
    "solve_phi",
    "check_single_positive_eigenvalue",
    "cosine_similarity",
    "phi_residual",
]


@dataclass
class EigenPair:
    lam: float
    psi: np.ndarray  # on the operator's coordinate nodes, unit norm
    norm_sq: float
    dpsi_norm_sq: float


class DiscreteOperator:
    """Weighted-symmetric discretization of a linearized operator.

    Attributes
    ----------
    form : sparse matrix
        Symmetric bilinear form on the active nodes.
    measure_weights : ndarray
        Positive lumped weights of the active nodes.
    active : ndarray of int
        Indices of the active nodes in ``coords``.
    coords : ndarray
        All nodes (mirrored line for the bilayer, ``[0, L]`` for the filament).
    """

    def __init__(self, form, weights, active, coords, mesh, morphology, m, profile,
                 eliminated=None):
        self.form = sp.csr_matrix(form)
        self.measure_weights = np.asarray(weights, dtype=float)
        self.active = np.asarray(active)
        self.coords = coords
        self.mesh = mesh
        self.morphology = morphology
        self.m = int(m)
        self.profile = profile
        self._elim = eliminated  # (row vector, pivot) for the condensed origin

    @property
    def size(self) -> int:
        return self.active.size

    @property
    def matrix(self):
        """The operator ``diag(1/w) A_form`` on the active nodes."""
        return sp.diags(1.0 / self.measure_weights) @ self.form

    def apply(self, f) -> np.ndarray:
        return (self.form @ f) / self.measure_weights

    def inner(self, f, g) -> float:
        return float(np.sum(self.measure_weights * f * g))

    def restrict(self, f_full) -> np.ndarray:
        return np.asarray(f_full, dtype=float)[self.active]

    def extend(self, f) -> np.ndarray:
        """Values on all ``coords`` nodes, reconstructing eliminated ones."""
        out = np.zeros(self.coords.size)
        out[self.active] = f
        if self._elim is not None:
            row, pivot = self._elim
            out[0] = -(row @ f) / pivot
        return out


def _potential(p: EquilibriumProfile):
    return well_derivative(p.values, 2, p.well)


def _profile_potential(A) -> np.ndarray:
    return well_derivative(_profile_full(A), 2, A.profile.well)


def assemble_bilayer_operator(p: EquilibriumProfile) -> DiscreteOperator:
    """``L_b0`` on the full mirrored line ``[-L, L]``."""
    if p.morphology != "bilayer":
        raise DomainError("assemble_bilayer_operator needs a bilayer profile")
    full = p.mesh.mirrored()
    phi = np.concatenate((p.values[::-1], p.values[1:]))
    V = well_derivative(phi, 2, p.well)
    k = robin_coefficient(p.well, p.grid)
    bnd = np.zeros(full.size)
    bnd[0] = bnd[-1] = k
    form = -(full.stiffness + sp.diags(bnd + full.mass * V))
    return DiscreteOperator(form, full.mass, np.arange(full.size), full.nodes, full,
                            "bilayer", 0, p)


def assemble_filament_operator(p: EquilibriumProfile, m: int = 0) -> DiscreteOperator:
    """``L_fm`` in the ``R``-weighted inner product.

    ``m = 0`` eliminates the origin by condensation, ``m >= 1`` by the
    Dirichlet condition.
    """
    if p.morphology != "filament":
        raise DomainError("assemble_filament_operator needs a filament profile")
    if int(m) != m or m < 0:
        raise DomainError(f"azimuthal index must be a nonnegative integer, got {m!r}")
    mesh = p.mesh
    R = mesh.nodes
    V = _potential(p)
    bnd = np.zeros(mesh.size)
    bnd[-1] = robin_coefficient(p.well, p.grid)
    diag = bnd + mesh.mass * V
    if m:
        # lumped m^2 / R^2 term: weight w J R / R^2 (origin row dropped)
        cm = np.zeros(mesh.size)
        cm[1:] = m * m * mesh.mass[1:] / R[1:] ** 2
        diag = diag + cm
    form = -(mesh.stiffness + sp.diags(diag))
    form = sp.csr_matrix(form)
    idx = np.arange(1, mesh.size)
    sub = form[1:, 1:]
    elim = None
    if m == 0:
        row = form[0, 1:].toarray().ravel()
        pivot = form[0, 0]
        sub = _condense(sub, row, pivot)
        elim = (row, pivot)
    return DiscreteOperator(sub, mesh.mass[1:], idx, R, mesh, "filament", m, p, eliminated=elim)


def _condense(sub, row, pivot):
    nz = np.nonzero(row)[0]
    upd = sp.coo_matrix((np.outer(row[nz], row[nz]).ravel() / pivot,
                         (np.repeat(nz, nz.size), np.tile(nz, nz.size))), shape=sub.shape)
    return sp.csr_matrix(sub - upd)


def _scaled(A: DiscreteOperator):
    s = 1.0 / np.sqrt(A.measure_weights)
    return sp.csc_matrix(sp.diags(s) @ A.form @ sp.diags(s)), s


def spectrum(A: DiscreteOperator, k: int = 5):
    """The ``k`` largest eigenvalues (descending) and eigenvectors on ``coords``.

    Shift-invert Lanczos about a shift just above the spectrum: since the
    operator is ``Delta - V`` with a nonpositive Laplacian, every eigenvalue
    lies below ``-min V``, so the eigenvalues nearest the shift are the
    largest ones. The start vector is fixed for reproducibility.
    """
    k = min(int(k), A.size - 2)
    C, s = _scaled(A)
    sigma = float(np.max(-(_profile_potential(A)))) + 0.25
    v0 = np.sqrt(A.measure_weights)
    try:
        lam, vec = eigsh(C, k=k, sigma=sigma, which="LM", v0=v0, tol=1e-14)
    except (ArpackNoConvergence, RuntimeError) as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(-lam)
    lam, vec = lam[order], vec[:, order] * s[:, None]
    return lam, vec


def _pair(A: DiscreteOperator, lam, v) -> EigenPair:
    v = v / np.sqrt(A.inner(v, v))
    full = A.extend(v)
    if np.sum(A.measure_weights * v) < 0:
        v, full = -v, -full
    return EigenPair(float(lam), full, float(A.inner(v, v)), float(A.mesh.energy(full)))


def ground_state(A: DiscreteOperator) -> EigenPair:
    """Largest eigenvalue with unit-norm eigenvector (positive mean)."""
    lam, vec = spectrum(A, 1)
    return _pair(A, lam[0], vec[:, 0])


def nearest_zero(A: DiscreteOperator, k: int = 5) -> EigenPair:
    """Eigenpair whose eigenvalue is closest to zero among the top ``k``."""
    lam, vec = spectrum(A, k)
    i = int(np.argmin(np.abs(lam)))
    return _pair(A, lam[i], vec[:, i])


def check_single_positive_eigenvalue(A: DiscreteOperator, gap=1e-6):
    """Raise unless ``A`` has exactly one positive eigenvalue and no kernel.

    This is the spectral hypothesis on ``L_f0`` needed for ``Phi_f1`` and the
    filament pearling condition.
    """
    lam, _ = spectrum(A, 3)
    npos = int(np.sum(lam > gap))
    near = lam[np.abs(lam) <= gap]
    if npos != 1 or near.size:
        raise AssumptionViolation(
            "single-positive-eigenvalue assumption on L_f0",
            f"top eigenvalues {lam.tolist()} (need exactly one > {gap} and none within {gap} of 0)")
    return lam


def cosine_similarity(A: DiscreteOperator, f_full, g_full) -> float:
    f, g = A.restrict(f_full), A.restrict(g_full)
    return float(abs(A.inner(f, g)) / np.sqrt(A.inner(f, f) * A.inner(g, g)))


def _phi_system(A: DiscreteOperator):
    """Form, weights and potential of the problem used for ``Phi_j``.

    The bilayer problem is posed on the half-line (even subspace, natural
    zero-slope condition at z = 0); the filament one on ``[0, L]`` with the
    radial origin row kept (its weight is zero, so it imposes regularity).
    """
    p = A.profile
    mesh = p.mesh
    V = _potential(p)
    bnd = np.zeros(mesh.size)
    bnd[-1] = robin_coefficient(p.well, p.grid)
    form = -(mesh.stiffness + sp.diags(bnd + mesh.mass * V))
    return form, mesh, V


def _check_nonsingular(form, mesh, weights):
    w = weights.copy()
    if w[0] == 0.0:
        w[0] = w[1]
    s = 1.0 / np.sqrt(w)
    C = sp.diags(s) @ form @ sp.diags(s)
    ab = to_banded(C, mesh.bandwidth, upper_only=True)
    scale = float(np.max(np.abs(ab)))
    tau = 1e-10 * scale
    near = eig_banded(ab, lower=False, eigvals_only=True, select="v", select_range=(-tau, tau))
    if near.size:
        raise SingularOperatorError(
            f"restricted operator is numerically singular (eigenvalue {near[0]:.3e})",
            condition=scale / max(abs(near[0]), np.finfo(float).tiny))


def solve_phi(A: DiscreteOperator, order: int = 1, check=True) -> np.ndarray:
    """``Phi_j = A^{-j} 1`` (j = 1, 2) on the operator's coordinate nodes.

    The far-field constant is split off analytically: with
    ``alpha = W''(b_-)``, ``Phi_1 = -1/alpha + chi_1`` and
    ``Phi_2 = 1/alpha^2 + chi_2`` where ``chi_j`` decays and solves
    ``L chi_1 = 1 - V/alpha`` and ``L chi_2 = Phi_1 + V/alpha^2``.
    """
    if order not in (1, 2):
        raise DomainError(f"order must be 1 or 2, got {order!r}")
    if A.morphology == "filament" and A.m != 0:
        raise DomainError("Phi_j is defined through L_f0 only")
    p = A.profile
    alpha = p.well.alpha_minus
    form, mesh, V = _phi_system(A)
    if check:
        _check_nonsingular(form, mesh, mesh.mass)
    bw = mesh.bandwidth
    ab = to_banded(form, bw)
    chi1 = solve_banded((bw, bw), ab, mesh.mass * (1.0 - V / alpha))
    phi = -1.0 / alpha + chi1
    if order == 2:
        chi2 = solve_banded((bw, bw), ab, mesh.mass * (phi + V / alpha**2))
        phi = 1.0 / alpha**2 + chi2
    if A.morphology == "bilayer":
        phi = np.concatenate((phi[::-1], phi[1:]))
    return phi


def phi_residual(A: DiscreteOperator, phi_full, order: int = 1) -> float:
    """Weighted norm ``||A chi_j - g_j||_w`` of the decaying part of ``Phi_j``.

    The far-field constant is removed first (``-1/alpha`` or ``1/alpha^2``)
    since the truncation condition acts on the decaying part; ``g_j`` is the
    corresponding right-hand side, so this equals ``||A Phi_j - Phi_{j-1}||_w``
    with ``Phi_0 = 1`` on the unbounded domain.
    """
    alpha = A.profile.well.alpha_minus
    V = well_derivative(_profile_full(A), 2, A.profile.well)
    if order == 1:
        chi, g = phi_full + 1.0 / alpha, 1.0 - V / alpha
    else:
        phi1 = solve_phi(A, 1, check=False)
        chi, g = phi_full - 1.0 / alpha**2, phi1 + V / alpha**2
    r = A.apply(A.restrict(chi)) - A.restrict(g)
    return float(np.sqrt(A.inner(r, r)))


def _profile_full(A: DiscreteOperator) -> np.ndarray:
    p = A.profile
    if A.morphology == "bilayer":
        return np.concatenate((p.values[::-1], p.values[1:]))
    return p.values
