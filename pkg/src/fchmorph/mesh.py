"""Spectral-element discretization on a truncated half-line or radius.

Each element carries Gauss-Lobatto-Legendre (GLL) nodes of degree ``p``.
Stiffness matrices are exact for the polynomial interpolant, the mass matrix
is the (diagonal) GLL-lumped mass, and the weight ``rho(x) = 1`` (line) or
``rho(R) = R`` (radial) enters both through the quadrature. The resulting
discrete operators are exactly symmetric under the lumped measure.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import legendre

from .errors import DomainError

__all__ = ["GridSpec", "Mesh", "gll_rule", "to_banded"]

GEOMETRIES = ("line", "radial")


@dataclass(frozen=True)
class GridSpec:
    """Truncated computational domain ``[0, half_length]``.

    ``n_points`` is the requested node count; the mesh uses
    ``round((n_points - 1) / degree)`` elements of polynomial degree
    ``degree``, so the realized node count can differ by less than ``degree``.
    """

    half_length: float
    n_points: int
    geometry: str = "line"
    degree: int = 4

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise DomainError(f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}")
        if not (np.isfinite(self.half_length) and self.half_length > 0):
            raise DomainError(f"half_length must be positive, got {self.half_length!r}")
        if int(self.n_points) != self.n_points or self.n_points < 64:
            raise DomainError(f"n_points must be an integer >= 64, got {self.n_points!r}")
        if int(self.degree) != self.degree or not 1 <= self.degree <= 24:
            raise DomainError(f"degree must be an integer in 1..24, got {self.degree!r}")
        object.__setattr__(self, "half_length", float(self.half_length))
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "degree", int(self.degree))

    @property
    def n_elements(self) -> int:
        return max(1, int(round((self.n_points - 1) / self.degree)))

    @property
    def spacing(self) -> float:
        """Mean node spacing."""
        return self.half_length / (self.n_elements * self.degree)

    def refined(self, factor_n=2, factor_l=1.5) -> "GridSpec":
        return GridSpec(self.half_length * factor_l, int(round(self.n_points * factor_n)),
                        self.geometry, self.degree)


@lru_cache(maxsize=None)
def gll_rule(p: int):
    """GLL nodes, weights and differentiation matrix on ``[-1, 1]``.

    Returns
    -------
    x, w, D : ndarray
        ``D[i, j] = l_j'(x_i)`` for the Lagrange basis ``l_j``.
    """
    if p == 1:
        x = np.array([-1.0, 1.0])
        return x, np.array([1.0, 1.0]), np.array([[-0.5, 0.5], [-0.5, 0.5]])
    cp = np.zeros(p + 1)
    cp[p] = 1.0
    inner = legendre.legroots(legendre.legder(cp))
    x = np.concatenate(([-1.0], np.sort(inner), [1.0]))
    x = 0.5 * (x - x[::-1])  # exact symmetry
    Lp = legendre.legval(x, cp)
    w = 2.0 / (p * (p + 1) * Lp**2)
    w = 0.5 * (w + w[::-1])
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (Lp[:, None] / Lp[None, :]) / dx
    np.fill_diagonal(D, 0.0)
    D[0, 0] = -p * (p + 1) / 4.0
    D[p, p] = p * (p + 1) / 4.0
    for flag in (x, w, D):
        flag.setflags(write=False)
    return x, w, D


def to_banded(A, bw: int, upper_only=False) -> np.ndarray:
    """Convert a square sparse/dense matrix to LAPACK band storage.

    ``upper_only`` gives the ``(bw+1, n)`` symmetric upper form used by
    ``eig_banded``/``solveh_banded``; otherwise ``(2bw+1, n)`` for
    ``solve_banded`` with ``(bw, bw)``.
    """
    A = sp.coo_matrix(A)
    n = A.shape[0]
    if upper_only:
        ab = np.zeros((bw + 1, n))
        keep = A.col >= A.row
        r, c, v = A.row[keep], A.col[keep], A.data[keep]
        np.add.at(ab, (bw + r - c, c), v)
    else:
        ab = np.zeros((2 * bw + 1, n))
        np.add.at(ab, (bw + A.row - A.col, A.col), A.data)
    return ab


class Mesh:
    """Nodes, lumped mass and weighted stiffness of a 1D spectral-element mesh.

    Parameters
    ----------
    edges : array_like
        Increasing element boundaries.
    degree : int
        Polynomial degree per element.
    radial : bool
        Use the weight ``rho(R) = R`` (requires ``edges[0] == 0``).
    """

    def __init__(self, edges, degree: int, radial: bool = False, nodes=None):
        edges = np.asarray(edges, dtype=float)
        self.edges, self.degree, self.radial = edges, int(degree), bool(radial)
        p = self.degree
        x, w, D = gll_rule(p)
        ne = edges.size - 1
        a, b = edges[:-1], edges[1:]
        J = 0.5 * (b - a)
        loc = a[:, None] + (x[None, :] + 1.0) * J[:, None]
        self.conn = np.arange(ne)[:, None] * p + np.arange(p + 1)[None, :]
        n = ne * p + 1
        if nodes is None:
            nodes = np.empty(n)
            nodes[self.conn] = loc
            nodes[self.conn[:, 0]] = a
            nodes[-1] = b[-1]
        self.nodes = np.asarray(nodes, dtype=float)
        loc = self.nodes[self.conn]
        rho = loc if radial else np.ones_like(loc)
        self._J = J
        self._rho = rho
        self._wq = w[None, :] * J[:, None] * rho  # quadrature weights incl. measure
        mass = np.zeros(n)
        np.add.at(mass, self.conn, self._wq)
        self.mass = mass
        # local weighted stiffness: (1/J) D^T diag(w rho) D
        kl = np.einsum("eq,qi,qj->eij", w[None, :] * rho, D, D) / J[:, None, None]
        rows = np.repeat(self.conn[:, :, None], p + 1, axis=2)
        cols = np.repeat(self.conn[:, None, :], p + 1, axis=1)
        self.stiffness = sp.csr_matrix((kl.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n))
        self._D = D
        coo = self.stiffness.tocoo()
        self._coo = (coo.row, coo.col, coo.data)
        # inverse-distance-free interface averaging counts
        cnt = np.zeros(n)
        np.add.at(cnt, self.conn, 1.0)
        self._cnt = cnt

    @classmethod
    def from_grid(cls, g: GridSpec) -> "Mesh":
        edges = np.linspace(0.0, g.half_length, g.n_elements + 1)
        return cls(edges, g.degree, radial=(g.geometry == "radial"))

    def mirrored(self) -> "Mesh":
        """Full-line mesh on ``[-L, L]`` whose nodes are exact mirror images."""
        if self.radial or self.edges[0] != 0.0:
            raise DomainError("only a line mesh starting at 0 can be mirrored")
        edges = np.concatenate((-self.edges[::-1], self.edges[1:]))
        nodes = np.concatenate((-self.nodes[::-1], self.nodes[1:]))
        return Mesh(edges, self.degree, radial=False, nodes=nodes)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def bandwidth(self) -> int:
        return self.degree

    def apply_stiffness(self, f) -> np.ndarray:
        """``K f`` evaluated as ``sum_j K_ij (f_j - f_i)`` (rows of K sum to 0).

        The difference form avoids cancellation between large stiffness
        entries and keeps the residual floor near machine precision.
        """
        r, c, v = self._coo
        out = np.zeros(self.size)
        np.add.at(out, r, v * (f[c] - f[r]))
        return out

    def integrate(self, f) -> float:
        """GLL quadrature of ``f * rho`` over the mesh."""
        return float(np.dot(self.mass, f))

    def energy(self, f) -> float:
        """Exact ``int rho (f_h')^2`` for the interpolant ``f_h``."""
        f = np.asarray(f, dtype=float)
        return float(f @ (self.stiffness @ f))

    def gradient(self, f, second=False) -> np.ndarray:
        """Nodal derivative of the interpolant, averaged across element interfaces."""
        f = np.asarray(f, dtype=float)
        floc = f[self.conn]
        J = self._J[:, None]
        d = (floc @ self._D.T) / J
        if second:
            d = (d @ self._D.T) / J
        out = np.zeros(self.size)
        np.add.at(out, self.conn, d)
        return out / self._cnt
