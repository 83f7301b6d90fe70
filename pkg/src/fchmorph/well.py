"""Tilted double-well potential and its exact derivatives.

The well is

    W(u; xi) = 1/2 (u - b_-)^2 (1/2 (u - b_+)^2 - (xi/3)(u - (3 b_+ - b_-)/2))

with b_- = -1 and b_+ = +1. It is expanded once into monomial coefficients so
every derivative is an exact polynomial evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DomainError

__all__ = ["WellParams", "well_eval", "well_derivative", "well_bracket", "well_positive_zero"]


@dataclass(frozen=True)
class WellParams:
    """Parameters of the tilted double well.

    Parameters
    ----------
    xi : float
        Well tilt. Must satisfy ``xi > -2`` so that ``W''(b_-) > 0``.
    """

    xi: float
    b_minus: float = -1.0
    b_plus: float = 1.0
    _coef: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xi = float(self.xi)
        if not np.isfinite(xi) or xi <= -2.0:
            raise DomainError(f"well tilt must satisfy xi > -2, got {self.xi!r}")
        if self.b_minus != -1.0 or self.b_plus != 1.0:
            raise DomainError("only the wells b_- = -1, b_+ = +1 are supported")
        object.__setattr__(self, "xi", xi)
        bm, bp = self.b_minus, self.b_plus
        quad = P.polymul([0.5], P.polypow([-bp, 1.0], 2))
        tilt = [(xi / 3.0) * (3 * bp - bm) / 2.0, -xi / 3.0]
        c = P.polymul(P.polymul([0.5], P.polypow([-bm, 1.0], 2)), P.polyadd(quad, tilt))
        derivs = [np.asarray(c, dtype=float)]
        for _ in range(4):
            derivs.append(P.polyder(derivs[-1]))
        object.__setattr__(self, "_coef", tuple(derivs))

    @property
    def alpha_minus(self) -> float:
        """Curvature of the well at ``b_-``; equals ``2 + xi``."""
        return float(P.polyval(self.b_minus, self._coef[2]))

    def coefficients(self, order: int = 0) -> np.ndarray:
        """Monomial coefficients (lowest degree first) of the ``order``-th derivative."""
        return self._coef[order].copy()


def _horner(u, c):
    # c is lowest-degree first
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u) + c[-1]
    for a in c[-2::-1]:
        out = out * u + a
    return out if out.ndim else float(out)


def well_eval(u, w: WellParams):
    """Evaluate ``W(u; xi)`` for scalar or array ``u``."""
    return _horner(u, w._coef[0])


def well_derivative(u, order: int, w: WellParams):
    """Exact derivative of the well of the given ``order`` (1 to 4)."""
    if isinstance(order, bool) or int(order) != order or not 1 <= order <= 4:
        raise DomainError(f"derivative order must be 1, 2, 3 or 4, got {order!r}")
    return _horner(u, w._coef[int(order)])


def well_bracket(u, w: WellParams):
    """Quadratic factor ``Q`` in ``W = (u - b_-)^2 Q(u) / 2``.

    Evaluating W through this factorization stays accurate near the double
    root ``b_-``, where the monomial form suffers cancellation.
    """
    u = np.asarray(u, dtype=float)
    out = 0.5 * (u - w.b_plus) ** 2 - (w.xi / 3.0) * (u - (3 * w.b_plus - w.b_minus) / 2.0)
    return out if out.ndim else float(out)


def well_positive_zero(w: WellParams) -> float:
    """Smallest root ``u* > b_-`` of ``W(u*) = 0``.

    This is the peak of the bilayer profile, since ``(phi')^2 / 2 = W(phi)``.
    Away from the double root at ``b_-`` the zeros of W are the roots of the
    quadratic bracket, which are found in closed form.

    Raises
    ------
    DomainError
        If ``xi >= 0``: no turning point exists in ``(b_-, b_+]``.
    """
    if w.xi >= 0.0:
        raise DomainError(f"no homoclinic turning point for xi = {w.xi} (requires xi < 0)")
    bm, bp, xi = w.b_minus, w.b_plus, w.xi
    # 1/2 (u - bp)^2 - (xi/3)(u - c0) = 0
    c0 = (3 * bp - bm) / 2.0
    a2, a1, a0 = 0.5, -bp - xi / 3.0, 0.5 * bp * bp + xi * c0 / 3.0
    disc = a1 * a1 - 4 * a2 * a0
    if disc < 0:
        raise DomainError(f"no homoclinic turning point for xi = {xi}")
    sq = np.sqrt(disc)
    # stable form of the smaller root
    q = -0.5 * (a1 - sq) if a1 < 0 else -0.5 * (a1 + sq)
    roots = sorted([q / a2, a0 / q])
    for r in roots:
        if bm < r <= bp:
            return float(r)
    raise DomainError(f"no homoclinic turning point for xi = {xi}")
