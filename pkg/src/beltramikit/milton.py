"""Fractional-linear transforms of conductivities and the matching action on solutions.

For real parameters ``(a, b, c, d)`` the transform

    Sigma_A = (a sigma + b J)(c I + d J sigma)^-1

maps sigma-harmonic pairs ``U = (u, v)`` (with ``J^T grad v = sigma grad u``)
to Sigma_A-harmonic pairs ``A' U`` where ``A' = [[c, d], [-b, a]]``.
Writing ``X = J sigma`` the action is the Moebius map
``X -> (a X - b)(d X + c)^-1`` with coefficient matrix ``[[a, -b], [d, c]]``,
which is what makes composition a matrix product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mat2
from .errors import BadParameter, SingularTransform
from .kmin import TwoPhase
from .translate import GHPair, sigma_from_gh

SINGULAR_TOL = 1e-14


@dataclass(frozen=True)
class MoebiusParams:
    """Raw transform coefficients; no normalisation is imposed."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if self.a == 0 and self.b == 0:
            raise BadParameter("(a, b) must not both vanish")
        if self.c == 0 and self.d == 0:
            raise BadParameter("(c, d) must not both vanish")

    @property
    def a_prime(self) -> np.ndarray:
        return np.array([[self.c, self.d], [-self.b, self.a]], dtype=float)

    @property
    def det_a_prime(self) -> float:
        return self.a * self.c + self.b * self.d

    def moebius_matrix(self) -> np.ndarray:
        """Coefficients of the action on ``X = J sigma``."""
        return np.array([[self.a, -self.b], [self.d, self.c]], dtype=float)

    @classmethod
    def from_moebius_matrix(cls, m) -> "MoebiusParams":
        m = np.asarray(m, dtype=float)
        return cls(m[0, 0], -m[0, 1], m[1, 1], m[1, 0])

    def then(self, other: "MoebiusParams") -> "MoebiusParams":
        """Parameters of applying ``self`` first and ``other`` second."""
        return compose(self, other)


def compose(first: MoebiusParams, second: MoebiusParams) -> MoebiusParams:
    """Single transform equal to ``first`` followed by ``second``."""
    return MoebiusParams.from_moebius_matrix(second.moebius_matrix() @ first.moebius_matrix())


def sigma_transform(sigma, p: MoebiusParams) -> np.ndarray:
    s = mat2.as_mat(sigma)
    den = p.c * mat2.I2 + p.d * (mat2.J @ s)
    dd = mat2.det(den)
    if np.any(np.abs(dd) <= SINGULAR_TOL):
        raise SingularTransform(f"c I + d J sigma is singular (det = {dd!r})")
    return (p.a * s + p.b * mat2.J) @ mat2.inv(den)


def solution_transform(p: MoebiusParams) -> np.ndarray:
    return p.a_prime


def params_for_solution_map(a_prime) -> MoebiusParams:
    """Inverse of :func:`solution_transform`: read ``(a, b, c, d)`` off ``A'``."""
    m = np.asarray(a_prime, dtype=float)
    return MoebiusParams(m[1, 1], -m[1, 0], m[0, 0], m[0, 1])


def sym_part_factor(sigma, p: MoebiusParams):
    """Scalar ``f`` with ``sym(Sigma_A) = f sym(sigma)``.

    ``f = (ac + bd) / det(c I + d J sigma)`` and the determinant expands to
    ``c^2 + cd (sigma_12 - sigma_21) + d^2 det sigma``.  The shorter
    denominator ``c^2 det sigma + d^2`` is only right when ``det sigma = 1``.
    """
    s = mat2.as_mat(sigma)
    return p.det_a_prime / mat2.det(p.c * mat2.I2 + p.d * (mat2.J @ s))


def inv_sym_part_factor(sigma, p: MoebiusParams):
    """Scalar ``f`` with ``sym(Sigma_A^-1) = f J sym(sigma) J^T``.

    ``f = (ac + bd) / det(a sigma + b J)``; the determinant equals
    ``a^2 det sigma + b^2`` for symmetric ``sigma`` and picks up
    ``ab (sigma_12 - sigma_21)`` otherwise.
    """
    s = mat2.as_mat(sigma)
    return p.det_a_prime / mat2.det(p.a * s + p.b * mat2.J)


def identity_check(sigma, p: MoebiusParams, grad_u) -> float:
    """Pointwise residual of the transformed div-curl pair.

    With ``grad v = J sigma grad u`` the new gradients are
    ``a' grad u + b' grad v`` and ``c' grad u + d' grad v`` where
    ``A' = [[a', b'], [c', d']]``; the residual is
    ``|Sigma_A (a' grad u + b' grad v) - J^T (c' grad u + d' grad v)|``.
    """
    s = mat2.as_mat(sigma)
    S = sigma_transform(s, p)
    gu = np.asarray(grad_u, dtype=float)
    gv = gu @ (mat2.J @ s).swapaxes(-1, -2)
    ap = p.a_prime
    gu_new = ap[0, 0] * gu + ap[0, 1] * gv
    gv_new = ap[1, 0] * gu + ap[1, 1] * gv
    r = np.einsum("...ij,...j->...i", S, gu_new) - gv_new @ mat2.J
    out = np.linalg.norm(r, axis=-1)
    return out if np.ndim(out) else float(out)


def ellipticity_preserved(sigma, p: MoebiusParams) -> bool:
    """Whether ``Sigma_A`` is again uniformly elliptic, i.e. ``det A' > 0``."""
    sigma_transform(sigma, p)  # raises on a singular transform
    return p.det_a_prime > 0


def _rotation_max_first(m) -> np.ndarray:
    # rotation whose first column is the top eigenvector; I on exact ties
    a, b, d = m[0, 0], 0.5 * (m[0, 1] + m[1, 0]), m[1, 1]
    return mat2.rotation(0.5 * math.atan2(2.0 * b, a - d))


@dataclass(frozen=True)
class Symmetrization:
    A: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    H1: np.ndarray
    H2: np.ndarray

    @property
    def params(self) -> MoebiusParams:
        """Transform parameters with ``sigma_transform(sigma_i, params) == sigma_i'``."""
        return params_for_solution_map(mat2.inv(self.A))

    def __iter__(self):
        return iter((self.A, self.sigma1, self.sigma2))


def symmetrize(tp: TwoPhase) -> Symmetrization:
    """Target change ``A = H1^-1/2 R2`` making both phases symmetric.

    ``R2`` diagonalises ``H1^-1/2 H2 H1^-1/2`` with the larger eigenvalue
    first, so the transformed ``H`` is ``I`` on phase 1 and diagonal on phase 2.
    ``G`` is untouched and each phase is rebuilt from its new ``(G, H)``.
    The same conductivities arise from :func:`sigma_transform` with the
    solution map ``A' = A^-1`` (see ``Symmetrization.params``).
    """
    W = mat2.inv_sqrt_spd(tp.H1)
    R2 = _rotation_max_first(W @ tp.H2 @ W)
    A = W @ R2
    HA = [mat2.sym(A.T @ h @ A) for h in (tp.H1, tp.H2)]
    HA = [np.diag(np.diag(h)) for h in HA]  # off-diagonal is rounding only
    s1 = mat2.sym(sigma_from_gh(GHPair(tp.G1, HA[0])))
    s2 = mat2.sym(sigma_from_gh(GHPair(tp.G2, HA[1])))
    return Symmetrization(A, s1, s2, HA[0], HA[1])
