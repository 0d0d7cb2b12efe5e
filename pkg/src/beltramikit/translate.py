"""Conversions between a conductivity, its complex dilatations and its (G, H) metrics.

A conductivity ``sigma`` determines a pair of complex dilatations ``(mu, nu)``
through the Beltrami equation ``f_zbar = mu f_z + nu conj(f_z)``, and
equivalently a pair of determinant-one SPD metrics ``(G, H)`` through
``Df^T H Df = G det Df``. All functions broadcast over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mat2
from .errors import NotElliptic

DENOM_TOL = 1e-14


@dataclass(frozen=True)
class BeltramiPair:
    """Complex dilatations ``(mu, nu)``; scalars or equally shaped arrays."""

    mu: complex | np.ndarray
    nu: complex | np.ndarray

    @property
    def k(self):
        """Pointwise ellipticity ``|mu| + |nu|``."""
        return np.abs(self.mu) + np.abs(self.nu)

    def validate(self) -> "BeltramiPair":
        if not np.all(self.k < 1.0):
            raise NotElliptic("|mu| + |nu| must be < 1")
        return self


@dataclass(frozen=True)
class GHPair:
    """Domain metric ``G`` and target metric ``H``, both in SL_sym(2) and SPD."""

    G: np.ndarray
    H: np.ndarray

    def validate(self, tol: float = 1e-10) -> "GHPair":
        for name, m in (("G", self.G), ("H", self.H)):
            mat2.check_spd(m)
            if not np.all(np.abs(mat2.det(m) - 1.0) <= tol):
                raise NotElliptic(f"det {name} must equal 1")
        return self


def _guard(denom, what: str):
    if not np.all(denom > DENOM_TOL):
        raise NotElliptic(f"{what} is not positive")


def sigma_to_munu(sigma) -> BeltramiPair:
    s = mat2.as_mat(sigma)
    s11, s12, s21, s22 = s[..., 0, 0], s[..., 0, 1], s[..., 1, 0], s[..., 1, 1]
    if not np.all(mat2.min_eig_sym(mat2.sym(s)) > 0):
        raise NotElliptic("symmetric part of sigma is not positive definite")
    denom = 1.0 + (s11 + s22) + mat2.det(s)
    _guard(denom, "1 + tr sigma + det sigma")
    mu = ((s22 - s11) - 1j * (s12 + s21)) / denom
    nu = ((1.0 - mat2.det(s)) + 1j * (s12 - s21)) / denom
    return BeltramiPair(mu, nu).validate()


def munu_to_sigma(p: BeltramiPair) -> np.ndarray:
    mu, nu = np.asarray(p.mu, dtype=complex), np.asarray(p.nu, dtype=complex)
    p.validate()
    amu2, anu2 = np.abs(mu) ** 2, np.abs(nu) ** 2
    denom = np.abs(1 + nu) ** 2 - amu2
    _guard(denom, "|1 + nu|^2 - |mu|^2")
    out = np.empty(mu.shape + (2, 2))
    out[..., 0, 0] = (np.abs(1 - mu) ** 2 - anu2) / denom
    out[..., 0, 1] = 2.0 * (nu - mu).imag / denom
    out[..., 1, 0] = -2.0 * (nu + mu).imag / denom
    out[..., 1, 1] = (np.abs(1 + mu) ** 2 - anu2) / denom
    return out


def munu_to_gh(p: BeltramiPair) -> GHPair:
    mu, nu = np.asarray(p.mu, dtype=complex), np.asarray(p.nu, dtype=complex)
    amu, anu = np.abs(mu), np.abs(nu)
    d2 = (1 - (anu - amu) ** 2) * (1 - (anu + amu) ** 2)
    _guard(d2, "d^2")
    d = np.sqrt(d2)
    G = np.empty(mu.shape + (2, 2))
    G[..., 0, 0] = np.abs(1 + mu) ** 2 - anu**2
    G[..., 0, 1] = G[..., 1, 0] = 2.0 * mu.imag
    G[..., 1, 1] = np.abs(1 - mu) ** 2 - anu**2
    H = np.empty(mu.shape + (2, 2))
    H[..., 0, 0] = np.abs(1 - nu) ** 2 - amu**2
    H[..., 0, 1] = H[..., 1, 0] = -2.0 * nu.imag
    H[..., 1, 1] = np.abs(1 + nu) ** 2 - amu**2
    return GHPair(G / d[..., None, None], H / d[..., None, None])


def gh_to_munu(p: GHPair) -> BeltramiPair:
    G, H = np.asarray(p.G, dtype=float), np.asarray(p.H, dtype=float)
    s = mat2.trace(G) + mat2.trace(H)
    mu = (G[..., 0, 0] - G[..., 1, 1] + 2j * G[..., 0, 1]) / s
    nu = (H[..., 1, 1] - H[..., 0, 0] - 2j * H[..., 0, 1]) / s
    return BeltramiPair(mu, nu)


def gh_from_sigma(sigma) -> GHPair:
    s = mat2.as_mat(sigma)
    s11, s12, s21, s22 = s[..., 0, 0], s[..., 0, 1], s[..., 1, 0], s[..., 1, 1]
    ds = mat2.det(mat2.sym(s))
    if not np.all(mat2.min_eig_sym(mat2.sym(s)) > 0):
        raise NotElliptic("symmetric part of sigma is not positive definite")
    _guard(ds, "det sigma^S")
    r = 1.0 / np.sqrt(ds)
    off_g = -0.5 * (s12 + s21)
    off_h = 0.5 * (s21 - s12)
    G = np.empty(s.shape)
    G[..., 0, 0], G[..., 0, 1], G[..., 1, 0], G[..., 1, 1] = s22, off_g, off_g, s11
    H = np.empty(s.shape)
    H[..., 0, 0], H[..., 0, 1], H[..., 1, 0], H[..., 1, 1] = mat2.det(s), off_h, off_h, 1.0
    return GHPair(G * r[..., None, None], H * r[..., None, None])


def sigma_from_gh(p: GHPair) -> np.ndarray:
    """``sigma = (G^{-1} + H12 J) / H22``."""
    G, H = np.asarray(p.G, dtype=float), np.asarray(p.H, dtype=float)
    h12, h22 = H[..., 0, 1], H[..., 1, 1]
    return (mat2.inv(G) + h12[..., None, None] * mat2.J) / h22[..., None, None]


def stream_residual(grad_u, grad_v, sigma) -> float:
    """``|J^T grad_v - sigma grad_u|``; zero when ``v`` is a stream function of ``u``."""
    gu = np.asarray(grad_u, dtype=float)
    gv = np.asarray(grad_v, dtype=float)
    s = mat2.as_mat(sigma)
    r = mat2.J.T @ gv - s @ gu
    return float(np.hypot(r[0], r[1]))
