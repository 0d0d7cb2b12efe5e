"""Closed-form kernel for real 2x2 matrices.

Every function accepts a single matrix of shape ``(2, 2)`` or a stack of
shape ``(..., 2, 2)`` and broadcasts over the leading axes, so the same code
serves scalar calls and the large random sweeps used in verification.
"""

from __future__ import annotations

import numpy as np

from .errors import NonSpd, NonSymmetric

SYM_TOL = 1e-12

J = np.array([[0.0, -1.0], [1.0, 0.0]])
I2 = np.eye(2)


def as_mat(m) -> np.ndarray:
    """Coerce nested sequences to a float array with trailing shape (2, 2)."""
    a = np.asarray(m, dtype=float)
    if a.shape[-2:] != (2, 2):
        raise ValueError(f"expected trailing shape (2, 2), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def frob(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return np.sqrt(np.sum(m * m, axis=(-2, -1)))


def det(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def trace(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return m[..., 0, 0] + m[..., 1, 1]


def adjugate(m) -> np.ndarray:
    """Classical adjoint: ``m @ adjugate(m) == det(m) * I``."""
    m = np.asarray(m, dtype=float)
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    out[..., 1, 1] = m[..., 0, 0]
    return out


def inv(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return adjugate(m) / det(m)[..., None, None]


def transpose(m) -> np.ndarray:
    return np.swapaxes(np.asarray(m, dtype=float), -1, -2)


def sym(m) -> np.ndarray:
    """Symmetric part (m + m^T) / 2."""
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + transpose(m))


def rotation(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(theta.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def diag(a, b) -> np.ndarray:
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    out = np.zeros(a.shape + (2, 2))
    out[..., 0, 0] = a
    out[..., 1, 1] = b
    return out


def is_symmetric(m, tol: float = SYM_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return np.abs(m[..., 0, 1] - m[..., 1, 0]) <= tol * frob(m)


def is_sl2(m, tol: float = 1e-12) -> bool:
    """True when every matrix in ``m`` has determinant one within ``tol``."""
    return bool(np.all(np.abs(det(m) - 1.0) <= tol))


def _check_symmetric(m) -> np.ndarray:
    m = as_mat(m)
    if not np.all(is_symmetric(m)):
        raise NonSymmetric("matrix is not symmetric within 1e-12 relative")
    return m


def _sym_eigvals(m):
    # Larger root from the half-trace plus radius, smaller one from det/larger
    # so that neither is formed by cancellation for SPD input.
    a, b, d = m[..., 0, 0], 0.5 * (m[..., 0, 1] + m[..., 1, 0]), m[..., 1, 1]
    half_tr = 0.5 * (a + d)
    radius = np.hypot(0.5 * (a - d), b)
    lmax = half_tr + radius
    dt = a * d - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        lmin = np.where(half_tr > 0, dt / lmax, half_tr - radius)
    if lmin.ndim == 0:
        return float(lmin), float(lmax)
    return lmin, lmax


def eig_sym(m):
    """Eigen-decomposition of a symmetric 2x2 matrix.

    Returns ``(lmin, lmax, R)`` with ``R`` a proper rotation such that
    ``R.T @ m @ R == diag(lmin, lmax)``. The rotation angle comes from the
    half-angle formula, so nearly diagonal input needs no special casing;
    a diagonal matrix with ``m11 <= m22`` yields ``R = I``.
    """
    m = _check_symmetric(m)
    lmin, lmax = _sym_eigvals(m)
    a, b, d = m[..., 0, 0], 0.5 * (m[..., 0, 1] + m[..., 1, 0]), m[..., 1, 1]
    # +0.0 turns a -0.0 into +0.0 so atan2 stays on the principal branch
    phi = 0.5 * np.arctan2(-2.0 * b + 0.0, d - a)
    return lmin, lmax, rotation(phi)


def eigvals_sym(m):
    """``(lmin, lmax)`` of a symmetric matrix, without the rotation."""
    return _sym_eigvals(_check_symmetric(m))


def max_eig_sym(m) -> np.ndarray:
    return _sym_eigvals(_check_symmetric(m))[1]


def min_eig_sym(m) -> np.ndarray:
    return _sym_eigvals(_check_symmetric(m))[0]


def check_spd(m) -> np.ndarray:
    m = _check_symmetric(m)
    lmin, _ = _sym_eigvals(m)
    if not np.all(lmin > 0):
        raise NonSpd("matrix is not positive definite")
    return m


def sqrt_spd(m) -> np.ndarray:
    """Principal square root of an SPD matrix.

    Uses the 2x2 identity ``sqrt(M) = (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M))``.
    """
    m = check_spd(m)
    m = sym(m)
    s = np.sqrt(det(m))
    t = np.sqrt(trace(m) + 2.0 * s)
    return (m + s[..., None, None] * I2) / t[..., None, None]


def inv_sqrt_spd(m) -> np.ndarray:
    return inv(sqrt_spd(m))
