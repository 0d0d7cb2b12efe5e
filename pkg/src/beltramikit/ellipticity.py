"""Ellipticity constant, Beltrami distortion and integrability exponents."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import mat2
from .errors import DomainError, NotElliptic
from .translate import gh_from_sigma, sigma_to_munu

CRIT_TOL = 1e-9


class Attainment(str, enum.Enum):
    NO = "No"
    NON_SYMMETRIC_CRITICAL = "NonSymmetricCritical"
    SYMMETRIC_CRITICAL = "SymmetricCritical"


def ell(sigma) -> np.ndarray | float:
    """Largest ``lam`` with ``sigma xi.xi >= lam|xi|^2`` and ``sigma^-1 xi.xi >= lam|xi|^2``."""
    s = mat2.as_mat(sigma)
    lam_s = mat2.min_eig_sym(mat2.sym(s))
    if not np.all(lam_s > 0):
        raise NotElliptic("symmetric part of sigma is not positive definite")
    lam_inv = mat2.min_eig_sym(mat2.sym(mat2.inv(s)))
    out = np.minimum(lam_s, lam_inv)
    if not np.all(out > 0):
        raise NotElliptic("ellipticity constant is not positive")
    return out if out.ndim else float(out)


def distortion_K(sigma):
    """Beltrami distortion ``K = g h`` from the largest eigenvalues of ``G(sigma)``, ``H(sigma)``."""
    gh = gh_from_sigma(sigma)
    out = mat2.max_eig_sym(gh.G) * mat2.max_eig_sym(gh.H)
    return out if np.ndim(out) else float(out)


def distortion_K_munu(sigma):
    """Same constant via ``(1 + k) / (1 - k)`` with ``k = |mu| + |nu|``."""
    k = sigma_to_munu(sigma).k
    out = (1.0 + k) / (1.0 - k)
    return out if np.ndim(out) else float(out)


def K_bounds(lam: float) -> tuple[float, float]:
    """Worst-case distortion over the general and the symmetric ellipticity class."""
    if not 0.0 < lam <= 1.0:
        raise DomainError(f"lambda must lie in (0, 1], got {lam!r}")
    return (1.0 + math.sqrt(1.0 - lam * lam)) / lam, 1.0 / lam


def p_exponent(K: float) -> float:
    """Critical gradient exponent ``2K / (K - 1)``; ``inf`` for ``K == 1``."""
    if K < 1.0 - 1e-12:
        raise DomainError(f"distortion must be >= 1, got {K!r}")
    if K <= 1.0:
        return math.inf
    return 2.0 * K / (K - 1.0)


def critical_form(lam: float, sign: int = 1) -> np.ndarray:
    """The non-symmetric conductivity ``[[lam, b], [-b, lam]]`` with ``b = +-sqrt(1 - lam^2)``."""
    b = sign * math.sqrt(max(0.0, 1.0 - lam * lam))
    return np.array([[lam, b], [-b, lam]])


def bound_attainment(sigma, lam: float) -> Attainment:
    s = mat2.as_mat(sigma)
    e = ell(s)
    if e < lam - 1e-12:
        raise DomainError(f"ell(sigma)={e!r} is below lambda={lam!r}")
    for sign in (1, -1):
        if np.max(np.abs(s - critical_form(lam, sign))) <= CRIT_TOL:
            return Attainment.NON_SYMMETRIC_CRITICAL
    if mat2.is_symmetric(s):
        lmin = mat2.min_eig_sym(s)
        lmin_inv = mat2.min_eig_sym(mat2.sym(mat2.inv(s)))
        if abs(lmin - lam) <= CRIT_TOL or abs(lmin_inv - lam) <= CRIT_TOL:
            return Attainment.SYMMETRIC_CRITICAL
    return Attainment.NO


@dataclass(frozen=True)
class EllipticityReport:
    lam: float
    k: float
    K: float
    pK: float
    Klambda: float
    KlambdaSym: float
    attainsBound: Attainment

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "k": self.k,
            "K": self.K,
            "pK": self.pK,
            "Klambda": self.Klambda,
            "KlambdaSym": self.KlambdaSym,
            "attainsBound": self.attainsBound.value,
        }


def ellipticity_report(sigma, lam: float | None = None) -> EllipticityReport:
    """Summarise one conductivity; ``lam`` defaults to ``ell(sigma)``."""
    s = mat2.as_mat(sigma)
    if lam is None:
        lam = ell(s)
    lam = min(float(lam), 1.0)
    k = float(sigma_to_munu(s).k)
    K = distortion_K(s)
    Kl, Kls = K_bounds(lam)
    return EllipticityReport(
        lam=lam,
        k=k,
        K=K,
        pK=p_exponent(K),
        Klambda=Kl,
        KlambdaSym=Kls,
        attainsBound=bound_attainment(s, lam),
    )
