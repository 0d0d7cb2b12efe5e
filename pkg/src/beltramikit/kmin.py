"""Minimal Beltrami distortion of a two-phase conductivity.

``K^min`` is the smallest distortion reachable by composing the Beltrami
system with linear changes of variables ``A, B in SL(2)`` in target and
domain. It is computed three independent ways here: by normalising phase 1
to the identity metric, by a closed formula in the entries of the two
conductivities, and by direct numerical minimisation over SL(2) x SL(2).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import mat2
from .ellipticity import K_bounds, critical_form, ell, p_exponent
from .errors import BudgetExhausted, DomainError, NonSymmetric, NotTight, NumericalError
from .translate import gh_from_sigma

TIGHT_TOL = 1e-9
CRIT_TOL = 1e-9


@dataclass(frozen=True)
class TwoPhase:
    """A pair of elliptic conductivities with their (G, H) metrics.

    ``sigma1`` and ``sigma2`` may also be stacks of shape ``(..., 2, 2)``;
    every derived quantity then broadcasts.
    """

    sigma1: np.ndarray
    sigma2: np.ndarray
    G1: np.ndarray = field(init=False, repr=False)
    H1: np.ndarray = field(init=False, repr=False)
    G2: np.ndarray = field(init=False, repr=False)
    H2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s1, s2 = mat2.as_mat(self.sigma1), mat2.as_mat(self.sigma2)
        object.__setattr__(self, "sigma1", s1)
        object.__setattr__(self, "sigma2", s2)
        ell(s1), ell(s2)  # raises NotElliptic
        gh1, gh2 = gh_from_sigma(s1), gh_from_sigma(s2)
        object.__setattr__(self, "G1", gh1.G)
        object.__setattr__(self, "H1", gh1.H)
        object.__setattr__(self, "G2", gh2.G)
        object.__setattr__(self, "H2", gh2.H)

    @classmethod
    def from_gh(cls, G1, H1, G2, H2) -> "TwoPhase":
        from .translate import GHPair, sigma_from_gh

        s1 = sigma_from_gh(GHPair(np.asarray(G1, float), np.asarray(H1, float)))
        s2 = sigma_from_gh(GHPair(np.asarray(G2, float), np.asarray(H2, float)))
        return cls(s1, s2)

    @property
    def g1(self):
        return mat2.max_eig_sym(self.G1)

    @property
    def h1(self):
        return mat2.max_eig_sym(self.H1)

    @property
    def g2(self):
        return mat2.max_eig_sym(self.G2)

    @property
    def h2(self):
        return mat2.max_eig_sym(self.H2)

    @property
    def K(self):
        """Distortion of the composite: the worse of the two phases."""
        return np.maximum(self.g1 * self.h1, self.g2 * self.h2)

    @property
    def lam(self):
        """Ellipticity of the composite, governed by the worse phase."""
        return np.minimum(ell(self.sigma1), ell(self.sigma2))


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def khat(tp: TwoPhase):
    """Geometric mean ``sqrt(g1 h1 g2 h2)`` of the per-phase distortions."""
    return _scalar(np.sqrt(tp.g1 * tp.h1 * tp.g2 * tp.h2))


def kmin_normalized(tp: TwoPhase):
    """K^min after mapping phase 1 to the identity metrics.

    With ``B = G1^{-1/2}`` and ``A = H1^{-1/2}`` phase 1 becomes ``(I, I)``
    and the answer is ``sqrt(g2~ h2~)`` for the transformed phase 2.
    """
    B = mat2.inv_sqrt_spd(tp.G1)
    A = mat2.inv_sqrt_spd(tp.H1)
    g2t = mat2.max_eig_sym(mat2.sym(B @ tp.G2 @ B))
    h2t = mat2.max_eig_sym(mat2.sym(A @ tp.H2 @ A))
    return _scalar(np.sqrt(g2t * h2t))


def _larger_root(t, what: str):
    # larger root of x^2 - t x + 1 = 0 (t >= 2)
    if np.any(t < 2.0 - 1e-12):
        raise NumericalError(f"{what} = {np.min(t)!r} < 2")
    t = np.maximum(t, 2.0)
    return 0.5 * (t + np.sqrt(t * t - 4.0))


def kmin_explicit(sigma1, sigma2):
    """Closed-form K^min in the entries of the two conductivities.

    Returns ``(Kmin, m, n)`` where ``m = tr(Sigma2 Adj Sigma1)`` over the
    symmetric parts and ``n = tr(H2 Adj H1)``.
    """
    s1, s2 = mat2.as_mat(sigma1), mat2.as_mat(sigma2)
    ell(s1), ell(s2)
    d1 = mat2.det(mat2.sym(s1))
    d2 = mat2.det(mat2.sym(s2))
    rd = np.sqrt(d1 * d2)
    m = (
        s2[..., 0, 0] * s1[..., 1, 1]
        + s1[..., 0, 0] * s2[..., 1, 1]
        - 0.5 * (s2[..., 0, 1] + s2[..., 1, 0]) * (s1[..., 0, 1] + s1[..., 1, 0])
    )
    n = (
        mat2.det(s1)
        + mat2.det(s2)
        - 0.5 * (s1[..., 1, 0] - s1[..., 0, 1]) * (s2[..., 1, 0] - s2[..., 0, 1])
    ) / rd
    g = _larger_root(m / rd, "m / sqrt(d1 d2)")
    h = _larger_root(n, "n")
    return _scalar(np.sqrt(g * h)), _scalar(m), _scalar(n)


def kmin_symmetric(sigma1, sigma2) -> float:
    """K^min for symmetric phases: ``max(sqrt(1/l1), sqrt(l2))``.

    ``l1 <= l2`` are the eigenvalues of ``sigma1^{-1/2} sigma2 sigma1^{-1/2}``.
    """
    s1, s2 = mat2.as_mat(sigma1), mat2.as_mat(sigma2)
    if not (np.all(mat2.is_symmetric(s1)) and np.all(mat2.is_symmetric(s2))):
        raise NonSymmetric("both phases must be symmetric")
    r = mat2.inv_sqrt_spd(s1)
    l1, l2 = mat2.eigvals_sym(mat2.sym(r @ s2 @ r))
    return _scalar(np.maximum(np.sqrt(1.0 / l1), np.sqrt(l2)))


# --- numeric oracle -------------------------------------------------------

T_CLAMP = 6.0


def sl2_param(alpha: float, t: float, beta: float = 0.0) -> np.ndarray:
    """``R(alpha) diag(e^t, e^-t) R(beta)``; covers SL(2) up to sign."""
    return mat2.rotation(alpha) @ mat2.diag(math.exp(t), math.exp(-t)) @ mat2.rotation(beta)


def _sym3(m) -> tuple[float, float, float]:
    return float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])), float(m[1, 1])


def _log_max_eig(q, alpha: float, t: float) -> float:
    # log of the largest eigenvalue of M^T Q M, M = R(alpha) diag(e^t, e^-t);
    # det = 1 so it is acosh(tr / 2), and tr(M^T Q M) = tr(Q M M^T).
    c, s = math.cos(alpha), math.sin(alpha)
    e, f = math.exp(2.0 * t), math.exp(-2.0 * t)
    tr = q[0] * (c * c * e + s * s * f) + 2.0 * q[1] * c * s * (e - f) + q[2] * (s * s * e + c * c * f)
    half = 0.5 * tr
    return math.acosh(half) if half > 1.0 else 0.0


@dataclass(frozen=True)
class OracleResult:
    value: float
    B: np.ndarray
    A: np.ndarray
    converged: bool
    evaluations: int


def _seed_points(n: int = 8) -> list[np.ndarray]:
    rng = np.random.default_rng(20240229)
    lo = np.array([-1.6, -1.5, -1.6, -1.5])
    pts = [np.zeros(4)] + list(rng.uniform(lo, -lo, (n - 1, 4)))
    return pts


class _BudgetSpent(Exception):
    pass


def kmin_numeric_oracle(tp: TwoPhase, budget: int = 60_000) -> OracleResult:
    """Minimise ``max_i g_i(B) h_i(A)`` over ``A, B in SL(2)`` by Nelder-Mead.

    The right rotation factor of each group element does not change the
    eigenvalues of ``M^T Q M``, so each of ``A``, ``B`` is searched over
    ``(alpha, t)`` only. Eight deterministic starting points are relaxed
    coarsely, then the best is polished by simplex restarts of shrinking size.
    The search works on the logarithm of the objective.
    """
    if budget < 1:
        raise DomainError("budget must be a positive evaluation count")
    qs = tuple(_sym3(m) for m in (tp.G1, tp.H1, tp.G2, tp.H2))
    g1q, h1q, g2q, h2q = qs
    evals = 0
    best = [np.zeros(4), math.inf]

    def obj(x):
        nonlocal evals
        if evals >= budget:
            raise _BudgetSpent
        evals += 1
        ab, tb, aa, ta = x
        tb = max(-T_CLAMP, min(T_CLAMP, tb))
        ta = max(-T_CLAMP, min(T_CLAMP, ta))
        f = max(
            _log_max_eig(g1q, ab, tb) + _log_max_eig(h1q, aa, ta),
            _log_max_eig(g2q, ab, tb) + _log_max_eig(h2q, aa, ta),
        )
        if f < best[1]:
            best[0], best[1] = np.array(x, dtype=float), f
        return f

    def run(x0, size, xatol, fatol, maxfev):
        simplex = x0 + size * np.vstack([np.zeros(4), np.eye(4)])
        try:
            r = minimize(
                obj,
                x0,
                method="Nelder-Mead",
                options=dict(xatol=xatol, fatol=fatol, maxfev=maxfev, initial_simplex=simplex),
            )
            return r.x, float(r.fun)
        except _BudgetSpent:
            return best[0], best[1]

    starts = [run(x0, 0.3, 1e-4, 1e-8, 800) for x0 in _seed_points() if evals < budget]
    x, f = min(starts, key=lambda xf: xf[1]) if starts else (best[0], best[1])
    size, converged = 0.05, False
    while evals < budget:
        xn, fn = run(x, size, 1e-11, 1e-14, 2000)
        if fn < f - 1e-14:
            x, f = xn, fn
        elif size < 1e-6:
            converged = True
            break
        size *= 0.3
    x, f = best  # lowest value seen by any run
    if not converged:
        warnings.warn(f"K^min search stopped after {evals} evaluations", BudgetExhausted, stacklevel=2)
    ab, tb, aa, ta = x
    return OracleResult(
        value=math.exp(f),
        B=sl2_param(ab, float(np.clip(tb, -T_CLAMP, T_CLAMP))),
        A=sl2_param(aa, float(np.clip(ta, -T_CLAMP, T_CLAMP))),
        converged=converged,
        evaluations=evals,
    )


def transformed_distortions(tp: TwoPhase, A, B) -> tuple[float, float]:
    """Per-phase distortions ``g_i h_i`` after ``G -> B^T G B``, ``H -> A^T H A``."""
    A, B = np.asarray(A, float), np.asarray(B, float)
    out = []
    for G, H in ((tp.G1, tp.H1), (tp.G2, tp.H2)):
        g = mat2.max_eig_sym(mat2.sym(B.T @ G @ B))
        h = mat2.max_eig_sym(mat2.sym(A.T @ H @ A))
        out.append(float(g * h))
    return out[0], out[1]


# --- tightness and criticality ------------------------------------------


def _canon_columns(R: np.ndarray) -> np.ndarray:
    # flip each column so its largest-magnitude component is positive
    R = R.copy()
    for j in range(2):
        if R[np.argmax(np.abs(R[:, j])), j] < 0:
            R[:, j] = -R[:, j]
    return R


def _diagonalizer(Q1, Q2, q1: float, q2: float) -> np.ndarray:
    # orthogonal A with A^T Q1 A = diag(q1, 1/q1), A^T Q2 A = diag(1/q2, q2)
    if q1 > 1.0 + 1e-12:
        _, _, R = mat2.eig_sym(mat2.sym(Q1))
        A = R[:, ::-1]
    elif q2 > 1.0 + 1e-12:
        _, _, R = mat2.eig_sym(mat2.sym(Q2))
        A = R
    else:
        A = np.eye(2)
    return _canon_columns(A)


def simultaneous_diagonalize(tp: TwoPhase, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal ``(A, B)`` putting both phases in opposite diagonal form.

    Only exists when ``K^min == K-hat``; otherwise raises :class:`NotTight`.
    ``A`` acts on the G side and ``B`` on the H side.
    """
    km = kmin_normalized(tp)
    kh = khat(tp)
    if abs(km - kh) > TIGHT_TOL * kh:
        raise NotTight(km, kh)
    g1, g2, h1, h2 = float(tp.g1), float(tp.g2), float(tp.h1), float(tp.h2)
    A = _diagonalizer(tp.G1, tp.G2, g1, g2)
    B = _diagonalizer(tp.H1, tp.H2, h1, h2)
    checks = (
        (A.T @ tp.G1 @ A, mat2.diag(g1, 1 / g1)),
        (A.T @ tp.G2 @ A, mat2.diag(1 / g2, g2)),
        (B.T @ tp.H1 @ B, mat2.diag(h1, 1 / h1)),
        (B.T @ tp.H2 @ B, mat2.diag(1 / h2, h2)),
    )
    for got, want in checks:
        if np.max(np.abs(got - want)) > tol:
            raise NumericalError("tight pair did not diagonalize simultaneously")
    return A, B


class CriticalClass(str, enum.Enum):
    NON_CRITICAL = "NonCritical"
    NON_SYMMETRIC_CRITICAL = "NonSymmetricCritical"
    SYMMETRIC_CRITICAL = "SymmetricCritical"


@dataclass(frozen=True)
class KminReport:
    K: float
    Khat: float
    Kmin: float
    pKmin: float
    m: float
    n: float
    lam: float
    criticalClass: CriticalClass
    diagA: np.ndarray | None = None
    diagB: np.ndarray | None = None

    def to_dict(self) -> dict:
        d = {
            "K": self.K,
            "Khat": self.Khat,
            "Kmin": self.Kmin,
            "pKmin": self.pKmin,
            "m": self.m,
            "n": self.n,
            "lambda": self.lam,
            "criticalClass": self.criticalClass.value,
            "diagA": None if self.diagA is None else self.diagA.tolist(),
            "diagB": None if self.diagB is None else self.diagB.tolist(),
        }
        return d


def _is_nonsymmetric_critical(s1, s2, lam: float) -> bool:
    for sign in (1, -1):
        c = critical_form(lam, sign)
        if np.max(np.abs(s1 - c)) <= CRIT_TOL and np.max(np.abs(s2 - c.T)) <= CRIT_TOL:
            return True
    return False


def _common_axis(s_hi, s_lo, lam: float) -> bool:
    # is there a unit w with s_hi w = w / lam and s_lo w = lam w ?
    cands = []
    for s in (s_hi, s_lo):
        _, _, R = mat2.eig_sym(mat2.sym(s))
        cands.extend([R[:, 0], R[:, 1]])
    scale = max(mat2.frob(s_hi), mat2.frob(s_lo))
    for w in cands:
        if (
            np.linalg.norm(s_hi @ w - w / lam) <= CRIT_TOL * scale
            and np.linalg.norm(s_lo @ w - lam * w) <= CRIT_TOL * scale
        ):
            return True
    return False


def classify_critical(sigma1, sigma2) -> KminReport:
    """Full K^min report with the criticality class of the pair.

    The pair's ellipticity is the smaller of the two phase constants.
    """
    tp = TwoPhase(sigma1, sigma2)
    s1, s2 = tp.sigma1, tp.sigma2
    lam = float(min(ell(s1), ell(s2)))
    km, m, n = kmin_explicit(s1, s2)
    kh = khat(tp)
    Kl, Kls = K_bounds(min(lam, 1.0))
    cls = CriticalClass.NON_CRITICAL
    if abs(km - Kl) <= CRIT_TOL and (
        _is_nonsymmetric_critical(s1, s2, lam) or _is_nonsymmetric_critical(s2, s1, lam)
    ):
        cls = CriticalClass.NON_SYMMETRIC_CRITICAL
    elif (
        mat2.is_symmetric(s1)
        and mat2.is_symmetric(s2)
        and abs(km - Kls) <= CRIT_TOL
        and (_common_axis(s1, s2, lam) or _common_axis(s2, s1, lam))
    ):
        cls = CriticalClass.SYMMETRIC_CRITICAL
    A = B = None
    try:
        A, B = simultaneous_diagonalize(tp)
    except NotTight:
        pass
    return KminReport(
        K=float(tp.K),
        Khat=kh,
        Kmin=km,
        pKmin=p_exponent(km),
        m=m,
        n=n,
        lam=lam,
        criticalClass=cls,
        diagA=A,
        diagB=B,
    )
