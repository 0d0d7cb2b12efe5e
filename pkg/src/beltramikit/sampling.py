"""Seeded generators of random elliptic conductivities for sweeps and verification."""

from __future__ import annotations

import numpy as np

from . import mat2
from .ellipticity import ell


def _candidates(rng: np.random.Generator, n: int, spread: float, skew: float) -> np.ndarray:
    q1 = mat2.rotation(rng.uniform(-np.pi, np.pi, n))
    q2 = mat2.rotation(rng.uniform(-np.pi, np.pi, n))
    ls = np.exp(rng.uniform(-spread, spread, (n, 2)))
    c = rng.uniform(-skew, skew, n)
    return q1 @ mat2.diag(ls[:, 0], ls[:, 1]) @ q2 + c[:, None, None] * mat2.J


def random_sigma(
    rng: np.random.Generator,
    n: int,
    min_ell: float = 0.05,
    spread: float = 2.0,
    skew: float = 1.5,
) -> np.ndarray:
    """Draw ``n`` conductivities ``Q1 diag(l1, l2) Q2 + c J`` with ``ell >= min_ell``.

    Candidates failing the ellipticity bounds are rejected and redrawn, so
    non-symmetric phases are well represented.
    """
    out: list[np.ndarray] = []
    have = 0
    while have < n:
        cand = _candidates(rng, max(2 * (n - have), 16), spread, skew)
        ok = mat2.min_eig_sym(mat2.sym(cand)) > 0
        cand = cand[ok]
        if len(cand):
            cand = cand[ell(cand) >= min_ell]
        out.append(cand)
        have += len(cand)
    return np.concatenate(out)[:n]


def random_spd(rng: np.random.Generator, n: int, min_ell: float = 0.05, spread: float = 2.0) -> np.ndarray:
    """Symmetric positive definite conductivities with ``ell >= min_ell``."""
    out: list[np.ndarray] = []
    have = 0
    while have < n:
        m = max(2 * (n - have), 16)
        r = mat2.rotation(rng.uniform(-np.pi, np.pi, m))
        ls = np.exp(rng.uniform(-spread, spread, (m, 2)))
        cand = r @ mat2.diag(ls[:, 0], ls[:, 1]) @ mat2.transpose(r)
        cand = mat2.sym(cand)
        cand = cand[ell(cand) >= min_ell]
        out.append(cand)
        have += len(cand)
    return np.concatenate(out)[:n]


def random_pairs(rng: np.random.Generator, n: int, min_ell: float = 0.05) -> np.ndarray:
    """Array of shape ``(n, 2, 2, 2)``: ``pairs[i, 0]`` and ``pairs[i, 1]`` are the two phases."""
    s = random_sigma(rng, 2 * n, min_ell=min_ell)
    return s.reshape(n, 2, 2, 2)
