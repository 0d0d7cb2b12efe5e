"""Reference computations that avoid the package's own closed forms."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import scipy.linalg


def eigvalsh(m):
    return np.linalg.eigvalsh(0.5 * (m + np.swapaxes(m, -1, -2)))


def ell(sigma):
    s = np.asarray(sigma, float)
    a = eigvalsh(s)[..., 0]
    b = eigvalsh(np.linalg.inv(s))[..., 0]
    return np.minimum(a, b)


def gh(sigma):
    """G and H by direct substitution, eigen-free."""
    s = np.asarray(sigma, float)
    S = 0.5 * (s + s.T)
    r = math.sqrt(np.linalg.det(S))
    off = 0.5 * (s[0, 1] + s[1, 0])
    skew = 0.5 * (-s[0, 1] + s[1, 0])
    G = np.array([[s[1, 1], -off], [-off, s[0, 0]]]) / r
    H = np.array([[np.linalg.det(s), skew], [skew, 1.0]]) / r
    return G, H


def distortion_symmetric(sigma):
    """For SPD sigma the distortion is max(l_max, 1/l_min)."""
    lo, hi = eigvalsh(np.asarray(sigma, float))
    return max(hi, 1.0 / lo)


def kmin_symmetric(s1, s2):
    r = np.linalg.inv(scipy.linalg.sqrtm(np.asarray(s1, float)).real)
    lo, hi = eigvalsh(r @ np.asarray(s2, float) @ r)
    return max(math.sqrt(1.0 / lo), math.sqrt(hi))


def kmin_grid(s1, s2, steps: int = 61):
    """Coarse-to-fine grid search over two SL(2) factors ``R(a) diag(e^t, e^-t)``."""
    G1, H1 = gh(s1)
    G2, H2 = gh(s2)

    def top(Q, a, t):
        c, s = math.cos(a), math.sin(a)
        M = np.array([[c, -s], [s, c]]) @ np.diag([math.exp(t), math.exp(-t)])
        return np.linalg.eigvalsh(M.T @ Q @ M)[-1]

    def f(x):
        ab, tb, aa, ta = x
        return max(top(G1, ab, tb) * top(H1, aa, ta), top(G2, ab, tb) * top(H2, aa, ta))

    centre, width = np.zeros(4), np.array([math.pi / 2, 2.0, math.pi / 2, 2.0])
    best = f(centre)
    for _ in range(12):
        axes = [np.linspace(c - w, c + w, 7) for c, w in zip(centre, width)]
        for x in itertools.product(*axes):
            v = f(x)
            if v < best:
                best, centre = v, np.array(x)
        width = width * 0.45
    return best


def staircase_weights(K: Fraction, k0: int, n: int):
    """Carrier weights of the arithmetic staircase in exact arithmetic, from carrier ``k0``."""
    w = Fraction(1)
    out = [w]
    for k in range(k0, k0 + n):
        c, c2 = Fraction(k), Fraction(k + 1)
        t = (c2 - c) / (c2 - c / K)
        s = (c2 - c) / (c2 - c2 / K)
        w = w * (1 - t) * (1 - s)
        out.append(w)
    return out
