import math

import numpy as np
import pytest

from beltramikit import mat2
from beltramikit.errors import NotElliptic
from beltramikit.sampling import random_sigma
from beltramikit.translate import (
    BeltramiPair,
    GHPair,
    gh_from_sigma,
    gh_to_munu,
    munu_to_gh,
    munu_to_sigma,
    sigma_from_gh,
    sigma_to_munu,
    stream_residual,
)

from . import oracles

R3 = math.sqrt(3.0)
ROT = np.array([[0.5, math.sqrt(0.75)], [-math.sqrt(0.75), 0.5]])


def test_munu_examples():
    p = sigma_to_munu(np.eye(2))
    assert p.mu == 0 and p.nu == 0
    p = sigma_to_munu(np.diag([2.0, 0.5]))
    assert p.mu == pytest.approx(-1.5 / 4.5)
    assert p.nu == pytest.approx(0.0)
    p = sigma_to_munu(ROT)
    assert abs(p.mu) < 1e-15
    assert abs(p.nu) == pytest.approx(1 / R3)
    assert p.k == pytest.approx(1 / R3)


def test_munu_to_sigma_examples():
    assert np.allclose(munu_to_sigma(BeltramiPair(0j, 0j)), np.eye(2))
    assert np.allclose(munu_to_sigma(BeltramiPair(-1 / 3 + 0j, 0j)), np.diag([2.0, 0.5]))
    with pytest.raises(NotElliptic):
        munu_to_sigma(BeltramiPair(0.6 + 0j, 0.5j))


def test_gh_examples():
    gh = gh_from_sigma(np.diag([2.0, 0.5]))
    assert np.allclose(gh.G, np.diag([0.5, 2.0]))
    assert np.allclose(gh.H, np.eye(2))
    gh = gh_from_sigma(np.eye(2))
    assert np.allclose(gh.G, np.eye(2)) and np.allclose(gh.H, np.eye(2))
    # off-diagonal sign follows (sigma21 - sigma12) / 2 / sqrt(det sigma^S)
    gh = gh_from_sigma(ROT)
    assert np.allclose(gh.G, np.eye(2), atol=1e-15)
    assert np.allclose(gh.H, [[2.0, -R3], [-R3, 2.0]])
    assert mat2.det(gh.H) == pytest.approx(1.0)


def test_gh_matches_direct_substitution(rng):
    for s in random_sigma(rng, 200):
        G, H = oracles.gh(s)
        gh = gh_from_sigma(s)
        assert np.allclose(gh.G, G, rtol=1e-13) and np.allclose(gh.H, H, rtol=1e-13)


def test_sigma_from_gh_examples():
    assert np.allclose(sigma_from_gh(GHPair(np.eye(2), np.eye(2))), np.eye(2))
    assert np.allclose(sigma_from_gh(GHPair(np.diag([0.5, 2.0]), np.eye(2))), np.diag([2.0, 0.5]))
    assert np.allclose(sigma_from_gh(GHPair(np.eye(2), np.array([[2.0, -R3], [-R3, 2.0]]))), ROT)
    assert np.allclose(sigma_from_gh(GHPair(np.eye(2), np.array([[2.0, R3], [R3, 2.0]]))), ROT.T)


def test_round_trips(rng):
    s = random_sigma(rng, 10_000, min_ell=0.05)
    scale = mat2.frob(s)
    p = sigma_to_munu(s)
    assert np.max(mat2.frob(munu_to_sigma(p) - s) / scale) <= 1e-11
    gh = gh_from_sigma(s)
    assert np.max(mat2.frob(sigma_from_gh(gh) - s) / scale) <= 1e-11
    q = gh_to_munu(munu_to_gh(p))
    assert np.max(np.abs(q.mu - p.mu) + np.abs(q.nu - p.nu)) <= 1e-11


def test_gh_are_unimodular_spd(rng):
    s = random_sigma(rng, 10_000)
    gh = gh_from_sigma(s)
    assert np.max(np.abs(mat2.det(gh.G) - 1)) <= 1e-10
    assert np.max(np.abs(mat2.det(gh.H) - 1)) <= 1e-10
    assert np.all(mat2.min_eig_sym(gh.G) > 0) and np.all(mat2.min_eig_sym(gh.H) > 0)


def test_consistency_triangle(rng):
    s = random_sigma(rng, 10_000)
    a = gh_from_sigma(s)
    b = munu_to_gh(sigma_to_munu(s))
    assert np.max(mat2.frob(a.G - b.G) / mat2.frob(a.G)) <= 1e-11
    assert np.max(mat2.frob(a.H - b.H) / mat2.frob(a.H)) <= 1e-11


def test_not_elliptic():
    with pytest.raises(NotElliptic):
        gh_from_sigma(np.diag([1.0, -1.0]))
    with pytest.raises(NotElliptic):
        sigma_to_munu(np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_stream_residual_examples():
    assert stream_residual([1, 0], [0, 2], np.diag([2.0, 0.5])) == 0.0
    assert stream_residual([0, 0], [0, 0], ROT) == 0.0
    assert stream_residual([1, 0], [1, 0], np.eye(2)) == pytest.approx(math.sqrt(2))


def test_stream_residual_vanishes_for_coupled_gradients(rng):
    for s in random_sigma(rng, 100):
        gu = rng.normal(size=2)
        gv = mat2.J @ s @ gu
        assert stream_residual(gu, gv, s) <= 1e-12 * (1 + np.linalg.norm(gv))
