"""Finite element experiments for ``div(sigma grad u) = 0`` on two-phase grids.

The unit square is split into ``n x n`` square cells, each carrying phase 1
or phase 2. The solution is approximated by bilinear (Q1) elements with
affine Dirichlet data ``u = v1 x + v2 y`` and a cellwise constant, possibly
non-symmetric, conductivity. Everything here produces trend data; none of it
can exhibit a genuinely infinite integral.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import mat2
from .ellipticity import ell
from .errors import DomainError, SolverFailure
from .kmin import TwoPhase

RESIDUAL_TOL = 1e-10
GAUSS = 0.5 + np.array([-1.0, 1.0]) / (2.0 * math.sqrt(3.0))


# --- geometry ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Phase labels ``labels[iy, ix]`` in {1, 2} on an ``n x n`` cell grid."""

    labels: np.ndarray
    pair: TwoPhase
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2 or lab.shape[0] != lab.shape[1]:
            raise DomainError("labels must be a square array")
        if lab.shape[0] < 8:
            raise DomainError("grid must have at least 8 cells per side")
        if not np.all((lab == 1) | (lab == 2)):
            raise DomainError("labels must be 1 or 2")
        object.__setattr__(self, "labels", lab.astype(np.int8))
        self.labels.setflags(write=False)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def require_two_phases(self) -> "PhaseGrid":
        if not (np.any(self.labels == 1) and np.any(self.labels == 2)):
            raise DomainError("both phases must be present")
        return self

    def cell_sigma(self) -> np.ndarray:
        """Per-cell conductivity, shape ``(n, n, 2, 2)``."""
        s = np.stack([np.asarray(self.pair.sigma1), np.asarray(self.pair.sigma2)])
        return s[self.labels - 1]


def _centers(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def single_phase(sigma, n: int) -> PhaseGrid:
    s = mat2.as_mat(sigma)
    return PhaseGrid(np.ones((n, n), dtype=np.int8), TwoPhase(s, s), "single")


def checkerboard(pair: TwoPhase, n: int, tiles: int = 2) -> PhaseGrid:
    """``tiles x tiles`` board with physical tile size ``1/tiles``, independent of ``n``."""
    if tiles < 2:
        raise DomainError("a checkerboard needs at least 2 tiles per side")
    c = np.floor(_centers(n) * tiles).astype(int)
    lab = 1 + (c[:, None] + c[None, :]) % 2
    return PhaseGrid(lab, pair, "checkerboard", {"tiles": tiles}).require_two_phases()


def layered(pair: TwoPhase, n: int, normal: str = "x", fraction: float = 0.5, layers: int = 8) -> PhaseGrid:
    """Rank-one laminate: ``layers`` periods of phase 1 (share ``fraction``) then phase 2.

    ``normal`` is the axis the layers are stacked along.
    """
    if normal not in ("x", "y"):
        raise DomainError("normal must be 'x' or 'y'")
    if not 0.0 < fraction < 1.0:
        raise DomainError("fraction must lie in (0, 1)")
    frac = np.modf(_centers(n) * layers)[0]
    row = np.where(frac < fraction, 1, 2)
    lab = np.broadcast_to(row[None, :] if normal == "x" else row[:, None], (n, n))
    return PhaseGrid(lab, pair, "layered", {"normal": normal, "fraction": fraction, "layers": layers}).require_two_phases()


def random_grid(pair: TwoPhase, n: int, seed: int, fraction: float = 0.5, tiles: int = 16) -> PhaseGrid:
    """Seeded random ``tiles x tiles`` pattern sampled onto the cell grid."""
    rng = np.random.default_rng(seed)
    coarse = np.where(rng.random((tiles, tiles)) < fraction, 1, 2)
    c = np.floor(_centers(n) * tiles).astype(int)
    lab = coarse[np.ix_(c, c)]
    params = {"seed": seed, "fraction": fraction, "tiles": tiles}
    return PhaseGrid(lab, pair, "random", params).require_two_phases()


GEOMETRIES = {
    "checkerboard": checkerboard,
    "layered": layered,
    "random": random_grid,
}


def make_grid(kind: str, pair: TwoPhase, n: int, **kw) -> PhaseGrid:
    if kind == "single":
        return single_phase(pair.sigma1, n)
    try:
        factory = GEOMETRIES[kind]
    except KeyError:
        raise DomainError(f"unknown geometry {kind!r}") from None
    return factory(pair, n, **kw)


# --- element matrices ------------------------------------------------------

# local node order: (0,0), (1,0), (0,1), (1,1) in reference coordinates


def _shape_grads(xi: float, eta: float) -> np.ndarray:
    """Gradients of the four bilinear shape functions, shape ``(4, 2)``, unit cell."""
    return np.array(
        [
            [-(1 - eta), -(1 - xi)],
            [1 - eta, -xi],
            [-eta, 1 - xi],
            [eta, xi],
        ]
    )


def _basis_stiffness() -> np.ndarray:
    # B[i, j, a, b] = int d_j N_b d_i N_a over the cell; independent of h in 2D
    B = np.zeros((2, 2, 4, 4))
    for xi in GAUSS:
        for eta in GAUSS:
            g = _shape_grads(xi, eta)
            B += 0.25 * np.einsum("ai,bj->ijab", g, g)
    return B


_BASIS = _basis_stiffness()


def element_matrix(sigma) -> np.ndarray:
    """``K[a, b] = int (sigma grad N_b) . grad N_a`` on one square cell."""
    return np.einsum("ij,ijab->ab", mat2.as_mat(sigma), _BASIS)


def _cell_nodes(n: int) -> np.ndarray:
    iy, ix = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    base = (iy * (n + 1) + ix).ravel()
    return np.stack([base, base + 1, base + n + 1, base + n + 2], axis=1)


def _boundary_mask(n: int) -> np.ndarray:
    m = np.zeros((n + 1, n + 1), dtype=bool)
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
    return m.ravel()


# --- solve -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FieldSolution:
    """Nodal values ``u[iy, ix]`` and cell-centre gradients ``grad[iy, ix, :]``."""

    grid: PhaseGrid
    v: tuple[float, float]
    u: np.ndarray
    grad: np.ndarray
    residual: float

    @property
    def n(self) -> int:
        return self.grid.n

    def gauss_gradients(self) -> np.ndarray:
        """Gradients at the 2x2 Gauss points, shape ``(n, n, 4, 2)``."""
        u, h = self.u, self.grid.h
        u00, u10, u01, u11 = u[:-1, :-1], u[:-1, 1:], u[1:, :-1], u[1:, 1:]
        out = []
        for eta in GAUSS:
            for xi in GAUSS:
                ux = ((u10 - u00) * (1 - eta) + (u11 - u01) * eta) / h
                uy = ((u01 - u00) * (1 - xi) + (u11 - u10) * xi) / h
                out.append(np.stack([ux, uy], axis=-1))
        return np.stack(out, axis=2)

    def flux(self) -> np.ndarray:
        """Cell-centre ``sigma grad u``."""
        return np.einsum("...ij,...j->...i", self.grid.cell_sigma(), self.grad)

    def to_csv(self) -> str:
        n, h = self.n, self.grid.h
        c = _centers(n)
        uc = 0.25 * (self.u[:-1, :-1] + self.u[:-1, 1:] + self.u[1:, :-1] + self.u[1:, 1:])
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(("x", "y", "u", "ux", "uy", "phase"))
        for iy in range(n):
            for ix in range(n):
                wr.writerow(
                    [f"{x:.17g}" for x in (c[ix], c[iy], uc[iy, ix], self.grad[iy, ix, 0], self.grad[iy, ix, 1])]
                    + [int(self.grid.labels[iy, ix])]
                )
        return buf.getvalue()


def _check_elliptic(pair: TwoPhase) -> None:
    for s in (pair.sigma1, pair.sigma2):
        ell(s)  # raises NotElliptic


def solve(grid: PhaseGrid, v=(1.0, 0.0)) -> FieldSolution:
    """Q1 solution with boundary values ``v1 x + v2 y``.

    The interior block of the (non-symmetric in general) stiffness matrix is
    factorised with a sparse LU; the algebraic residual is checked against
    ``1e-10`` relative to the right-hand side.
    """
    _check_elliptic(grid.pair)
    n = grid.n
    v1, v2 = float(v[0]), float(v[1])
    Ke = np.stack([element_matrix(grid.pair.sigma1), element_matrix(grid.pair.sigma2)])
    nodes = _cell_nodes(n)
    vals = Ke[grid.labels.ravel() - 1]
    rows = np.repeat(nodes, 4, axis=1).ravel()
    cols = np.tile(nodes, (1, 4)).ravel()
    N = (n + 1) ** 2
    Kmat = sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(N, N))

    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    g = (v1 * X + v2 * Y).ravel()
    bmask = _boundary_mask(n)
    inner = np.flatnonzero(~bmask)
    bnd = np.flatnonzero(bmask)
    A_ii = Kmat[inner][:, inner].tocsc()
    rhs = -(Kmat[inner][:, bnd] @ g[bnd])
    try:
        lu = spla.splu(A_ii)
        ui = lu.solve(rhs)
    except RuntimeError as exc:
        raise SolverFailure(f"sparse factorisation failed: {exc}") from exc
    scale = max(float(np.linalg.norm(rhs)), np.finfo(float).tiny)
    res = float(np.linalg.norm(A_ii @ ui - rhs)) / scale
    if not np.all(np.isfinite(ui)) or res > RESIDUAL_TOL:
        # one step of iterative refinement before giving up
        ui = ui + lu.solve(rhs - A_ii @ ui)
        res = float(np.linalg.norm(A_ii @ ui - rhs)) / scale
        if not np.all(np.isfinite(ui)) or res > RESIDUAL_TOL:
            raise SolverFailure(f"relative residual {res:.3e} exceeds {RESIDUAL_TOL:g}")
    u = g.copy()
    u[inner] = ui
    u = u.reshape(n + 1, n + 1)
    h = grid.h
    ux = 0.5 * ((u[:-1, 1:] - u[:-1, :-1]) + (u[1:, 1:] - u[1:, :-1])) / h
    uy = 0.5 * ((u[1:, :-1] - u[:-1, :-1]) + (u[1:, 1:] - u[:-1, 1:])) / h
    return FieldSolution(grid, (v1, v2), u, np.stack([ux, uy], axis=-1), res)


# --- diagnostics -------------------------------------------------------------


@dataclass(frozen=True)
class GradientTail:
    n: int
    norms: dict
    bin_edges: np.ndarray
    bin_mass: np.ndarray

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "norms": {_pkey(p): v for p, v in self.norms.items()},
            "histogram": {"edges": self.bin_edges.tolist(), "mass": self.bin_mass.tolist()},
        }

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(("lo", "hi", "mass"))
        for lo, hi, m in zip(self.bin_edges[:-1], self.bin_edges[1:], self.bin_mass):
            wr.writerow([f"{lo:.17g}", f"{hi:.17g}", f"{m:.17g}"])
        return buf.getvalue()


def _pkey(p: float) -> str:
    return repr(float(p))


def lp_norm(sol: FieldSolution, p: float) -> float:
    """``(int |grad u|^p)^(1/p)`` by 2x2 Gauss quadrature; ``p = inf`` gives the max."""
    mag = np.linalg.norm(sol.gauss_gradients(), axis=-1)
    if math.isinf(p):
        return float(mag.max())
    w = 0.25 * sol.grid.h**2
    return float((w * np.sum(mag**p)) ** (1.0 / p))


def gradient_tail(sol: FieldSolution, ps=(2.0, 4.0), bins: int = 40) -> GradientTail:
    """``L^p`` norms of the gradient and an area-weighted histogram of ``|grad u|``.

    Histogram bins are logarithmic between the smallest and largest nonzero
    cell-centre magnitudes.
    """
    norms = {float(p): lp_norm(sol, float(p)) for p in ps}
    mag = np.linalg.norm(sol.grad, axis=-1).ravel()
    pos = mag[mag > 0]
    if len(pos) and pos.max() > pos.min() * (1 + 1e-12):
        edges = np.geomspace(pos.min(), pos.max(), bins + 1)
    elif len(pos):
        edges = np.array([pos.min() * 0.5, pos.max() * 2.0])
    else:
        edges = np.array([0.0, 1.0])
    mass, _ = np.histogram(mag, bins=edges)
    return GradientTail(sol.n, norms, edges, mass * sol.grid.h**2)


@dataclass(frozen=True)
class StreamField:
    v: np.ndarray
    curl_residual: float


def stream_reconstruct(sol: FieldSolution) -> StreamField:
    """Integrate ``grad v = J sigma grad u`` along grid lines.

    Edge increments use the average of the adjacent cell-centre fluxes; the
    reconstruction walks the bottom row and then every column. The relative
    root-mean-square circulation around cells measures how far the discrete
    flux is from exactly conservative.
    """
    n, h = sol.n, sol.grid.h
    F = sol.flux() @ mat2.J.T  # cell-centre grad v
    # horizontal edges: (n+1) rows of n edges; vertical: n rows of (n+1) edges
    Fx = np.zeros((n + 1, n))
    Fx[1:-1] = 0.5 * (F[:-1, :, 0] + F[1:, :, 0])
    Fx[0], Fx[-1] = F[0, :, 0], F[-1, :, 0]
    Fy = np.zeros((n, n + 1))
    Fy[:, 1:-1] = 0.5 * (F[:, :-1, 1] + F[:, 1:, 1])
    Fy[:, 0], Fy[:, -1] = F[:, 0, 1], F[:, -1, 1]
    dx, dy = h * Fx, h * Fy
    v = np.zeros((n + 1, n + 1))
    v[0, 1:] = np.cumsum(dx[0])
    v[1:, :] = v[0, :] + np.cumsum(dy, axis=0)
    circ = dx[:-1] + dy[:, 1:] - dx[1:] - dy[:, :-1]
    scale = math.sqrt(np.mean(np.concatenate([dx.ravel(), dy.ravel()]) ** 2))
    res = float(math.sqrt(np.mean(circ**2)) / scale) if scale > 0 else 0.0
    return StreamField(v, res)


# --- refinement studies -----------------------------------------------------


@dataclass(frozen=True)
class StudyRow:
    n: int
    norms: dict
    residual: float
    curl_residual: float


@dataclass(frozen=True)
class RefinementStudy:
    kind: str
    v: tuple[float, float]
    ps: tuple[float, ...]
    rows: tuple[StudyRow, ...]
    solutions: tuple[FieldSolution, ...] = ()

    def column(self, p: float) -> np.ndarray:
        return np.array([r.norms[float(p)] for r in self.rows])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "v": list(self.v),
            "p": [float(p) for p in self.ps],
            "rows": [
                {
                    "n": r.n,
                    "norms": {_pkey(p): x for p, x in r.norms.items()},
                    "residual": r.residual,
                    "curlResidual": r.curl_residual,
                }
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n"] + [f"Lp_{_pkey(p)}" for p in self.ps] + ["residual", "curl_residual"])
        for r in self.rows:
            wr.writerow(
                [r.n] + [f"{r.norms[float(p)]:.17g}" for p in self.ps] + [f"{r.residual:.17g}", f"{r.curl_residual:.17g}"]
            )
        return buf.getvalue()


def refinement_study(kind: str, pair: TwoPhase, v, ns, ps, keep: bool = False, **geometry) -> RefinementStudy:
    """Solve on each ``n`` in turn and tabulate gradient norms."""
    rows, sols = [], []
    for n in ns:
        grid = make_grid(kind, pair, int(n), **geometry)
        sol = solve(grid, v)
        tail = gradient_tail(sol, ps)
        rows.append(StudyRow(int(n), tail.norms, sol.residual, stream_reconstruct(sol).curl_residual))
        if keep:
            sols.append(sol)
    return RefinementStudy(kind, (float(v[0]), float(v[1])), tuple(float(p) for p in ps), tuple(rows), tuple(sols))


def midline_flux(sol: FieldSolution, axis: int = 0) -> float:
    """Mean normal flux ``(sigma grad u)_axis`` over the middle row or column of cells."""
    F = sol.flux()
    mid = sol.n // 2
    line = F[mid, :, axis] if axis == 0 else F[:, mid, axis]
    return float(np.mean(line))


def harmonic_mean_flux(pair: TwoPhase, fraction: float, v1: float = 1.0) -> float:
    """Exact flux of the 1D laminate stacked along ``x`` for diagonal phases: harmonic mean of ``sigma_11``."""
    s1, s2 = float(pair.sigma1[0, 0]), float(pair.sigma2[0, 0])
    return v1 / (fraction / s1 + (1 - fraction) / s2)
