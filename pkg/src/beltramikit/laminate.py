"""Finite-order laminates and staircase constructions.

A laminate is stored as a binary split tree. Every internal node carries a
matrix ``M``, a parameter ``t`` and two children ``L``, ``R`` with
``M = t L + (1 - t) R`` and ``rank(L - R) = 1``; leaves are the atoms of the
measure and each node's weight is the product of the branch factors above it.

Diagonal matrices ``diag(x, y)`` are identified with points of the plane, and
the staircase lives in the cone ``x / K < y < K x``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from . import mat2
from .errors import (
    BadParameter,
    DomainError,
    Infeasible,
    InvariantViolation,
    NotCollinear,
    NotRankOne,
)

SPLIT_TOL = 1e-12
JSON_FORMAT = "beltramikit.laminate/1"
CSV_COLUMNS = ("weight", "m11", "m12", "m21", "m22")


def delta_max(K: float, S1: float, S2: float) -> float:
    """Strict upper bound for the off-diagonal constraint parameter."""
    if not K > 1.0:
        raise DomainError(f"K must exceed 1, got {K!r}")
    for s in (S1, S2):
        if not (1.0 / K <= s <= K):
            raise DomainError(f"phase parameter {s!r} outside [1/K, K]")
    return math.sqrt((1.0 - 1.0 / K) * (K - 1.0) / (4.0 * max(S1, S2) * K * K))


@dataclass(frozen=True)
class ConeSpec:
    """Cone opening ``K``, off-diagonal bound ``delta`` and phase parameters ``S1, S2``."""

    K: float
    delta: float
    S1: float = 1.0
    S2: float = 1.0

    def __post_init__(self):
        dm = delta_max(self.K, self.S1, self.S2)
        if not 0.0 < self.delta < dm:
            raise DomainError(f"delta must lie in (0, {dm!r}), got {self.delta!r}")

    @classmethod
    def for_K(cls, K: float, S1: float = 1.0, S2: float = 1.0) -> "ConeSpec":
        """Cone parameters with ``delta`` at half its admissible maximum."""
        return cls(K, 0.5 * delta_max(K, S1, S2), S1, S2)

    @property
    def phases(self) -> tuple[np.ndarray, np.ndarray]:
        """The two diagonal conductivities ``diag(K, S1)`` and ``diag(1/K, S2)``."""
        return mat2.diag(self.K, self.S1), mat2.diag(1.0 / self.K, self.S2)


def in_cone(v, K: float) -> bool:
    x, y = float(v[0]), float(v[1])
    return x > 0 and x / K < y < K * x


def in_constraint(M, spec: ConeSpec) -> bool:
    M = mat2.as_mat(M)
    return in_cone((M[0, 0], M[1, 1]), spec.K) and abs(M[0, 1]) < spec.delta * M[0, 0]


def in_phase_set(M, sigma, tol: float = 1e-10) -> bool:
    """Whether the second row of ``M`` equals ``J sigma`` applied to the first."""
    M, s = mat2.as_mat(M), mat2.as_mat(sigma)
    r = M[1] - mat2.J @ s @ M[0]
    return bool(np.linalg.norm(r) <= tol * max(1.0, np.linalg.norm(M)))


# --- diagonal connection --------------------------------------------------


def _area(A, q) -> float:
    return (A[0, 0] - q[0]) * (A[1, 1] - q[1])


def _deepest_point(x: float, y: float, K: float) -> tuple[np.ndarray, float]:
    # minimiser of the signed area (x - q1)(y - q2) over the closed cone
    lower = np.array([(x + K * y) / 2.0, (x + K * y) / (2.0 * K)])
    upper = np.array([(K * x + y) / (2.0 * K), (K * x + y) / 2.0])
    a_lo = (x - lower[0]) * (y - lower[1])
    a_up = (x - upper[0]) * (y - upper[1])
    return (lower, a_lo) if a_lo < a_up else (upper, a_up)


def find_diagonal_connection(A, spec: ConeSpec) -> np.ndarray:
    """Diagonal ``Q`` in the open cone with ``det(A - Q) = 0``.

    The rank-one condition reads ``(a11 - q11)(a22 - q22) = a12 a21``. Points
    along the diagonal directions ``(1, 1)`` or ``(1, -1)`` are tried first;
    otherwise ``Q`` is placed on the segment from ``A_d`` to the cone point of
    most negative signed area, where the area varies monotonically.
    """
    A = mat2.as_mat(A)
    if not in_constraint(A, spec):
        raise DomainError("matrix is outside the constraint set")
    K = spec.K
    x, y = A[0, 0], A[1, 1]
    target = A[0, 1] * A[1, 0]
    if target == 0.0:
        return mat2.diag(x, y)
    s = math.sqrt(abs(target))
    if target > 0:
        return mat2.diag(x + s, y + s)
    for q in ((x + s, y - s), (x - s, y + s)):
        if in_cone(q, K):
            return mat2.diag(*q)
    q_star, a_min = _deepest_point(x, y, K)
    if not target > a_min:
        raise Infeasible(f"a12 a21 = {target!r} is not above the cone minimum {a_min!r}")
    r = math.sqrt(target / a_min)
    q = np.array([x, y]) + r * (q_star - np.array([x, y]))
    return mat2.diag(q[0], q[1])


# --- laminate tree ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Laminate:
    """Immutable split tree; node 0 is the root.

    ``children[i] == (-1, -1)`` marks a leaf and ``t[i]`` is NaN there.
    ``chain`` optionally lists the successive carrier nodes of a staircase.
    """

    matrices: np.ndarray
    weights: np.ndarray
    t: np.ndarray
    children: np.ndarray
    chain: tuple[int, ...] = ()

    def __post_init__(self):
        for a in (self.matrices, self.weights, self.t, self.children):
            a.setflags(write=False)

    @property
    def root(self) -> np.ndarray:
        return self.matrices[0]

    def leaf_ids(self) -> np.ndarray:
        return np.flatnonzero(self.children[:, 0] < 0)

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        ids = self.leaf_ids()
        return self.weights[ids], self.matrices[ids]

    def __len__(self) -> int:
        return len(self.weights)

    def validate(self) -> "Laminate":
        internal = np.flatnonzero(self.children[:, 0] >= 0)
        if len(internal):
            M = self.matrices[internal]
            t = self.t[internal]
            L = self.matrices[self.children[internal, 0]]
            R = self.matrices[self.children[internal, 1]]
            if np.any(~(t > 0) | ~(t < 1)):
                raise BadParameter("split parameter outside (0, 1)")
            resid = mat2.frob(M - (t[:, None, None] * L + (1 - t)[:, None, None] * R))
            if np.any(resid > SPLIT_TOL * np.maximum(mat2.frob(M), 1e-300)):
                raise NotCollinear("node matrix is not the split average")
            D = L - R
            nd = mat2.frob(D)
            if np.any(nd <= 0) or np.any(np.abs(mat2.det(D)) > SPLIT_TOL * nd**2):
                raise NotRankOne("split children are not rank-one connected")
            w = self.weights[internal]
            wl = self.weights[self.children[internal, 0]]
            wr = self.weights[self.children[internal, 1]]
            if np.any(np.abs(wl - w * t) > 1e-12 * w) or np.any(np.abs(wr - w * (1 - t)) > 1e-12 * w):
                raise InvariantViolation("child weights are not the branch products")
        w, Ms = self.atoms()
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise InvariantViolation("atom weights do not sum to one")
        bc = barycenter(self)
        if mat2.frob(bc - self.root) > 1e-10 * max(1.0, mat2.frob(self.root)):
            raise InvariantViolation("barycenter differs from the root")
        return self

    # --- serialisation ---------------------------------------------------

    def to_json(self) -> str:
        """Node list with child indices; floats round-trip exactly."""
        nodes = []
        for i in range(len(self)):
            ch = [int(c) for c in self.children[i]] if self.children[i, 0] >= 0 else []
            nodes.append(
                {
                    "matrix": self.matrices[i].tolist(),
                    "weight": float(self.weights[i]),
                    "t": None if not ch else float(self.t[i]),
                    "children": ch,
                }
            )
        doc = {"format": JSON_FORMAT, "root": 0, "chain": list(self.chain), "nodes": nodes}
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Laminate":
        doc = json.loads(text)
        if doc.get("format") != JSON_FORMAT:
            raise ValueError("not a laminate document")
        nodes = doc["nodes"]
        n = len(nodes)
        mats = np.array([nd["matrix"] for nd in nodes], dtype=float).reshape(n, 2, 2)
        w = np.array([nd["weight"] for nd in nodes], dtype=float)
        t = np.array([math.nan if nd["t"] is None else nd["t"] for nd in nodes], dtype=float)
        ch = np.array([nd["children"] or [-1, -1] for nd in nodes], dtype=np.int64).reshape(n, 2)
        return cls(mats, w, t, ch, tuple(doc.get("chain", ())))

    def atoms_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        w, Ms = self.atoms()
        for wi, M in zip(w, Ms):
            wr.writerow([f"{x:.17g}" for x in (wi, M[0, 0], M[0, 1], M[1, 0], M[1, 1])])
        return buf.getvalue()


class _Builder:
    def __init__(self, root):
        self.mats: list[np.ndarray] = [mat2.as_mat(root).copy()]
        self.w: list[float] = [1.0]
        self.t: list[float] = [math.nan]
        self.ch: list[list[int]] = [[-1, -1]]
        self.chain: list[int] = []

    @classmethod
    def from_laminate(cls, lam: Laminate) -> "_Builder":
        b = cls(lam.root)
        b.mats = [m.copy() for m in lam.matrices]
        b.w = [float(x) for x in lam.weights]
        b.t = [float(x) for x in lam.t]
        b.ch = [[int(c) for c in row] for row in lam.children]
        b.chain = list(lam.chain)
        return b

    def split(self, node: int, B, C, t: float) -> tuple[int, int]:
        if self.ch[node][0] >= 0:
            raise DomainError(f"node {node} is not a leaf")
        if not 0.0 < t < 1.0:
            raise BadParameter(f"split parameter {t!r} outside (0, 1)")
        B, C = mat2.as_mat(B), mat2.as_mat(C)
        M = self.mats[node]
        if mat2.frob(M - (t * B + (1 - t) * C)) > SPLIT_TOL * max(mat2.frob(M), 1e-300):
            raise NotCollinear("leaf matrix is not t B + (1 - t) C")
        D = B - C
        nd = mat2.frob(D)
        if nd <= 0 or abs(mat2.det(D)) > SPLIT_TOL * nd * nd:
            raise NotRankOne("B - C is not rank one")
        w = self.w[node]
        ids = len(self.mats), len(self.mats) + 1
        self.mats += [B.copy(), C.copy()]
        self.w += [w * t, w * (1 - t)]
        self.t += [math.nan, math.nan]
        self.ch += [[-1, -1], [-1, -1]]
        self.t[node] = t
        self.ch[node] = list(ids)
        return ids

    def freeze(self) -> Laminate:
        n = len(self.mats)
        return Laminate(
            np.array(self.mats).reshape(n, 2, 2),
            np.array(self.w),
            np.array(self.t),
            np.array(self.ch, dtype=np.int64).reshape(n, 2),
            tuple(self.chain),
        )


def dirac(M) -> Laminate:
    return _Builder(M).freeze()


def split(lam: Laminate, leaf: int, B, C, t: float) -> Laminate:
    """New laminate with atom ``leaf`` replaced by ``t delta_B + (1 - t) delta_C``."""
    b = _Builder.from_laminate(lam)
    b.split(leaf, B, C, t)
    return b.freeze()


def barycenter(lam: Laminate) -> np.ndarray:
    w, Ms = lam.atoms()
    out = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            out[i, j] = math.fsum(w * Ms[:, i, j])
    return out


def moment(lam: Laminate, p: float) -> float:
    """``sum_j w_j |M_j|^p`` with the Frobenius norm."""
    w, Ms = lam.atoms()
    return math.fsum(w * mat2.frob(Ms) ** p)


# --- staircase -------------------------------------------------------------


def first_rung(K: float) -> int:
    """Smallest carrier scale used by the main staircase loop; ``k + 1 < K k`` from here on."""
    return math.ceil(1.0 / (K - 1.0)) + 1


def _climb(b: _Builder, node: int, c: float, c_next: float, K: float, place) -> int:
    # diag(c, c) -> diag(c, c/K) | diag(c, c') -> diag(c'/K, c') | diag(c', c')
    t = (c_next - c) / (c_next - c / K)
    s = (c_next - c) / (c_next - c_next / K)
    _, mid = b.split(node, place(c, c / K), place(c, c_next), t)
    _, nxt = b.split(mid, place(c_next / K, c_next), place(c_next, c_next), s)
    return nxt


def _grow_staircase(b: _Builder, node: int, K: float, n: int, eps: float, scale: float) -> None:
    def place(x, y):
        # pull unit-staircase points towards the identity, then rescale
        return scale * mat2.diag((1 - eps) * x + eps, (1 - eps) * y + eps)

    b.chain.append(node)
    k0 = first_rung(K)
    ratio = 0.5 * (1.0 + K)
    c = 1.0
    while c < k0:
        c_next = min(ratio * c, float(k0))
        node = _climb(b, node, c, c_next, K, place)
        b.chain.append(node)
        c = c_next
    for k in range(k0, k0 + n):
        node = _climb(b, node, float(k), float(k + 1), K, place)
        b.chain.append(node)


def staircase(spec: ConeSpec | float, n: int, eps: float = 0.0) -> Laminate:
    """Staircase laminate with barycenter ``I`` after ``n`` main steps.

    A short prologue climbs the diagonal from ``I`` to ``k0 I`` by ratio
    ``(1 + K)/2``; each main step then moves the carrier ``k I -> (k+1) I``
    with one vertical and one horizontal rank-one split, emitting one atom on
    each ray of the cone. With ``eps > 0`` every point is replaced by
    ``I + (1 - eps)(M - I)``, which keeps the barycenter and puts all atoms
    strictly inside the cone.
    """
    K = spec.K if isinstance(spec, ConeSpec) else float(spec)
    if not K > 1.0:
        raise DomainError(f"K must exceed 1, got {K!r}")
    if n < 0:
        raise DomainError("number of steps must be non-negative")
    if not 0.0 <= eps < 1.0:
        raise DomainError("eps must lie in [0, 1)")
    b = _Builder(np.eye(2))
    _grow_staircase(b, 0, K, n, eps, 1.0)
    return b.freeze()


def prologue_steps(K: float) -> int:
    k0, ratio, c, steps = first_rung(K), 0.5 * (1.0 + K), 1.0, 0
    while c < k0:
        c = min(ratio * c, float(k0))
        steps += 1
    return steps


def chain_curves(lam: Laminate, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Moments and barycenters of every truncation along the staircase chain.

    Entry ``j`` describes the laminate obtained by stopping at carrier
    ``chain[j]``: the atoms emitted before it plus the carrier itself.
    Returns ``(moments, barycenters)`` of shapes ``(m,)`` and ``(m, 2, 2)``.
    """
    if not lam.chain:
        raise DomainError("laminate has no staircase chain")
    ids = lam.leaf_ids()
    w = lam.weights[ids]
    Ms = lam.matrices[ids]
    mom = np.concatenate([[0.0], np.cumsum(w * mat2.frob(Ms) ** p)])
    bar = np.concatenate([np.zeros((1, 2, 2)), np.cumsum(w[:, None, None] * Ms, axis=0)])
    chain = np.asarray(lam.chain)
    before = np.searchsorted(ids, chain)  # leaves with smaller index
    cw = lam.weights[chain]
    cm = lam.matrices[chain]
    moments = mom[before] + cw * mat2.frob(cm) ** p
    bars = bar[before] + cw[:, None, None] * cm
    return moments, bars


def carrier_weights(lam: Laminate) -> tuple[np.ndarray, np.ndarray]:
    """``(scale, weight)`` of each carrier ``scale * I`` along the chain."""
    chain = np.asarray(lam.chain)
    return lam.matrices[chain, 0, 0], lam.weights[chain]


def laminate_for(A, spec: ConeSpec, n: int, eps: float = 0.0) -> Laminate:
    """Laminate with barycenter ``A`` whose staircase branch has ``n`` main steps.

    ``A`` is split along its rank-one direction into a far point ``P`` in the
    constraint set and a diagonal ``Q`` in the cone. The overshoot of ``P``
    beyond ``A`` starts at ``|A - Q|`` and is halved until ``P`` is admissible.
    ``Q`` is aligned onto the diagonal ``q I`` by one more split, after which a
    staircase scaled by ``q`` is attached.
    """
    A = mat2.as_mat(A)
    Q = find_diagonal_connection(A, spec)
    K = spec.K
    b = _Builder(A)
    node = 0
    if mat2.frob(A - Q) > 0:
        rho = 1.0
        while True:
            P = A + rho * (A - Q)
            if in_constraint(P, spec):
                break
            rho *= 0.5
            if rho < 1e-30:
                raise Infeasible("no admissible far point along the rank-one line")
        _, node = b.split(0, P, Q, 1.0 / (1.0 + rho))
    q1, q2 = Q[0, 0], Q[1, 1]
    if q2 > q1:
        t = (q2 - q1) / (q2 - q2 / K)
        _, node = b.split(node, mat2.diag(q2 / K, q2), mat2.diag(q2, q2), t)
        scale = q2
    elif q1 > q2:
        t = (q1 - q2) / (q1 - q1 / K)
        _, node = b.split(node, mat2.diag(q1, q1 / K), mat2.diag(q1, q1), t)
        scale = q1
    else:
        scale = q1
    _grow_staircase(b, node, K, n, eps, scale)
    return b.freeze()
