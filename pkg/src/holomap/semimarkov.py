"""Induced matrices of semi-Markov maps and their invariant vectors.

Convention: on a partition with cells ``I_1..I_N`` the induced matrix is

    M[i, j] = |I_i  ∩  tau^{-1}(I_j)| / |I_j|,

so a cellwise-constant density ``v`` is pushed forward by left
multiplication ``v -> v M``.  On a uniform partition ``M`` is row
stochastic; on a general partition the mass matrix
``S = W^{-1} M W`` (``W = diag(widths)``) is.  For an affine branch the entry
is ``1/|slope|`` for every target cell inside the image of ``I_i``.

The same formula applied to an arbitrary piecewise-monotone map (computed
exactly from extended inverses) is Ulam's approximation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .density import StepDensity
from .errors import StructureError
from .piecewise import DOMAIN_TOL

MARKOV_TOL = 1e-9


@dataclass
class InducedMatrix:
    """Matrix ``M`` in the density convention together with its partition."""

    matrix: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.edges = np.asarray(self.edges, dtype=float)
        n = self.edges.size - 1
        if self.matrix.shape != (n, n):
            raise StructureError(f"matrix shape {self.matrix.shape} does not match {n} cells")

    @property
    def N(self):
        return self.matrix.shape[0]

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def mass(self):
        """Row-stochastic mass-transition matrix ``W^{-1} M W``."""
        w = self.widths
        return self.matrix * w[None, :] / w[:, None]

    def stochasticity_error(self):
        return float(np.max(np.abs(self.mass.sum(1) - 1.0)))

    def to_csv(self, path):
        np.savetxt(path, self.matrix, delimiter=",", fmt="%.17g")


def uniform_edges(N):
    return np.linspace(0.0, 1.0, int(N) + 1)


def _edges(N_or_edges):
    if np.ndim(N_or_edges) == 0:
        return uniform_edges(N_or_edges)
    return np.asarray(N_or_edges, dtype=float)


def _cells_in_branch(tau, edges):
    """Map every cell to the branch containing it (cells must refine the partition)."""
    owner = np.empty(edges.size - 1, dtype=int)
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        j = tau.branch_index(0.5 * (lo + hi))
        b = tau.branches[j]
        if lo < b.lo - DOMAIN_TOL or hi > b.hi + DOMAIN_TOL:
            raise StructureError(
                f"cell [{lo:.6g}, {hi:.6g}] straddles a knot of branch {j}; refine the partition")
        owner[i] = j
    return owner


def induced_matrix(tau, N_or_edges):
    """Exact induced matrix of a piecewise-affine semi-Markov map.

    Raises
    ------
    StructureError
        If a branch is not affine or the image of some cell is not a union
        of cells (to ``1e-9``); the message names the branch.
    """
    edges = _edges(N_or_edges)
    owner = _cells_in_branch(tau, edges)
    n = edges.size - 1
    M = np.zeros((n, n))
    for i in range(n):
        j = owner[i]
        b = tau.branches[j]
        if not getattr(b, "is_affine", False):
            raise StructureError(f"branch {j} is not affine")
        y = np.sort(b(np.array([edges[i], edges[i + 1]])))
        k0 = int(np.argmin(np.abs(edges - y[0])))
        k1 = int(np.argmin(np.abs(edges - y[1])))
        if abs(edges[k0] - y[0]) > MARKOV_TOL or abs(edges[k1] - y[1]) > MARKOV_TOL:
            raise StructureError(
                f"branch {j} maps cell [{edges[i]:.6g}, {edges[i + 1]:.6g}] onto "
                f"[{y[0]:.6g}, {y[1]:.6g}], which is not a union of cells")
        M[i, k0:k1] = 1.0 / abs(b.coeffs[1])
    return InducedMatrix(M, edges)


def ulam_matrix(tau, N_or_edges):
    """Ulam matrix ``M[i, j] = |I_i ∩ tau^{-1} I_j| / |I_j|`` for any monotone branches.

    Preimage lengths are exact up to the branch inverse accuracy; cells may
    straddle knots.
    """
    edges = _edges(N_or_edges)
    n = edges.size - 1
    M = np.zeros((n, n))
    for b in tau.branches:
        first = max(int(np.searchsorted(edges, b.lo, side="right")) - 1, 0)
        last = min(int(np.searchsorted(edges, b.hi, side="left")), n)
        if first >= last:
            continue
        t = np.asarray(b.extended_inverse(edges), dtype=float)
        for i in range(first, last):
            c0, c1 = max(edges[i], b.lo), min(edges[i + 1], b.hi)
            if c1 <= c0:
                continue
            lengths = np.abs(np.diff(np.clip(t, c0, c1)))
            M[i] += lengths
    M /= np.diff(edges)[None, :]
    return InducedMatrix(M, edges)


def collapse(M, coarse_edges):
    """Induced matrix on a coarser partition whose edges are a subset of ``M.edges``."""
    coarse = np.asarray(coarse_edges, dtype=float)
    idx = np.searchsorted(M.edges, coarse)
    if np.any(np.abs(M.edges[np.clip(idx, 0, M.edges.size - 1)] - coarse) > 1e-12):
        raise StructureError("coarse edges must be a subset of the fine edges")
    S = M.mass * M.widths[:, None]
    agg = np.add.reduceat(np.add.reduceat(S, idx[:-1], axis=0), idx[:-1], axis=1)
    w = np.diff(coarse)
    return InducedMatrix(agg / w[None, :], coarse)


def combine(M1, M2, p):
    """``diag(p) M1 + diag(1 - p) M2``; ``p`` is one value per cell."""
    if M1.matrix.shape != M2.matrix.shape or not np.allclose(M1.edges, M2.edges):
        raise StructureError("induced matrices live on different partitions")
    p = np.asarray(p, dtype=float)
    if p.shape != (M1.N,):
        raise StructureError(f"probability vector needs {M1.N} entries, got {p.shape}")
    if np.any((p < -1e-12) | (p > 1 + 1e-12)):
        raise StructureError("probability vector entries must lie in [0, 1]")
    return InducedMatrix(p[:, None] * M1.matrix + (1 - p)[:, None] * M2.matrix, M1.edges)


@dataclass
class InvariantInfo:
    """Diagnostics of :func:`left_invariant`."""

    method: str
    iterations: int
    residual: float
    reducible: bool
    closed_classes: list = field(default_factory=list)


def closed_classes(S, tol=0.0):
    """Closed communicating classes of a stochastic matrix (index arrays)."""
    adj = S > tol
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    out = []
    for c in range(ncomp):
        members = np.nonzero(labels == c)[0]
        others = np.ones(S.shape[0], bool)
        others[members] = False
        if not np.any(adj[np.ix_(members, others)]):
            out.append(members)
    return out


def _class_stationary(S, members):
    sub = S[np.ix_(members, members)]
    k = members.size
    A = np.vstack([sub.T - np.eye(k), np.ones((1, k))])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    pi = np.linalg.lstsq(A, rhs, rcond=None)[0]
    return np.maximum(pi, 0.0) / np.maximum(pi, 0.0).sum()


def limit_distribution(S, start, classes=None):
    """Cesaro limit of ``start S^n`` via absorption into closed classes."""
    n = S.shape[0]
    classes = closed_classes(S) if classes is None else classes
    recurrent = np.zeros(n, bool)
    for c in classes:
        recurrent[c] = True
    trans = np.nonzero(~recurrent)[0]
    pi = np.zeros(n)
    if trans.size:
        Q = S[np.ix_(trans, trans)]
        fund = np.linalg.solve(np.eye(trans.size) - Q, np.eye(trans.size))
        carried = start[trans] @ fund
    for c in classes:
        w = start[c].sum()
        if trans.size:
            w += carried @ S[np.ix_(trans, c)].sum(1)
        pi[c] += w * _class_stationary(S, c)
    return pi


def left_invariant(M, tol=1e-12, max_iter=20_000, return_info=False):
    """Invariant cellwise density ``v`` with ``v M = v`` and ``sum v_i |I_i| = 1``.

    Power iteration on the mass vector from the uniform density; if it has
    not reached ``||v M - v||_1 <= tol`` within ``max_iter`` sweeps (periodic
    or slowly mixing chains) the stationary vector is obtained directly.  A
    chain with several closed classes is flagged ``reducible`` and the
    Cesaro limit from the uniform start is returned, which is what power
    iteration approximates.
    """
    S = M.mass
    if np.any(S < -1e-12) or np.max(np.abs(S.sum(1) - 1)) > 1e-9:
        raise StructureError("matrix is not stochastic in the mass convention")
    w = M.widths
    classes = closed_classes(S)
    reducible = len(classes) > 1
    start = w / w.sum()
    if reducible:
        pi = limit_distribution(S, start, classes)
        method, it = "absorption", 0
    else:
        pi = start.copy()
        method = "power"
        it = 0
        for it in range(1, max_iter + 1):
            nxt = pi @ S
            if np.sum(np.abs(nxt - pi) / w) <= tol:
                pi = nxt
                break
            pi = nxt
        else:
            method = "direct"
        v = pi / w
        if np.abs(v @ M.matrix - v).sum() > tol:
            pi = limit_distribution(S, start, classes)
            method = "direct"
    v = pi / w
    v = v / np.dot(v, w)
    if not return_info:
        return v
    res = float(np.abs(v @ M.matrix - v).sum())
    return v, InvariantInfo(method, it, res, reducible, [c.tolist() for c in classes])


def invariant_step_density(M):
    """:class:`StepDensity` of the invariant vector of ``M``."""
    return StepDensity(M.edges, left_invariant(M))


def cell_means(func, edges, order=8):
    """Cell averages of ``func`` by Gauss-Legendre quadrature on each cell."""
    edges = np.asarray(edges, dtype=float)
    t, wq = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    x = 0.5 * (hi - lo) * t[None, :] + 0.5 * (hi + lo)
    vals = np.asarray(func(x.ravel()), dtype=float).reshape(x.shape)
    return 0.5 * (vals * wq[None, :]).sum(1)


__all__ = [
    "InducedMatrix", "InvariantInfo", "induced_matrix", "ulam_matrix", "collapse", "combine",
    "left_invariant", "invariant_step_density", "closed_classes", "limit_distribution",
    "cell_means", "uniform_edges",
]
