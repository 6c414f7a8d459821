"""Bang-bang random maps on uniform partitions and linear objectives over their densities.

A probability vector with entries in ``{0, 1}`` selects, cell by cell, the
row of ``M1`` or of ``M2``.  The invariant densities of these combinations
are the candidate extreme points of the set of attainable densities, so a
linear functional ``F(f) = int g f`` is optimized over them.

Two optimizers are provided: exhaustive enumeration (``N <= 20``) and
policy iteration on the equivalent average-reward decision process, whose
states are cells, actions are the two rows and reward is the cell mean of
``g`` (``F(f) = sum_i pi_i mean_i(g)`` for the invariant mass vector
``pi``).  Deterministic stationary policies are optimal for such processes,
which is the discrete counterpart of "bang-bang maps suffice".
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .density import StepDensity
from .errors import SizeError, StructureError
from .fperron import as_function
from .semimarkov import cell_means, combine, left_invariant, ulam_matrix, uniform_edges

MAX_ENUM = 20
DEDUP_TOL = 1e-10
TIE_TOL = 1e-12


class ObjectiveFn:
    """Bounded objective ``g`` defining ``F(f) = int_0^1 g f``."""

    def __init__(self, g, name="g"):
        if isinstance(g, ObjectiveFn):
            g = g.g
        self.g = as_function(g)
        self.name = name
        probe = self.g(np.linspace(0.0, 1.0, 1025))
        if not np.all(np.isfinite(probe)):
            raise StructureError("objective must be finite on [0, 1]")
        self.sup = float(np.max(np.abs(probe)))

    @classmethod
    def from_table(cls, x, values, name="table"):
        """Piecewise-linear objective through ``(x_i, g_i)``."""
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        return cls(lambda t: np.interp(t, x, values), name)

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        if data.shape[1] < 2:
            raise StructureError(f"{path}: expected columns x,g")
        return cls.from_table(data[:, 0], data[:, 1], str(path))

    def __call__(self, x):
        return self.g(x)

    def cell_integrals(self, edges):
        edges = np.asarray(edges, dtype=float)
        return cell_means(self.g, edges) * np.diff(edges)

    def value(self, v, edges):
        """``int g f`` for the step density with values ``v`` on ``edges``."""
        return float(np.dot(v, self.cell_integrals(edges)))


@dataclass
class Vertex:
    bits: tuple
    density: np.ndarray
    residual: float

    @property
    def label(self):
        return "".join(str(b) for b in self.bits)


@dataclass
class HullCertificate:
    """Convex weights over vertex densities reproducing a target density."""

    weights: np.ndarray
    residual: float
    weight_sum: float
    support: list = field(default_factory=list)

    @property
    def member(self):
        return self.residual <= 1e-8


def _free_cells(M1, M2):
    return np.nonzero(np.any(M1.matrix != M2.matrix, axis=1))[0]


def _check_pair(M1, M2, max_n):
    if M1.matrix.shape != M2.matrix.shape or not np.allclose(M1.edges, M2.edges):
        raise StructureError("induced matrices live on different partitions")
    if M1.N > max_n:
        raise SizeError(f"2^{M1.N} bang-bang vectors exceed the enumeration guard N <= {max_n}")


def _l1(u, v, w):
    return float(np.sum(np.abs(u - v) * w))


def enumerate_bangbang(M1, M2, max_n=MAX_ENUM, dedup=True):
    """Invariant densities of all ``2**N`` bang-bang combinations.

    Vectors are visited in lexicographic order.  Only cells whose rows differ
    matter, so densities are computed once per pattern on those cells.  With
    ``dedup`` densities within ``1e-10`` in ``L1`` of an earlier one are
    dropped and the first (lexicographically smallest) vector is kept.
    """
    _check_pair(M1, M2, max_n)
    N = M1.N
    w = M1.widths
    free = _free_cells(M1, M2)
    cache = {}
    out = []
    for bits in itertools.product((0, 1), repeat=N):
        key = tuple(bits[i] for i in free)
        if key not in cache:
            M = combine(M1, M2, np.array(bits, dtype=float))
            v = left_invariant(M)
            cache[key] = (v, float(np.abs(v @ M.matrix - v).sum()))
        v, res = cache[key]
        if dedup and any(_l1(v, o.density, w) <= DEDUP_TOL for o in out):
            continue
        out.append(Vertex(tuple(bits), v, res))
    return out


def hull_membership(f, vertices, widths=None, anchor=1e3):
    """Nonnegative weights ``w`` with ``sum w_k v_k = f`` and ``sum w = 1``.

    Solved as nonnegative least squares with the equality appended as a
    heavily weighted row.  The residual is the ``L1`` norm of the
    reconstruction error (cell widths as weights).
    """
    V = np.array([getattr(v, "density", v) for v in vertices], dtype=float)
    f = np.asarray(getattr(f, "density", f), dtype=float)
    w = np.full(f.size, 1.0 / f.size) if widths is None else np.asarray(widths, dtype=float)
    scale = np.sqrt(w)
    A = np.vstack([V.T * scale[:, None], anchor * np.ones((1, V.shape[0]))])
    b = np.concatenate([f * scale, [anchor]])
    weights, _ = nnls(A, b, maxiter=50 * A.shape[1])
    total = float(weights.sum())
    recon = weights @ V
    return HullCertificate(weights, _l1(recon, f, w), total,
                           [int(k) for k in np.nonzero(weights > 1e-12)[0]])


@dataclass
class OptimizeResult:
    best_bits: tuple
    best_value: float
    worst_bits: tuple
    worst_value: float
    values: list = field(default_factory=list)
    method: str = "enumerate"

    @property
    def best_label(self):
        return "".join(str(b) for b in self.best_bits)


def optimize(g, M1, M2, max_n=MAX_ENUM):
    """Best and worst ``int g f`` over bang-bang densities, by enumeration.

    Ties (within ``1e-12``) go to the lexicographically smallest vector.
    """
    g = ObjectiveFn(g)
    verts = enumerate_bangbang(M1, M2, max_n, dedup=False)
    integrals = g.cell_integrals(M1.edges)
    vals = [float(np.dot(v.density, integrals)) for v in verts]
    top, bottom = max(vals), min(vals)
    ib = next(k for k, v in enumerate(vals) if v >= top - TIE_TOL)
    iw = next(k for k, v in enumerate(vals) if v <= bottom + TIE_TOL)
    return OptimizeResult(verts[ib].bits, vals[ib], verts[iw].bits, vals[iw],
                          list(zip((v.bits for v in verts), vals)))


def _policy_value(S1, S2, r, bits, gamma):
    rows = np.where(bits[:, None] == 1, S1, S2)
    return np.linalg.solve(np.eye(r.size) - gamma * rows, r)


def _best_policy(S1, S2, r, gammas=(1 - 1e-5, 1 - 1e-7, 1 - 1e-9), max_iter=200):
    """Howard iteration with discounting close to 1 (a Blackwell-optimal policy)."""
    bits = np.ones(r.size, dtype=int)
    for gamma in gammas:
        for _ in range(max_iter):
            h = _policy_value(S1, S2, r, bits, gamma)
            q1, q2 = S1 @ h, S2 @ h
            cur = np.where(bits == 1, q1, q2)
            tol = TIE_TOL * max(1.0, float(np.max(np.abs(h))))
            new = bits.copy()
            new[q1 > cur + tol] = 1
            new[q2 > cur + tol] = 0
            if np.array_equal(new, bits):
                break
            bits = new
    return bits


def optimize_policy(g, M1, M2):
    """Best and worst bang-bang values by policy iteration (any ``N``).

    The selected vectors are re-evaluated exactly with :func:`left_invariant`
    from the uniform start, the same quantity :func:`optimize` ranks.
    """
    g = ObjectiveFn(g)
    if M1.matrix.shape != M2.matrix.shape:
        raise StructureError("induced matrices live on different partitions")
    S1, S2 = M1.mass, M2.mass
    integrals = g.cell_integrals(M1.edges)
    r = integrals / M1.widths
    fixed = np.ones(M1.N, bool)
    fixed[_free_cells(M1, M2)] = False
    out = []
    for sign in (1.0, -1.0):
        bits = _best_policy(S1, S2, sign * r)
        bits[fixed] = 0  # rows agree there; report the smallest vector
        v = left_invariant(combine(M1, M2, bits.astype(float)))
        out.append((tuple(int(b) for b in bits), float(np.dot(v, integrals))))
    (bb, bv), (wb, wv) = out
    return OptimizeResult(bb, bv, wb, wv, [], "policy")


@dataclass
class ConvergenceRow:
    N: int
    best_value: float
    worst_value: float
    method: str
    density_l1: float = np.nan
    value_diff: float = np.nan
    ratio: float = np.nan
    snap: float = 0.0


def _on_edges(v, edges, fine_edges):
    return StepDensity(edges, v).cell_average(fine_edges)


def refine_and_converge(tau1, tau2, g, Ns, p=None, enum_max=12):
    """Optimal bang-bang values and (optionally) random-map densities over refinements.

    For each ``N`` the boundary maps are replaced by their Ulam matrices on
    the uniform ``N``-partition (exact for semi-Markov maps on that
    partition).  With ``p`` given, the density of
    ``diag(p_N) M1 + diag(1 - p_N) M2`` with ``p_N`` the cell means of ``p`` is
    also computed, and the ``L1`` distance between successive densities is
    recorded.  Returns the rows and the list of densities.
    """
    g = ObjectiveFn(g)
    rows, dens = [], []
    prev_val = prev_diff = None
    for N in Ns:
        edges = uniform_edges(N)
        M1, M2 = ulam_matrix(tau1, edges), ulam_matrix(tau2, edges)
        res = optimize(g, M1, M2) if N <= enum_max else optimize_policy(g, M1, M2)
        row = ConvergenceRow(N, res.best_value, res.worst_value, res.method)
        if p is not None:
            pn = np.clip(cell_means(as_function(p), edges), 0.0, 1.0)
            v = left_invariant(combine(M1, M2, pn))
            if dens:
                pe, pv = dens[-1]
                row.density_l1 = float(np.sum(np.abs(_on_edges(pv, pe, edges) - v) / N))
            dens.append((edges, v))
        if prev_val is not None:
            row.value_diff = abs(res.best_value - prev_val)
            if prev_diff is not None and row.value_diff > 0:
                row.ratio = prev_diff / row.value_diff
            prev_diff = row.value_diff
        prev_val = res.best_value
        rows.append(row)
    return rows, dens


def write_vertices_csv(path, vertices, g, edges):
    g = ObjectiveFn(g)
    with open(path, "w") as fh:
        N = len(edges) - 1
        fh.write("bits," + ",".join(f"f{i}" for i in range(N)) + ",value\n")
        for v in vertices:
            cells = ",".join(f"{x:.12g}" for x in v.density)
            fh.write(f"{v.label},{cells},{g.value(v.density, edges):.12g}\n")


def write_convergence_csv(path, rows):
    with open(path, "w") as fh:
        fh.write("N,best_value,worst_value,method,density_l1,value_diff,ratio,snap\n")
        for r in rows:
            fh.write(f"{r.N},{r.best_value:.12g},{r.worst_value:.12g},{r.method},"
                     f"{r.density_l1:.6g},{r.value_diff:.6g},{r.ratio:.6g},{r.snap:g}\n")


__all__ = [
    "ObjectiveFn", "Vertex", "HullCertificate", "OptimizeResult", "ConvergenceRow",
    "enumerate_bangbang", "hull_membership", "optimize", "optimize_policy",
    "refine_and_converge", "write_vertices_csv", "write_convergence_csv",
]
