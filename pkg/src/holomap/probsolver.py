"""Probability functions that make a random map preserve a target density.

On the first lap ``[0, a]`` the invariance equation for ``R = {tau1, tau2; p,
1 - p}`` reduces to the linear functional equation

    g(x) = g(tau21(x)) * tau21'(x) + B(x),      tau21 = tau2^{-1} o tau1,

with ``g = p`` for Lebesgue measure and ``g = p f`` in general.  Because
``tau21`` pulls every point of ``[0, a)`` towards the fixed point ``0`` where
it contracts, the solution is the series

    g(x) = sum_n B(tau21^n x) * (tau21^n)'(x).

Points beyond the contraction cutoff ``a_hat`` first take the finitely many
steps needed to enter ``[0, a_hat]`` (this is the interval-by-interval
extension of the solution), after which ``n_terms`` further terms are summed.
The value at the repelling fixed point ``a`` follows from the equation itself:
``g(a) = B(a) / (1 - tau21'(a))``.

The module also holds the closed form for quadratic laps and a
constraint-propagation probe for semi-Markov maps with step-density targets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog, lsq_linear

from .density import DEFAULT_GRID, grid_nodes
from .errors import ConvergenceError, NumericError, PreconditionError, StructureError
from .fperron import RandomMap, _preimage_terms, as_function, invariance_residual
from .piecewise import ComposedMap, PiecewiseMap, common_refinement, compose_tau21
from .probability import PiecewiseAffineProbability

SIGMA_MAX = 0.95
# per-point early exit: remaining tail below this is invisible in binary64
TAIL_FLOOR = 1e-20
FEAS_TOL = 1e-8
MAX_LEVELS = 5000


@dataclass
class SolverParams:
    """Contraction data for the series solver."""

    a: float
    a_hat: float
    sigma: float
    n_terms: int
    grid: int = DEFAULT_GRID

    def check(self):
        if not 0 < self.a_hat < self.a:
            raise PreconditionError(f"need 0 < a_hat < a, got a_hat={self.a_hat}, a={self.a}")
        if not self.sigma < 1:
            raise PreconditionError(f"contraction bound sigma={self.sigma} is not below 1")


def terms_for(sigma, target=1e-10):
    """Smallest ``n`` with ``sigma**n <= target``."""
    if sigma <= 0:
        return 1
    return max(1, math.ceil(math.log(target) / math.log(sigma)))


def choose_a_hat(tau21, a=None, sigma_max=SIGMA_MAX, grid=DEFAULT_GRID, n_terms=None):
    """Largest grid point ``a_hat < a`` with ``sup_[0, a_hat] tau21' <= sigma_max``.

    Returns :class:`SolverParams`; ``sigma`` is the observed supremum and
    ``n_terms`` defaults to the count giving ``sigma**n_terms <= 1e-10``.
    """
    a = tau21.hi if a is None else float(a)
    x = np.linspace(0.0, a, grid + 1)
    d = np.asarray(tau21.deriv(x), dtype=float)
    if d[0] >= 1.0:
        raise PreconditionError(f"tau21'(0) = {d[0]:.6g} >= 1: no contraction region")
    run = np.maximum.accumulate(d)
    ok = np.nonzero((run <= sigma_max) & (x < a))[0]
    k = int(ok[-1])
    if k == 0:
        raise PreconditionError("contraction region is narrower than one grid cell")
    sigma = float(run[k])
    return SolverParams(a, float(x[k]), sigma,
                        terms_for(sigma) if n_terms is None else int(n_terms), grid)


class SeriesSolution:
    """Callable series solution ``g`` of ``g = g o tau21 * tau21' + B`` on ``[0, a]``.

    Parameters
    ----------
    tau21 : ComposedMap
    kernel : callable
        The inhomogeneous term ``B``.
    params : SolverParams
    """

    def __init__(self, tau21, kernel, params):
        self.tau21, self.kernel, self.params = tau21, kernel, params
        a = params.a
        self.a = a
        xs = np.linspace(0.0, params.a_hat, params.grid + 1)
        self.sup_b = float(np.max(np.abs(kernel(xs))))
        d_end = float(tau21.deriv(a))
        if abs(1.0 - d_end) < 1e-14:
            raise NumericError("tau21'(a) = 1: the value at a is not determined")
        self.value_at_a = float(kernel(np.array(a))) / (1.0 - d_end)

    def evaluate(self, x, n_terms=None):
        """Values, a-posteriori truncation bounds and level counts.

        The bound is ``|(tau21^{N+1})'(x)| * sup|B| / (1 - sigma)``, valid
        because the remaining orbit stays in ``[0, a_hat]``.  A point stops
        early once that bound drops below ``TAIL_FLOOR``.
        """
        p = self.params
        n_terms = p.n_terms if n_terms is None else int(n_terms)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any((x < -1e-12) | (x > self.a + 1e-12)):
            raise StructureError("series argument outside [0, a]")
        at_a = x >= self.a - 1e-15
        y = np.where(at_a, 0.0, np.clip(x, 0.0, self.a))
        d = np.ones_like(y)
        acc = np.zeros_like(y)
        inside = np.zeros(y.shape, dtype=int)
        levels = np.zeros(y.shape, dtype=int)
        active = ~at_a
        steps = 0
        while np.any(active):
            idx = np.nonzero(active)[0]
            yy, dd = y[idx], d[idx]
            acc[idx] += self.kernel(yy) * dd
            entered = yy <= p.a_hat
            inside[idx] += entered
            levels[idx] += ~entered
            z, dz = self.tau21.value_and_deriv(yy)
            d[idx] = dd * dz
            y[idx] = z
            tail = np.abs(d[idx]) * self.sup_b / (1.0 - p.sigma)
            active[idx] = (inside[idx] <= n_terms) & ~(entered & (tail < TAIL_FLOOR))
            steps += 1
            if steps > n_terms + MAX_LEVELS:
                raise ConvergenceError("orbit did not reach the contraction region")
        bound = np.abs(d) * self.sup_b / (1.0 - p.sigma)
        acc = np.where(at_a, self.value_at_a, acc)
        bound = np.where(at_a, 0.0, bound)
        return acc, bound, levels

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        val = self.evaluate(x_arr)[0]
        return float(val[0]) if x_arr.ndim == 0 else val.reshape(x_arr.shape)

    def partial_sum(self, x, k):
        """``f_k(x) = sum_{n<=k} B(tau21^n x)(tau21^n)'(x)`` with no cutoff logic."""
        x = np.asarray(x, dtype=float)
        y, d = x.copy(), np.ones_like(x)
        acc = np.zeros_like(x)
        for _ in range(k + 1):
            acc += self.kernel(y) * d
            d = d * self.tau21.deriv(y)
            y = self.tau21(y)
        return acc


class SeriesProbability:
    """Probability on ``[0, 1]``: ``g/f`` on ``[0, a]``, a constant beyond.

    The value beyond ``a`` is arbitrary because both maps coincide there;
    it is stored as ``rest`` (1 by convention).
    """

    def __init__(self, solution, f=None, rest=1.0):
        self.solution = solution
        self.f = None if f is None else as_function(f)
        self.a = solution.a
        self.rest = rest
        self.breakpoints = np.array([0.0, self.a, 1.0])

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        xs = np.atleast_1d(x_arr)
        out = np.full(xs.shape, float(self.rest))
        m = xs <= self.a
        if np.any(m):
            g = self.solution(xs[m])
            out[m] = g if self.f is None else g / self.f(xs[m])
        return float(out[0]) if x_arr.ndim == 0 else out.reshape(x_arr.shape)


@dataclass
class SolverReport:
    """Outcome of a probability solve or feasibility probe."""

    p: object
    residual: float
    feasible: bool
    witness: dict | None = None
    truncation_bound: float | None = None
    params: SolverParams | None = None
    verdict: str = ""
    forced_value: float | None = None
    fp_residual: float | None = None
    samples: tuple | None = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        out = {"feasible": bool(self.feasible), "verdict": self.verdict,
               "residual_linf": self.residual, "truncation_bound": self.truncation_bound,
               "witness": self.witness, "notes": list(self.notes)}
        if self.forced_value is not None:
            out["forced_value"] = self.forced_value
        if self.fp_residual is not None:
            out["fp_residual_linf"] = self.fp_residual
        if self.params is not None:
            out["params"] = {k: getattr(self.params, k)
                             for k in ("a", "a_hat", "sigma", "n_terms", "grid")}
        return out

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    def p_to_csv(self, path, n=None):
        """Write ``x,p(x)`` on the uniform ``[0, 1]`` grid."""
        n = (self.params.grid if self.params else DEFAULT_GRID) if n is None else n
        x = grid_nodes(n)
        v = self.p(x)
        with open(path, "w") as fh:
            fh.write(f"# holomap probability n={n}\n")
            for xi, vi in zip(x, v):
                fh.write(f"{xi:.12g},{vi:.12g}\n")


def first_lap_end(tau):
    """Right end ``a`` of the increasing lap of ``tau`` starting at ``0`` and reaching 1."""
    for b in tau.branches:
        if not b.increasing:
            break
        if abs(b(b.hi) - 1.0) < 1e-8:
            return float(b.hi)
    raise StructureError("the map has no increasing first lap onto [0, 1]")


def _setup(tau1, tau2, params, a, grid, n_terms, a_hat):
    a = params.a if params is not None else (first_lap_end(tau1) if a is None else float(a))
    tau21 = compose_tau21(tau1, tau2, a)
    if params is None:
        params = choose_a_hat(tau21, a, grid=grid, n_terms=n_terms)
        if a_hat is not None:
            params = _with_a_hat(tau21, params, a_hat, n_terms)
    params.check()
    return tau21, params


def _with_a_hat(tau21, params, a_hat, n_terms=None):
    x = np.linspace(0.0, a_hat, params.grid + 1)
    sigma = float(np.max(tau21.deriv(x)))
    return SolverParams(params.a, float(a_hat), sigma,
                        terms_for(sigma) if n_terms is None else int(n_terms), params.grid)


def _finish(tau21, solution, prob, params, fe_residual_fn, notes):
    xs = np.linspace(0.0, params.a, params.grid + 1)
    vals, bounds, _ = solution.evaluate(xs)
    pv = np.asarray(prob(xs))
    residual = float(np.max(np.abs(fe_residual_fn(xs[:-1]))))
    lo, hi = float(pv.min()), float(pv.max())
    feasible = lo >= -FEAS_TOL and hi <= 1 + FEAS_TOL
    witness = None
    if not feasible:
        excess = np.maximum(-pv, pv - 1.0)
        k = int(np.argmax(excess))
        witness = {"x": float(xs[k]), "p": float(pv[k])}
    return SolverReport(prob, residual, feasible, witness, float(bounds.max()), params,
                        "Feasible" if feasible else "Infeasible",
                        samples=(xs, pv), notes=notes)


def lebesgue_kernel(tau1_lap, tau21, a):
    """``B(x) = a tau1'(x) - tau21'(x)``."""
    return lambda x: a * tau1_lap.deriv(x) - tau21.deriv(x)


def solve_lebesgue(tau1, tau2, params=None, *, a=None, grid=DEFAULT_GRID, n_terms=None,
                   a_hat=None):
    """Probability making ``{tau1, tau2; p, 1-p}`` preserve Lebesgue measure.

    The kernel ``a tau1' - tau21'`` assumes the common part of the maps
    beyond ``a`` pushes Lebesgue measure forward to the constant ``1 - a``,
    as the linear tail ``(1-x)/(1-a)`` does.

    Returns
    -------
    SolverReport
        ``p`` is exact up to the recorded truncation bound on ``[0, a]`` and
        equals 1 on ``(a, 1]``.
    """
    tau21, params = _setup(tau1, tau2, params, a, grid, n_terms, a_hat)
    lap = tau21.inner
    kernel = lebesgue_kernel(lap, tau21, params.a)
    sol = SeriesSolution(tau21, kernel, params)
    prob = SeriesProbability(sol)
    notes = ["p is arbitrary on (a, 1]; set to 1"]
    tail = _tail_branches(tau1, params.a)
    if tail:
        x = np.linspace(0.02, 0.98, 49)
        push = _tail_fp(tail, 1.0, x)
        if np.max(np.abs(push - (1 - params.a))) > 1e-9:
            notes.append("tail does not push Lebesgue measure to 1 - a; use solve_general")

    def fe(x):
        return sol(x) - sol(tau21(x)) * tau21.deriv(x) - kernel(x)

    return _finish(tau21, sol, prob, params, fe, notes)


def _tail_branches(tau, a):
    return [b for b in tau.branches if b.lo >= a - 1e-12]


def _tail_fp(tail, f, x):
    """Transfer operator of the common part beyond ``a`` applied to ``f``."""
    f = as_function(f)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    for b in tail:
        m, y, d = _preimage_terms(b, x)
        if np.any(m):
            out[m] += f(y[m]) / d[m]
    return out


def general_kernel(tau1_lap, tau21, f, tail):
    """``B(y) = (f(tau1 y) - T(tau1 y)) tau1'(y) - f(tau21 y) tau21'(y)``.

    ``T`` is the transfer operator of the common tail applied to ``f``.  For
    ``f = 1`` this is the Lebesgue kernel.
    """
    f = as_function(f)

    def kernel(y):
        y = np.asarray(y, dtype=float)
        z = np.clip(tau1_lap(y), 0.0, 1.0)
        t = _tail_fp(tail, f, z).reshape(np.shape(z))
        return (f(z) - t) * tau1_lap.deriv(y) - f(tau21(y)) * tau21.deriv(y)

    return kernel


def solve_general(tau1, tau2, f, params=None, *, tail=None, a=None, grid=DEFAULT_GRID,
                  n_terms=None, a_hat=None, fp_check=True):
    """Probability making the random map preserve a positive density ``f``.

    Solves for ``g = p f`` with :func:`general_kernel` and returns
    ``p = g / f``.  ``tail`` defaults to the branches of ``tau1`` beyond
    ``a`` (the part both maps share).
    """
    f_fn = as_function(f)
    xs = grid_nodes(grid)
    fv = f_fn(xs)
    if np.any(fv <= 1e-9):
        raise PreconditionError(f"target density vanishes near x={xs[np.argmin(fv)]:.6g}")
    tau21, params = _setup(tau1, tau2, params, a, grid, n_terms, a_hat)
    tail = _tail_branches(tau1, params.a) if tail is None else (
        tail.branches if isinstance(tail, PiecewiseMap) else list(tail))
    kernel = general_kernel(tau21.inner, tau21, f_fn, tail)
    sol = SeriesSolution(tau21, kernel, params)
    prob = SeriesProbability(sol, f_fn)

    def fe(x):
        return sol(x) - sol(tau21(x)) * tau21.deriv(x) - kernel(x)

    report = _finish(tau21, sol, prob, params, fe, ["p is arbitrary on (a, 1]; set to 1"])
    if fp_check:
        R = RandomMap(tau1, tau2, prob, check=False)
        report.fp_residual = invariance_residual(R, f_fn, min(grid, 2048))[1]
    return report


def _exact(v):
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    fr = Fraction(v).limit_denominator(10 ** 9)
    return fr if abs(float(fr) - v) <= 1e-15 * max(1.0, abs(v)) else Fraction(v)


def closed_form_coefficients(a, b1, b2):
    """``(A, B)`` with ``p = A + B x`` solving the quadratic-lap equation.

    ``A = b1(1 - a b2)/(b1 - b2)`` and
    ``B = 2(1 - a b1)(1 - a b2)/((b1 - b2) a**2)``, evaluated in rational
    arithmetic so that exactly representable answers come out exact.
    """
    a, b1, b2 = _exact(a), _exact(b1), _exact(b2)
    if not (0 < b1 < 1 / a < b2 < 2 / a):
        raise PreconditionError("need 0 < b1 < 1/a < b2 < 2/a")
    A = b1 * (1 - a * b2) / (b1 - b2)
    B = 2 * (1 - a * b1) * (1 - a * b2) / ((b1 - b2) * a * a)
    return A, B


def closed_form_quadratic(a, b1, b2, periodic=False):
    """Affine probability for quadratic laps ``c_i x**2 + b_i x`` on ``[0, a]``.

    With ``periodic`` (only for ``a = 1/2``) the affine piece is repeated on
    ``[1/2, 1]``, matching maps that repeat their lap there; otherwise ``p``
    is 1 on ``(a, 1]``.
    """
    A, B = closed_form_coefficients(a, b1, b2)
    if periodic:
        if _exact(a) != Fraction(1, 2):
            raise PreconditionError("the periodic form needs a = 1/2")
        return PiecewiseAffineProbability.periodic_affine(float(A), float(B), 0.5)
    return PiecewiseAffineProbability.affine(float(A), float(B), upto=float(a))


# ---------------------------------------------------------------------------
# semi-Markov feasibility probe

@dataclass
class StepSystem:
    """Linear conditions ``A p = b`` on a step probability.

    Row ``k`` is the invariance equation on the output interval
    ``[x_edges[k], x_edges[k+1]]``; column ``i`` is the value of ``p`` on
    ``[p_edges[i], p_edges[i+1]]``.
    """

    A: np.ndarray
    b: np.ndarray
    x_edges: np.ndarray
    p_edges: np.ndarray
    tau1: PiecewiseMap
    tau2: PiecewiseMap
    free: list


def free_region(tau1, tau2):
    """Cells of the common partition where the two maps differ."""
    t1, t2 = common_refinement(tau1, tau2)
    cells = []
    for b1, b2 in zip(t1.branches, t2.branches):
        x = np.linspace(b1.lo, b1.hi, 7)
        if np.max(np.abs(b1(x) - b2(x))) > 1e-12:
            cells.append((b1.lo, b1.hi))
    return cells


def default_p_edges(tau1, tau2, refine=80):
    cells = free_region(tau1, tau2)
    if not cells:
        return np.array([])
    pts = [np.linspace(lo, hi, refine + 1) for lo, hi in cells]
    return np.unique(np.concatenate(pts))


def step_system(tau1, tau2, f, p_edges):
    """Assemble the invariance conditions for a step probability.

    ``p`` is unknown on the cells of ``p_edges`` (inside the free region)
    and irrelevant elsewhere.  Output intervals are cut at every image of a
    partition point, ``p`` edge and density breakpoint, so each term is
    constant on each interval when the maps are affine and ``f`` is a step
    function.
    """
    t1, t2 = common_refinement(tau1, tau2)
    p_edges = np.asarray(p_edges, dtype=float)
    f_fn = as_function(f)
    fb = np.asarray(getattr(f, "breakpoints", []), dtype=float)
    free = []
    cuts = [np.array([0.0, 1.0]), fb]
    for b1, b2 in zip(t1.branches, t2.branches):
        x = np.linspace(b1.lo, b1.hi, 7)
        is_free = np.max(np.abs(b1(x) - b2(x))) > 1e-12
        free.append(is_free)
        pts = [np.array([b1.lo, b1.hi]), fb[(fb > b1.lo) & (fb < b1.hi)]]
        if is_free:
            pts.append(p_edges[(p_edges > b1.lo) & (p_edges < b1.hi)])
        pts = np.concatenate(pts)
        cuts.append(b1(pts))
        if is_free:
            cuts.append(b2(pts))
    xe = np.unique(np.clip(np.concatenate(cuts), 0.0, 1.0))
    xe = xe[np.concatenate([[True], np.diff(xe) > 1e-13])]
    mid = 0.5 * (xe[:-1] + xe[1:])
    ncell = max(p_edges.size - 1, 0)
    A = np.zeros((mid.size, ncell))
    const = np.zeros(mid.size)

    def cell_of(y):
        return np.clip(np.searchsorted(p_edges, y, side="right") - 1, 0, ncell - 1)

    for b1, b2, is_free in zip(t1.branches, t2.branches, free):
        m, y, d = _preimage_terms(b1, mid)
        if not is_free:
            const[m] += f_fn(y[m]) / d[m]
            continue
        np.add.at(A, (np.nonzero(m)[0], cell_of(y[m])), f_fn(y[m]) / d[m])
        m, y, d = _preimage_terms(b2, mid)
        w = f_fn(y[m]) / d[m]
        const[m] += w
        np.add.at(A, (np.nonzero(m)[0], cell_of(y[m])), -w)
    b = f_fn(mid) - const
    return StepSystem(A, b, xe, p_edges, t1, t2, free)


def _row_implied(a, idx, rhs, lo, hi):
    cmin = np.minimum(a * lo[idx], a * hi[idx])
    cmax = np.maximum(a * lo[idx], a * hi[idx])
    q1 = (rhs - (cmax.sum() - cmax)) / a
    q2 = (rhs - (cmin.sum() - cmin)) / a
    return np.minimum(q1, q2), np.maximum(q1, q2)


def propagate_bounds(A, b, lo=None, hi=None, tol=1e-9, max_sweeps=500):
    """Interval constraint propagation for ``A p = b`` with ``p`` in a box.

    Values pinned to a single point by some row are propagated first; then
    rows are swept in order, tightening bounds immediately.  An implied
    bound that contradicts the current (valid) bounds is recorded, not
    applied, so every recorded conflict is an infeasibility certificate.
    The one forcing a value furthest outside ``[0, 1]`` is returned.

    Returns
    -------
    lo, hi : ndarray
    conflict : dict or None
        ``{"row", "cell", "value"}``.
    """
    nvar = A.shape[1]
    lo = np.zeros(nvar) if lo is None else np.array(lo, dtype=float)
    hi = np.ones(nvar) if hi is None else np.array(hi, dtype=float)
    rows = [(r, np.nonzero(np.abs(A[r]) > 1e-14)[0]) for r in range(A.shape[0])]
    rows = [(r, idx, A[r, idx]) for r, idx in rows if idx.size]
    conflicts = {}

    def visit(r, idx, a):
        imp_lo, imp_hi = _row_implied(a, idx, b[r], lo, hi)
        over = imp_lo - hi[idx]
        under = lo[idx] - imp_hi
        bad = (over > tol) | (under > tol)
        for k in np.nonzero(bad)[0]:
            conflicts[(r, int(idx[k]))] = float(imp_lo[k] if over[k] > tol else imp_hi[k])
        ok = ~bad
        if not np.any(ok):
            return 0.0
        j = idx[ok]
        new_lo = np.maximum(lo[j], imp_lo[ok])
        new_hi = np.maximum(np.minimum(hi[j], imp_hi[ok]), new_lo)
        step = max(float(np.max(new_lo - lo[j])), float(np.max(hi[j] - new_hi)))
        lo[j], hi[j] = new_lo, new_hi
        return step

    # breadth-first pinning: every round uses the bounds from the previous one,
    # so the shortest chains of deductions are found first
    for _ in range(max_sweeps):
        lo0, hi0 = lo.copy(), hi.copy()
        pins = {}
        for r, idx, a in rows:
            imp_lo, imp_hi = _row_implied(a, idx, b[r], lo0, hi0)
            bad = (imp_lo - hi0[idx] > tol) | (lo0[idx] - imp_hi > tol)
            for k in np.nonzero(bad)[0]:
                over = imp_lo[k] - hi0[idx[k]] > tol
                conflicts[(r, int(idx[k]))] = float(imp_lo[k] if over else imp_hi[k])
            pl = np.maximum(lo0[idx], imp_lo)
            ph = np.minimum(hi0[idx], imp_hi)
            for k in np.nonzero(~bad & (ph - pl <= tol) & (hi0[idx] - lo0[idx] > tol))[0]:
                pins.setdefault(int(idx[k]), 0.5 * (pl[k] + ph[k]))
        if not pins:
            break
        for i, v in pins.items():
            lo[i] = hi[i] = v
    for _ in range(max_sweeps):
        if max((visit(r, idx, a) for r, idx, a in rows), default=0.0) < 1e-14:
            break
    if not conflicts:
        return lo, hi, None
    excursion = {k: max(v - 1.0, -v) for k, v in conflicts.items()}
    (r, i) = max(excursion, key=lambda k: (excursion[k], -k[0], -k[1]))
    return lo, hi, {"row": int(r), "cell": int(i), "value": conflicts[(r, i)]}


def _step_probability(p_edges, values):
    """Full ``[0, 1]`` step probability: ``values`` on the ``p`` cells, 1 elsewhere."""
    edges = np.unique(np.concatenate([[0.0, 1.0], p_edges]))
    mid = 0.5 * (edges[:-1] + edges[1:])
    k = np.searchsorted(p_edges, mid, side="right") - 1
    inside = (k >= 0) & (k < len(values))
    vals = np.where(inside, np.asarray(values)[np.clip(k, 0, len(values) - 1)], 1.0)
    return PiecewiseAffineProbability.step(edges, vals, arbitrary=~inside)


def infeasibility_probe(tau1, tau2, selector, f, p_edges=None, refine=80, tol=1e-9):
    """Decide whether a step probability makes the random map preserve ``f``.

    ``f`` is the selector's step density (it is checked to be invariant for
    the selector).  The invariance conditions are propagated as interval
    constraints on a fine step ``p``; a value forced outside ``[0, 1]`` is an
    infeasibility certificate.  Otherwise a linear program looks for a
    satisfying ``p``, preferring ``p = 1``.
    """
    notes = []
    if selector is not None:
        from .fperron import deterministic_residual
        sel_res = deterministic_residual(selector, f, 2048)[1]
        notes.append(f"selector invariance residual {sel_res:.3g}")
    if p_edges is None:
        p_edges = default_p_edges(tau1, tau2, refine)
    system = step_system(tau1, tau2, f, p_edges)
    A, b = system.A, system.b
    if A.shape[1] == 0:
        res = float(np.max(np.abs(b)))
        ok = res <= 1e-9
        return SolverReport(_step_probability(p_edges, []), res, ok, None,
                            verdict="Feasible" if ok else "Infeasible", notes=notes)
    lo, hi, conflict = propagate_bounds(A, b, tol=tol)
    if conflict is not None:
        r, i = conflict["row"], conflict["cell"]
        xe, pe = system.x_edges, system.p_edges
        witness = {"x": [float(xe[r]), float(xe[r + 1])],
                   "cell": [float(pe[i]), float(pe[i + 1])], "p": conflict["value"]}
        return SolverReport(None, float("nan"), False, witness, verdict="Infeasible",
                            forced_value=conflict["value"], notes=notes)
    widths = np.diff(system.p_edges)
    lp = linprog(-widths, A_eq=A, b_eq=b, bounds=list(zip(lo, hi)), method="highs")
    if lp.status != 0:
        best = lsq_linear(A, b, bounds=(0.0, 1.0))
        res = float(np.max(np.abs(A @ best.x - b)))
        notes.append(f"linear program status {lp.status}: {lp.message}")
        return SolverReport(_step_probability(p_edges, best.x), res, False,
                            verdict="Infeasible", notes=notes)
    values = np.clip(lp.x, 0.0, 1.0)
    res = float(np.max(np.abs(A @ values - b)))
    p = _step_probability(system.p_edges, values)
    R = RandomMap(tau1, tau2, p)
    fp_res = invariance_residual(R, f, 2048)[1]
    return SolverReport(p, res, res <= 1e-7, None, verdict="Feasible" if res <= 1e-7 else "Infeasible",
                        fp_residual=fp_res, notes=notes)


@dataclass
class StepSearch:
    """Best bounded step probability on a fixed partition."""

    values: np.ndarray
    residual_linf: float
    residual_l2: float
    p_edges: np.ndarray


def step_search(tau1, tau2, f, p_edges):
    """Minimize the invariance residual over step ``p`` with values in ``[0, 1]``."""
    system = step_system(tau1, tau2, f, p_edges)
    w = np.sqrt(np.diff(system.x_edges))
    sol = lsq_linear(system.A * w[:, None], system.b * w, bounds=(0.0, 1.0),
                     tol=1e-14, lsmr_tol="auto", max_iter=10000)
    r = system.A @ sol.x - system.b
    return StepSearch(sol.x, float(np.max(np.abs(r))), float(np.sqrt(np.sum(w * w * r * r))),
                      np.asarray(p_edges, float))


__all__ = [
    "SolverParams", "SolverReport", "SeriesSolution", "SeriesProbability", "choose_a_hat",
    "solve_lebesgue", "solve_general", "closed_form_quadratic", "closed_form_coefficients",
    "infeasibility_probe", "step_search", "step_system", "propagate_bounds", "terms_for",
    "lebesgue_kernel", "general_kernel", "first_lap_end", "ComposedMap",
]
