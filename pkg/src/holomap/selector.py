"""Selectors between two boundary maps that realize a prescribed density.

Both constructions describe each selector branch through its extended
inverse, a monotone function of ``y`` with values in the branch domain:

* mixtures of the boundary maps' invariant distributions,
  ``tau_j^{-1}(y) = F^{-1}(lam F1(ext tau1_j^{-1} y) + (1-lam) F2(ext tau2_j^{-1} y))``;
* the invariant density ``f`` of a random map ``{tau1, tau2; p, 1-p}``,
  ``tau_j^{-1}(y) = F^{-1}(int_0^{ext tau1_j^{-1} y} p f + int_0^{ext tau2_j^{-1} y} (1-p) f)``.

The extended inverse is tabulated on a ``y`` grid that also contains every
kink (images of breakpoints and the points where the argument of ``F^{-1}``
crosses a breakpoint value of ``F``), then flipped into a
:class:`~holomap.piecewise.TableBranch`.  Flat stretches of the table are the
"vertical segments" of the construction and are dropped, so the selector
simply jumps there.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .density import DEFAULT_GRID, cumulative, grid_nodes, inverse_cdf, mix
from .errors import DomainError, PreconditionError, StructureError
from .fperron import RandomMap, as_function, invariance_residual
from .piecewise import BaseBranch, FunctionBranch, PiecewiseMap, TableBranch, common_refinement

FLAT_TOL = 1e-14
# runs shorter than this in y are duplicate nodes, not vertical segments
Y_TOL = 1e-12


@dataclass
class SelectorBuild:
    """A constructed selector with its tables and between-bounds report."""

    selector: PiecewiseMap
    tables: list
    lower_gap: float
    upper_gap: float
    n: int
    density: object = None
    meta: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def between(self):
        """True when the selector stays between the boundary maps up to ``2/n``."""
        slack = -2.0 / self.n
        return self.lower_gap >= slack and self.upper_gap >= slack

    def to_csv(self, path, n=None):
        n = self.n if n is None else n
        x = grid_nodes(n)
        y = self.selector(x)
        with open(path, "w") as fh:
            fh.write("x,tau(x)\n")
            for xi, yi in zip(x, y):
                fh.write(f"{xi:.12g},{yi:.12g}\n")


def _crossings(u, targets, increasing, iters=64):
    """``y`` in ``[0, 1]`` with ``u(y) = c`` for each target ``c`` (``u`` monotone)."""
    c = np.asarray(targets, dtype=float)
    if c.size == 0:
        return c
    a = np.zeros_like(c)
    b = np.ones_like(c)
    sign = 1.0 if increasing else -1.0
    for _ in range(iters):
        m = 0.5 * (a + b)
        right = sign * (u(m) - c) < 0
        a = np.where(right, m, a)
        b = np.where(right, b, m)
    return 0.5 * (a + b)


def _table_branch(lo, hi, y, s):
    """Turn a tabulated extended inverse ``s(y)`` into a branch on ``[lo, hi]``."""
    s = np.clip(s, lo, hi)
    s = np.maximum.accumulate(s) if s[-1] >= s[0] else np.minimum.accumulate(s)
    # runs within FLAT_TOL of their first sample are (nearly) vertical segments;
    # the run at y = 0 keeps its last sample, the run at y = 1 its first, and
    # interior runs spanning more than Y_TOL keep both ends so that kinks at
    # the run ends stay put
    n = s.size
    keep = np.zeros(n, bool)
    i0 = 0
    for i in range(1, n + 1):
        if i < n and abs(s[i] - s[i0]) <= FLAT_TOL:
            continue
        i1 = i - 1
        if i0 == 0:
            keep[i1] = True
        elif i1 == n - 1:
            keep[i0] = True
        else:
            keep[i0] = True
            keep[i1] |= (s[i1] != s[i0]) and (y[i1] - y[i0] > Y_TOL)
        i0 = i
    xs, ys = s[keep], y[keep]
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    if xs.size < 2:
        raise StructureError(f"selector branch on [{lo}, {hi}] collapsed to a point")
    xs[0], xs[-1] = lo, hi
    good = np.concatenate([[True], np.diff(xs) > 0])
    return TableBranch(xs[good], ys[good])


def _finv(F):
    return lambda u: inverse_cdf(F, np.clip(u, 0.0, F.values[-1]))


def _bounds_report(tau1, tau2, selector, samples=20):
    lower, upper = np.inf, np.inf
    for b1, b2, bs in zip(tau1.branches, tau2.branches, selector.branches):
        x = np.linspace(b1.lo, b1.hi, samples * 50 + 1)
        v1, v2, vs = b1(x), b2(x), bs(x)
        lower = min(lower, float(np.min(vs - np.minimum(v1, v2))))
        upper = min(upper, float(np.min(np.maximum(v1, v2) - vs)))
    return lower, upper


def _y_nodes(n, branches, extra_points):
    pts = [grid_nodes(n)]
    for b in branches:
        pts.append(np.asarray(b.image))
        inside = extra_points[(extra_points > b.lo) & (extra_points < b.hi)]
        if inside.size:
            pts.append(np.asarray(b(inside), dtype=float))
    y = np.unique(np.clip(np.concatenate(pts), 0.0, 1.0))
    return y


def _assemble(tau1, tau2, n, G, finv, targets, extra_points):
    """Shared construction: ``G(j, y)`` is the argument of ``F^{-1}``."""
    branches, tables = [], []
    for j, (b1, b2) in enumerate(zip(tau1.branches, tau2.branches)):
        if b1.increasing != b2.increasing:
            raise PreconditionError(f"boundary branches {j} have different monotonicity")
        y = _y_nodes(n, (b1, b2), extra_points)

        def u(yy, j=j):
            return G(j, yy)

        lo_u, hi_u = sorted((float(u(np.array(0.0))), float(u(np.array(1.0)))))
        c = targets[(targets > lo_u) & (targets < hi_u)]
        if c.size:
            y = np.union1d(y, _crossings(u, c, b1.increasing))
        s = finv(u(y))
        tables.append((y, s))
        branches.append(_table_branch(b1.lo, b1.hi, y, s))
    return PiecewiseMap(branches), tables


def selector_from_mixture(tau1, tau2, F1, F2, lam, n=DEFAULT_GRID):
    """Selector preserving ``lam F1 + (1 - lam) F2`` (invariant distributions of the boundary maps).

    Parameters
    ----------
    tau1, tau2 : PiecewiseMap
        Boundary maps, refined onto a common partition internally.
    F1, F2 : DistributionFn
        Continuous invariant distribution functions of ``tau1`` and ``tau2``.
    lam : float
        Mixing weight in ``[0, 1]``; ``1`` reproduces ``tau1`` and ``0``
        reproduces ``tau2``.
    """
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"mixing weight {lam} outside [0, 1]")
    for name, F in (("F1", F1), ("F2", F2)):
        problems = F.check(1e-8)
        if problems:
            raise PreconditionError(f"{name} is not a distribution function: {problems}")
    t1, t2 = common_refinement(tau1, tau2)
    F = mix(F1, F2, lam)

    def G(j, y):
        e1 = t1.branches[j].extended_inverse(y)
        e2 = t2.branches[j].extended_inverse(y)
        return lam * F1(e1) + (1 - lam) * F2(e2)

    bps = np.union1d(F1.edges, F2.edges)
    selector, tables = _assemble(t1, t2, n, G, _finv(F), F(bps), bps)
    lower, upper = _bounds_report(t1, t2, selector)
    return SelectorBuild(selector, tables, lower, upper, n, F.density(),
                         {"source": "mixture", "lambda": lam})


class _Product:
    """``p * f`` (or ``(1 - p) * f``) with merged breakpoints."""

    def __init__(self, p, f, complement=False):
        self.p, self.f, self.complement = as_function(p), as_function(f), complement
        self.breakpoints = np.union1d(np.asarray(getattr(p, "breakpoints", [0.0, 1.0]), float),
                                      np.asarray(getattr(f, "breakpoints", [0.0, 1.0]), float))

    def __call__(self, x):
        pv = self.p(x)
        return ((1.0 - pv) if self.complement else pv) * self.f(x)


def selector_from_random_pdf(tau1, tau2, p, f, n=DEFAULT_GRID, invariance_tol=1e-6):
    """Selector whose invariant density is the random map's invariant density ``f``.

    Preconditions checked: ``f`` is invariant for ``{tau1, tau2; p, 1-p}``
    (midpoint residual at most ``invariance_tol``), ``f > 0`` on the grid and
    the boundary branches share monotonicity.  Slopes not exceeding 1 only
    produce a warning since the construction itself does not use them.
    """
    R = RandomMap(tau1, tau2, p)
    if not R.same_monotonicity():
        raise PreconditionError("boundary maps differ in monotonicity on some interval")
    res = invariance_residual(R, f, min(n, 4096))[1]
    if res > invariance_tol:
        raise PreconditionError(f"f is not invariant for the random map (residual {res:.3g})")
    f_fn = as_function(f)
    fv = f_fn(grid_nodes(n))
    if np.any(fv <= 1e-9):
        raise PreconditionError("f must be positive almost everywhere")
    notes = []
    slope = min(np.min(np.abs(R.tau1.deriv(grid_nodes(n)))), np.min(np.abs(R.tau2.deriv(grid_nodes(n)))))
    if slope <= 1.0:
        notes.append(f"boundary maps are not expanding (min slope {slope:.3g})")
        warnings.warn(notes[-1], stacklevel=2)
    t1, t2 = R.tau1, R.tau2
    Pf = cumulative(_Product(p, f), n, normalize=False)
    Qf = cumulative(_Product(p, f, complement=True), n, normalize=False)
    bigF = cumulative(f if hasattr(f, "breakpoints") else f_fn, n, normalize=False)

    def G(j, y):
        e1 = t1.branches[j].extended_inverse(y)
        e2 = t2.branches[j].extended_inverse(y)
        return Pf(e1) + Qf(e2)

    bps = np.union1d(Pf.edges, bigF.edges)
    selector, tables = _assemble(t1, t2, n, G, _finv(bigF), bigF(bigF.edges), bps)
    lower, upper = _bounds_report(t1, t2, selector)
    return SelectorBuild(selector, tables, lower, upper, n, f,
                         {"source": "random-map pdf"}, notes)


def _as_branch(h):
    if isinstance(h, PiecewiseMap):
        if h.m != 1:
            raise PreconditionError("a conjugacy must be a single increasing branch")
        h = h.branches[0]
    if not isinstance(h, BaseBranch):
        raise PreconditionError("a conjugacy must be a branch or a one-branch map")
    x = np.linspace(0.0, 1.0, 2001)
    if (abs(h.lo) > 1e-12 or abs(h.hi - 1) > 1e-12 or abs(h(0.0)) > 1e-12
            or abs(h(1.0) - 1) > 1e-12 or np.any(h.deriv(x) <= 0)):
        raise PreconditionError("a conjugacy must be an increasing bijection of [0, 1]")
    return h


def conjugated_triangle(h):
    """``h^{-1} o Lambda o h`` for an increasing bijection ``h`` (a branch)."""
    c = float(h.inverse(0.5))

    def left(x):
        return h.inverse(np.clip(2.0 * h(x), 0.0, 1.0))

    def right(x):
        return h.inverse(np.clip(2.0 - 2.0 * h(x), 0.0, 1.0))

    b1 = FunctionBranch(0.0, c, left, lambda x: 2.0 * h.deriv(x) / h.deriv(left(x)),
                        lambda y: h.inverse(0.5 * h(y)))
    b2 = FunctionBranch(c, 1.0, right, lambda x: -2.0 * h.deriv(x) / h.deriv(right(x)),
                        lambda y: h.inverse(1.0 - 0.5 * h(y)))
    return PiecewiseMap([b1, b2])


def conjugate_selector(h1, h2, lam, n=DEFAULT_GRID):
    """Selector ``h^{-1} o Lambda o h`` with ``h = lam h1 + (1 - lam) h2``.

    ``Lambda`` is the triangle map.  The invariant density of the result is
    ``h'`` (the pull-back of Lebesgue measure) and is returned as
    ``density``.  The report compares the selector with the pointwise
    envelope of ``h_i^{-1} o Lambda o h_i``.
    """
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"mixing weight {lam} outside [0, 1]")
    g1, g2 = _as_branch(h1), _as_branch(h2)
    h = FunctionBranch(0.0, 1.0, lambda x: lam * g1(x) + (1 - lam) * g2(x),
                       lambda x: lam * g1.deriv(x) + (1 - lam) * g2.deriv(x))
    sel = conjugated_triangle(h)
    tau1, tau2 = conjugated_triangle(g1), conjugated_triangle(g2)
    x = grid_nodes(n)
    v1, v2, vs = tau1(x), tau2(x), sel(x)
    lower = float(np.min(vs - np.minimum(v1, v2)))
    upper = float(np.min(np.maximum(v1, v2) - vs))
    build = SelectorBuild(sel, [], lower, upper, n, h.deriv, {"source": "conjugacy", "lambda": lam})
    if not build.between:
        build.warnings.append("selector leaves the envelope of the conjugated boundary maps")
    build.meta["boundary"] = (tau1, tau2)
    return build


__all__ = ["SelectorBuild", "selector_from_mixture", "selector_from_random_pdf",
           "conjugate_selector", "conjugated_triangle"]
