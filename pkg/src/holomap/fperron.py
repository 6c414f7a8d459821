"""Frobenius-Perron operators of deterministic and position-dependent random maps.

For a map with monotone branches ``tau_j`` the transfer operator is

    (P f)(x) = sum_j f(tau_j^{-1} x) / |tau'(tau_j^{-1} x)| * chi_{tau_j(I_j)}(x),

and for the random map ``R = {tau1, tau2; p, 1 - p}`` each term of ``tau1`` is
weighted by ``p`` and each term of ``tau2`` by ``1 - p`` at the preimage.

Conventions (the formulas hold only almost everywhere):

* branch images are half-open ``[lo, hi)`` except that ``1`` belongs to any
  image reaching it, so every point is counted once across adjacent laps;
* ``p`` and ``f`` are evaluated at preimages as limits from inside the branch
  domain, which keeps step functions on the correct side of knots;
* outputs are never renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numbers

import numpy as np

from .density import DEFAULT_GRID, DensityGrid, grid_midpoints, grid_nodes
from .errors import NumericError, StructureError
from .piecewise import EPS_MONO, PiecewiseMap, TableBranch, common_refinement
from .probability import RANGE_EPS, PiecewiseAffineProbability

INSIDE = 1e-12
ULP_NUDGE = 8


def as_function(f):
    """Turn numbers and density objects into vectorized callables."""
    if isinstance(f, numbers.Real):
        c = float(f)
        return lambda x: np.full(np.shape(x), c)
    if not callable(f):
        raise StructureError(f"cannot evaluate {type(f).__name__} as a function")
    return lambda x: np.asarray(f(x), dtype=float) * np.ones(np.shape(x))


def _in_image(branch, x):
    lo, hi = branch.image
    return (x >= lo - 1e-15) & ((x < hi) | ((hi >= 1.0 - 1e-15) & (x <= hi + 1e-15)))


def _preimage_terms(branch, x):
    """Mask, preimages (nudged inside where the slope degenerates) and ``|derivative|`` for one branch."""
    mask = _in_image(branch, x)
    y = np.zeros_like(x)
    d = np.ones_like(x)
    if np.any(mask):
        lo, hi = branch.lo, branch.hi
        delta = INSIDE * (hi - lo)
        # a few ulps keep preimages inside the branch; the wider nudge is only
        # for degenerate endpoint slopes, since near-vertical table segments
        # can be narrower than it
        ulps = ULP_NUDGE * np.spacing(max(abs(lo), abs(hi), 1.0))
        v = np.clip(x[mask], *branch.image)
        yy = np.clip(branch.inverse(v), lo + ulps, hi - ulps)
        if isinstance(branch, TableBranch):
            dd = np.abs(branch.slope_at_value(v))
        else:
            dd = np.abs(branch.deriv(yy))
        flat = ~((dd >= EPS_MONO) & np.isfinite(dd))
        if np.any(flat):
            yy[flat] = np.clip(yy[flat], lo + delta, hi - delta)
            dd[flat] = np.abs(branch.deriv(yy[flat]))
        if np.any(dd < EPS_MONO):
            bad = yy[np.argmin(dd)]
            raise NumericError(f"derivative below {EPS_MONO} at preimage {bad:.6g}")
        y[mask], d[mask] = yy, dd
    return mask, y, d


def fp_deterministic_at(tau, f, x):
    """``(P_tau f)(x)`` at arbitrary points ``x``."""
    f = as_function(f)
    x = np.asarray(x, dtype=float)
    xs = np.atleast_1d(x)
    out = np.zeros_like(xs)
    for b in tau.branches:
        mask, y, d = _preimage_terms(b, xs)
        if np.any(mask):
            out[mask] += f(y[mask]) / d[mask]
    return out.reshape(x.shape)


def fp_deterministic(tau, f, n=DEFAULT_GRID):
    """Transfer operator of a deterministic map sampled on the ``n``-grid."""
    return DensityGrid(fp_deterministic_at(tau, f, grid_nodes(n)))


class RandomMap:
    """Position-dependent random map ``{tau1, tau2; p, 1 - p}``.

    The two maps are refined onto a common partition at construction.  With
    ``check`` the probability is verified to lie in ``[0, 1]`` (up to
    ``1e-10``) on a grid; solvers that probe infeasible candidates pass
    ``check=False``.
    """

    def __init__(self, tau1, tau2, p, check=True, samples=4097):
        if isinstance(p, numbers.Real):
            p = PiecewiseAffineProbability.constant(float(p))
        self.tau1, self.tau2 = common_refinement(tau1, tau2)
        self.p = p
        self.partition = self.tau1.partition
        if check:
            x = np.union1d(np.linspace(0, 1, samples), self.partition)
            v = np.asarray(p(x), dtype=float)
            if np.any((v < -RANGE_EPS) | (v > 1 + RANGE_EPS)):
                k = int(np.argmax(np.maximum(-v, v - 1)))
                raise StructureError(f"p({x[k]:.6g}) = {v[k]:.6g} is not a probability")

    def same_monotonicity(self):
        return all(b1.increasing == b2.increasing
                   for b1, b2 in zip(self.tau1.branches, self.tau2.branches))

    def apply(self, x, u):
        """One step: ``tau1(x)`` where ``u < p(x)``, else ``tau2(x)``."""
        x = np.asarray(x, dtype=float)
        return np.where(u < self.p(x), self.tau1(x), self.tau2(x))


def fp_random_at(R, f, x):
    """``(P_R f)(x)`` at arbitrary points ``x``."""
    f = as_function(f)
    p = as_function(R.p)
    x = np.asarray(x, dtype=float)
    xs = np.atleast_1d(x)
    out = np.zeros_like(xs)
    for b1, b2 in zip(R.tau1.branches, R.tau2.branches):
        m, y, d = _preimage_terms(b1, xs)
        if np.any(m):
            out[m] += p(y[m]) * f(y[m]) / d[m]
        m, y, d = _preimage_terms(b2, xs)
        if np.any(m):
            out[m] += (1.0 - p(y[m])) * f(y[m]) / d[m]
    return out.reshape(x.shape)


def fp_random(R, f, n=DEFAULT_GRID):
    """Transfer operator of a random map sampled on the ``n``-grid."""
    return DensityGrid(fp_random_at(R, f, grid_nodes(n)))


def residual_at(values, target):
    """``(L1, Linf)`` of a midpoint-sampled difference."""
    d = np.abs(np.asarray(values) - np.asarray(target))
    return float(d.mean()), float(d.max())


def invariance_residual(R, f, n=DEFAULT_GRID):
    """``(L1, Linf)`` distance between ``P_R f`` and ``f``.

    Both are sampled at the ``n`` cell midpoints so that knots, where the
    equation need not hold, are never hit; ``L1`` is the midpoint rule.
    """
    x = grid_midpoints(n)
    return residual_at(fp_random_at(R, f, x), as_function(f)(x))


def deterministic_residual(tau, f, n=DEFAULT_GRID):
    """Midpoint ``(L1, Linf)`` distance between ``P_tau f`` and ``f``."""
    x = grid_midpoints(n)
    return residual_at(fp_deterministic_at(tau, f, x), as_function(f)(x))


@dataclass
class PelikanReport:
    """Outcome of the bounded-variation sufficient conditions."""

    sup_sum: float
    passed: bool
    min_slope: float
    slopes_above_two: bool
    total_variation: tuple
    notes: list = field(default_factory=list)


def pelikan_check(R, n=DEFAULT_GRID, alpha=1.0):
    """Check ``sup_x p/|tau1'| + (1-p)/|tau2'| < alpha`` on a grid.

    Also reports the smallest slope (``> 2`` is the sufficient expanding
    condition) and the grid total variation of ``g_k = p_k/|tau_k'|``.
    """
    x = grid_midpoints(n)
    p = as_function(R.p)(x)
    s1 = np.abs(R.tau1.deriv(x))
    s2 = np.abs(R.tau2.deriv(x))
    g1, g2 = p / s1, (1.0 - p) / s2
    total = g1 + g2
    sup_sum = float(total.max())
    min_slope = float(min(s1.min(), s2.min()))
    tv = (float(np.abs(np.diff(g1)).sum()), float(np.abs(np.diff(g2)).sum()))
    notes = []
    if sup_sum >= alpha:
        notes.append(f"sum of p_k/|tau_k'| reaches {sup_sum:.6g} near x={x[np.argmax(total)]:.6g}")
    return PelikanReport(sup_sum, sup_sum < alpha, min_slope, min_slope > 2.0, tv, notes)


def iterate_density(R, f, steps, n=DEFAULT_GRID):
    """Apply ``P_R`` repeatedly to a grid density (values at nodes)."""
    g = f if isinstance(f, DensityGrid) else DensityGrid.from_function(as_function(f), n, False)
    for _ in range(steps):
        g = DensityGrid(fp_random_at(R, g, grid_nodes(g.n)))
    return g


__all__ = [
    "RandomMap", "PiecewiseMap", "fp_deterministic", "fp_deterministic_at", "fp_random",
    "fp_random_at", "invariance_residual", "deterministic_residual", "pelikan_check",
    "PelikanReport", "as_function", "iterate_density",
]
