"""Densities on ``[0, 1]`` and their distribution functions.

Every density here is piecewise linear between breakpoints (possibly with
jumps at breakpoints), so its cumulative is piecewise quadratic and can be
evaluated and inverted in closed form.  :class:`DensityGrid` covers
grid-sampled densities, :class:`StepDensity` covers exact piecewise-constant
ones such as the cellwise densities of semi-Markov maps.
"""

from __future__ import annotations

import numbers
from fractions import Fraction

import numpy as np

from .errors import DomainError, StructureError

DEFAULT_GRID = 4096


def grid_nodes(n):
    return np.linspace(0.0, 1.0, n + 1)


def grid_midpoints(n):
    return (np.arange(n) + 0.5) / n


class DensityGrid:
    """Density sampled at ``x_i = i/n`` and linearly interpolated.

    The raw constructor accepts any finite values so that transfer-operator
    outputs can be inspected unnormalized; :meth:`check` tests the density
    invariants.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise StructureError("a density grid needs at least two nodes")
        if not np.all(np.isfinite(values)):
            raise StructureError("density values must be finite")
        self.values = values
        self.n = values.size - 1

    @classmethod
    def from_function(cls, f, n=DEFAULT_GRID, normalize=True):
        values = np.asarray(f(grid_nodes(n)), dtype=float) * np.ones(n + 1)
        values = np.where((values < 0) & (values >= -1e-12), 0.0, values)
        out = cls(values)
        if normalize:
            out = out.normalized()
        return out

    @property
    def x(self):
        return grid_nodes(self.n)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.x, self.values)
        return float(out) if out.ndim == 0 else out

    def integral(self):
        return float(np.trapezoid(self.values, dx=1.0 / self.n))

    def normalized(self):
        return DensityGrid(self.values / self.integral())

    def check(self, tol=1e-8):
        """Return a list of violated density invariants (empty if valid)."""
        problems = []
        if self.values.min() < -1e-12:
            problems.append(f"negative value {self.values.min():.3g}")
        if abs(self.integral() - 1.0) > tol:
            problems.append(f"integral {self.integral():.12g} != 1")
        return problems

    @property
    def breakpoints(self):
        return self.x

    def _segments(self):
        x = self.x
        return x, self.values[:-1], self.values[1:]

    def to_csv(self, path):
        write_density_csv(path, self.x, self.values, self.n)


class StepDensity:
    """Piecewise-constant density, right-continuous.

    Values may be :class:`fractions.Fraction` for exact bookkeeping; they are
    converted to floats for evaluation.
    """

    def __init__(self, edges, values, normalize=False):
        if len(edges) != len(values) + 1:
            raise StructureError("need one value per cell")
        exact = [v if isinstance(v, Fraction) else None for v in values]
        self.exact_values = exact if all(e is not None for e in exact) else None
        edges_f = np.asarray([float(e) for e in edges])
        vals_f = np.asarray([float(v) for v in values])
        if np.any(np.diff(edges_f) <= 0):
            raise StructureError("edges must be strictly increasing")
        if abs(edges_f[0]) > 1e-12 or abs(edges_f[-1] - 1) > 1e-12:
            raise StructureError("edges must span [0, 1]")
        if np.any(vals_f < -1e-12):
            raise StructureError("density values must be nonnegative")
        self.edges = edges_f
        self.exact_edges = list(edges)
        self.values = np.maximum(vals_f, 0.0)
        if normalize:
            self.values = self.values / self.integral()
            self.exact_values = None

    @property
    def widths(self):
        return np.diff(self.edges)

    def integral(self):
        if self.exact_values is not None and all(
                isinstance(e, (int, Fraction)) for e in self.exact_edges):
            e = self.exact_edges
            return sum(v * (e[i + 1] - e[i]) for i, v in enumerate(self.exact_values))
        return float(np.dot(self.values, self.widths))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.values.size - 1)
        out = self.values[k]
        return float(out) if out.ndim == 0 else out

    def cell_average(self, edges):
        """Averages over the cells of another partition."""
        F = cumulative(self)
        return np.diff(F(edges)) / np.diff(edges)

    @property
    def breakpoints(self):
        return self.edges

    def _segments(self):
        return self.edges, self.values, self.values

    def on_grid(self, n=DEFAULT_GRID):
        return DensityGrid(self(grid_nodes(n)))

    def to_csv(self, path, n=DEFAULT_GRID):
        x = grid_nodes(n)
        write_density_csv(path, x, self(x), n)


class LinearSegmentsDensity:
    """Density linear on each segment ``[edges[s], edges[s+1]]``.

    ``left[s]`` and ``right[s]`` are the one-sided values at the segment
    ends, so jumps at breakpoints are allowed.  This is the common form used
    to build distribution functions.
    """

    def __init__(self, edges, left, right):
        self.edges = np.asarray(edges, dtype=float)
        self.left = np.asarray(left, dtype=float)
        self.right = np.asarray(right, dtype=float)
        if not (self.left.size == self.right.size == self.edges.size - 1):
            raise StructureError("segment arrays have inconsistent sizes")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.left.size - 1)
        w = self.edges[s + 1] - self.edges[s]
        t = np.where(w > 0, (x - self.edges[s]) / np.where(w > 0, w, 1), 0.0)
        out = self.left[s] + (self.right[s] - self.left[s]) * t
        return float(out) if out.ndim == 0 else out

    @property
    def breakpoints(self):
        return self.edges

    def _segments(self):
        return self.edges, self.left, self.right


def as_segments(f, n=DEFAULT_GRID, extra=()):
    """Piecewise-linear representation of a density-like object.

    Objects exposing ``_segments`` are used as is.  Plain callables are
    sampled on the ``n``-grid plus ``extra`` breakpoints, taking one-sided
    limits so that jumps at those breakpoints are kept.
    """
    if isinstance(f, numbers.Real):
        c = float(f)
        return LinearSegmentsDensity(np.array([0.0, 1.0]), np.array([c]), np.array([c]))
    if hasattr(f, "_segments") and not len(extra):
        return LinearSegmentsDensity(*f._segments())
    edges = grid_nodes(n)
    bp = getattr(f, "breakpoints", None)
    if bp is not None and len(bp) < 8 * n:
        edges = np.union1d(edges, np.asarray(bp, dtype=float))
    if len(extra):
        edges = np.union1d(edges, np.asarray(extra, dtype=float))
    edges = edges[(edges >= 0) & (edges <= 1)]
    w = np.diff(edges)
    eps = np.minimum(1e-13, w * 1e-6)
    left = np.asarray(f(edges[:-1] + eps), dtype=float) * np.ones(w.size)
    right = np.asarray(f(edges[1:] - eps), dtype=float) * np.ones(w.size)
    return LinearSegmentsDensity(edges, left, right)


class DistributionFn:
    """Cumulative distribution function of a piecewise-linear density.

    On each segment ``[e_s, e_{s+1}]`` of width ``w`` the density rises
    linearly from ``left[s]`` to ``right[s]``, so
    ``F(x) = F_s + left[s]*t + (right[s]-left[s])*t**2/(2w)``, ``t = x-e_s``.
    """

    def __init__(self, edges, F_edges, left, right):
        self.edges = np.asarray(edges, dtype=float)
        self.values = np.asarray(F_edges, dtype=float)
        self.left = np.asarray(left, dtype=float)
        self.right = np.asarray(right, dtype=float)

    @classmethod
    def from_values(cls, x, F):
        """Piecewise-linear distribution function through ``(x_i, F_i)``."""
        x = np.asarray(x, dtype=float)
        F = np.asarray(F, dtype=float)
        if np.any(np.diff(F) < -1e-15):
            raise StructureError("distribution values must be nondecreasing")
        slope = np.diff(F) / np.diff(x)
        return cls(x, F, slope, slope)

    @property
    def n(self):
        return self.edges.size - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.left.size - 1)
        t = x - self.edges[s]
        w = self.edges[s + 1] - self.edges[s]
        out = self.values[s] + self.left[s] * t + (self.right[s] - self.left[s]) * t * t / (2 * w)
        out = np.where(x <= self.edges[0], self.values[0],
                       np.where(x >= self.edges[-1], self.values[-1], out))
        return float(out) if out.ndim == 0 else out

    def density(self):
        return LinearSegmentsDensity(self.edges, self.left, self.right)

    @property
    def breakpoints(self):
        return self.edges

    def inverse(self, u):
        return inverse_cdf(self, u)

    def check(self, tol=1e-8):
        problems = []
        if abs(self.values[0]) > tol:
            problems.append(f"F(0) = {self.values[0]:.3g}")
        if abs(self.values[-1] - 1) > tol:
            problems.append(f"F(1) = {self.values[-1]:.12g}")
        if np.any(np.diff(self.values) < -1e-14):
            problems.append("F decreases")
        return problems


def cumulative(f, n=DEFAULT_GRID, normalize=True):
    """Distribution function of a density.

    Exact for step and piecewise-linear densities (trapezoid rule on each
    linear segment is exact).  With ``normalize`` the result is rescaled so
    that ``F(1) = 1``.
    """
    seg = as_segments(f, n)
    w = np.diff(seg.edges)
    mass = 0.5 * (seg.left + seg.right) * w
    F = np.concatenate([[0.0], np.cumsum(mass)])
    left, right = seg.left, seg.right
    if normalize:
        total = F[-1]
        if total <= 0:
            raise DomainError("density has no mass")
        F, left, right = F / total, left / total, right / total
    return DistributionFn(seg.edges, F, left, right)


def inverse_cdf(F, u):
    """Generalized inverse ``min{x : F(x) >= u}``.

    Solves the per-segment quadratic in closed form; on flat stretches of
    ``F`` the left endpoint is returned.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr < -1e-12) | (u_arr > F.values[-1] + 1e-12)):
        raise DomainError("u outside [0, F(1)]")
    u = np.clip(np.atleast_1d(u_arr), F.values[0], F.values[-1])
    k = np.searchsorted(F.values, u, side="left")
    k = np.clip(k, 0, F.values.size - 1)
    hit = F.values[k] == u
    s = np.clip(k - 1, 0, F.left.size - 1)
    e0, w = F.edges[s], F.edges[s + 1] - F.edges[s]
    a = (F.right[s] - F.left[s]) / (2 * w)
    b = F.left[s]
    c = F.values[s] - u
    disc = np.sqrt(np.maximum(b * b - 4 * a * c, 0.0))
    # root of a t^2 + b t + c = 0 in [0, w], written to avoid cancellation
    denom = b + disc
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom > 0, -2 * c / denom, 0.0)
    x = np.clip(e0 + t, e0, e0 + w)
    x = np.where(hit, F.edges[k], x)
    return float(x[0]) if u_arr.ndim == 0 else x.reshape(u_arr.shape)


def mix(F1, F2, lam):
    """Convex combination ``lam*F1 + (1-lam)*F2`` on the union of breakpoints."""
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"mixing weight {lam} outside [0, 1]")
    edges = np.union1d(F1.edges, F2.edges)
    vals = lam * F1(edges) + (1 - lam) * F2(edges)
    l1, r1 = _refine(F1.edges, F1.left, F1.right, edges)
    l2, r2 = _refine(F2.edges, F2.left, F2.right, edges)
    return DistributionFn(edges, vals, lam * l1 + (1 - lam) * l2, lam * r1 + (1 - lam) * r2)


def _refine(edges, left, right, new_edges):
    """One-sided segment values of a piecewise-linear density on a refinement."""
    mid = 0.5 * (new_edges[:-1] + new_edges[1:])
    s = np.clip(np.searchsorted(edges, mid, side="right") - 1, 0, left.size - 1)
    w = edges[s + 1] - edges[s]
    slope = (right[s] - left[s]) / w
    return (left[s] + slope * (new_edges[:-1] - edges[s]),
            left[s] + slope * (new_edges[1:] - edges[s]))


def norms(f, g):
    """Trapezoid ``L1`` distance and max-node ``Linf`` distance of two grids."""
    if not isinstance(f, DensityGrid) or not isinstance(g, DensityGrid):
        raise StructureError("norms expects two DensityGrid objects")
    if f.n != g.n:
        raise StructureError(f"grid mismatch: n={f.n} vs n={g.n}")
    d = np.abs(f.values - g.values)
    return float(np.trapezoid(d, dx=1.0 / f.n)), float(d.max())


def write_density_csv(path, x, values, n):
    with open(path, "w") as fh:
        fh.write(f"# holomap density n={n}\n")
        for xi, vi in zip(x, values):
            fh.write(f"{xi:.12g},{vi:.12g}\n")


def read_density_csv(path):
    """Read a density CSV (``x,f(x)`` rows, ``#`` comments) into a grid."""
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    x, v = data[:, 0], data[:, 1]
    n = x.size - 1
    if not np.allclose(x, grid_nodes(n), atol=1e-10):
        raise StructureError("density CSV must be sampled on the uniform grid i/n")
    return DensityGrid(v)
