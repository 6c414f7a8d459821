"""Piecewise-monotone maps of the unit interval.

A :class:`PiecewiseMap` is a list of strictly monotone branches tiling
``[0, 1]``.  Branches share a small interface (``__call__``, ``deriv``,
``inverse``, ``extended_inverse``, ``image``) so that the transfer-operator
code does not care whether a branch is a polynomial, a chain of polynomials,
a tabulated selector branch or an analytic composition.

Evaluation is right-continuous at interior knots; ``x = 1`` belongs to the
last branch.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainError, RangeError, StructureError

EPS_MONO = 1e-9
IMAGE_TOL = 1e-12
DOMAIN_TOL = 1e-12


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


class BaseBranch:
    """Strictly monotone function on ``[lo, hi]``.

    Subclasses implement ``_eval``, ``_deriv`` and ``_inverse`` on arrays;
    the public methods handle scalars, range checks and clamping.
    """

    lo: float
    hi: float

    def _finish_init(self):
        ylo = float(self._eval(np.array(self.lo)))
        yhi = float(self._eval(np.array(self.hi)))
        if ylo == yhi:
            raise StructureError(f"branch on [{self.lo}, {self.hi}] is constant")
        self.increasing = yhi > ylo
        self.image = (min(ylo, yhi), max(ylo, yhi))

    def __call__(self, x):
        x, scalar = _as_array(x)
        return _out(self._eval(x), scalar)

    def deriv(self, x):
        x, scalar = _as_array(x)
        return _out(self._deriv(x), scalar)

    def inverse(self, y):
        """Solve ``branch(x) = y``; ``y`` must lie in the branch image."""
        y, scalar = _as_array(y)
        ymin, ymax = self.image
        bad = (y < ymin - IMAGE_TOL) | (y > ymax + IMAGE_TOL)
        if np.any(bad):
            raise RangeError(
                f"value {np.atleast_1d(y)[np.atleast_1d(bad)][0]!r} outside "
                f"branch image [{ymin}, {ymax}]")
        x = self._inverse(np.clip(y, ymin, ymax))
        return _out(np.clip(x, self.lo, self.hi), scalar)

    def extended_inverse(self, y):
        """Inverse clamped to the domain endpoints outside the image.

        For an increasing branch values below the image map to ``lo`` and
        values above it to ``hi``; a decreasing branch swaps the two.
        """
        y, scalar = _as_array(y)
        ymin, ymax = self.image
        x = np.asarray(self._inverse(np.clip(y, ymin, ymax)), dtype=float)
        x = np.clip(x, self.lo, self.hi)
        below, above = self.lo, self.hi
        if not self.increasing:
            below, above = above, below
        x = np.where(y <= ymin, below, np.where(y >= ymax, above, x))
        return _out(x, scalar)

    def restrict(self, lo, hi):
        """Copy of the branch on the sub-interval ``[lo, hi]``."""
        if lo < self.lo - DOMAIN_TOL or hi > self.hi + DOMAIN_TOL or hi <= lo:
            raise DomainError(
                f"[{lo}, {hi}] is not inside [{self.lo}, {self.hi}]")
        new = copy.copy(self)
        new.lo, new.hi = float(lo), float(hi)
        new._finish_init()
        return new

    # tiny helpers shared by subclasses
    def _bisect(self, y, iters=60):
        a = np.full_like(y, self.lo)
        b = np.full_like(y, self.hi)
        sign = 1.0 if self.increasing else -1.0
        for _ in range(iters):
            m = 0.5 * (a + b)
            go_right = sign * (self._eval(m) - y) < 0
            a = np.where(go_right, m, a)
            b = np.where(go_right, b, m)
        return 0.5 * (a + b)


class Branch(BaseBranch):
    """Polynomial branch ``sum_k coeffs[k] x**k`` on ``[lo, hi]``.

    Coefficients are in ascending degree order.  Degree is limited to 4;
    inversion is exact for affine branches, uses the numerically stable
    quadratic formula for quadratics and safeguarded bisection/Newton
    otherwise.
    """

    def __init__(self, lo, hi, coeffs):
        coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
        if coeffs.size < 2:
            raise StructureError("a branch needs a non-constant polynomial")
        if coeffs.size > 5:
            raise StructureError("polynomial branches are limited to degree 4")
        if not (0.0 - DOMAIN_TOL <= lo < hi <= 1.0 + DOMAIN_TOL):
            raise DomainError(f"bad branch domain [{lo}, {hi}]")
        self.lo, self.hi = float(lo), float(hi)
        self.poly = Polynomial(coeffs)
        self.dpoly = self.poly.deriv()
        self._finish_init()

    @classmethod
    def affine(cls, lo, hi, slope, intercept):
        return cls(lo, hi, [intercept, slope])

    @property
    def coeffs(self):
        return self.poly.coef.copy()

    @property
    def degree(self):
        return self.poly.coef.size - 1

    @property
    def is_affine(self):
        return self.degree == 1

    def _eval(self, x):
        return self.poly(x)

    def _deriv(self, x):
        return self.dpoly(x)

    def _inverse(self, y):
        c = self.poly.coef
        if self.degree == 1:
            return (y - c[0]) / c[1]
        if self.degree == 2 and abs(c[2]) > 1e-14 * (abs(c[1]) + abs(c[0]) + 1):
            a, b = c[2], c[1]
            cc = c[0] - y
            disc = np.sqrt(np.maximum(b * b - 4 * a * cc, 0.0))
            q = -0.5 * (b + np.copysign(disc, b))
            with np.errstate(divide="ignore", invalid="ignore"):
                r1 = q / a
                r2 = np.where(q != 0, cc / q, r1)
            d1 = np.maximum(np.maximum(self.lo - r1, r1 - self.hi), 0)
            d2 = np.maximum(np.maximum(self.lo - r2, r2 - self.hi), 0)
            x = np.where(d1 <= d2, r1, r2)
            return self._newton(x, y, steps=1)
        return self._newton(self._bisect(y, iters=50), y, steps=3)

    def _newton(self, x, y, steps):
        for _ in range(steps):
            d = self.dpoly(x)
            safe = np.abs(d) > EPS_MONO
            step = np.where(safe, (self.poly(x) - y) / np.where(safe, d, 1.0), 0.0)
            x = np.clip(x - step, self.lo, self.hi)
        return x

    def to_dict(self):
        if self.is_affine:
            c = self.poly.coef
            return {"type": "affine", "slope": float(c[1]), "intercept": float(c[0])}
        return {"type": "poly", "coeffs": [float(v) for v in self.poly.coef]}

    def __repr__(self):
        return f"Branch([{self.lo:g}, {self.hi:g}], coeffs={list(self.poly.coef)})"


class ChainBranch(BaseBranch):
    """Consecutive branches glued into one continuous monotone branch.

    Used for the first lap ``[0, a]`` of a boundary map when that lap is
    itself made of several polynomial pieces.
    """

    def __init__(self, branches, tol=1e-9):
        if not branches:
            raise StructureError("empty chain")
        for left, right in zip(branches, branches[1:]):
            if abs(left.hi - right.lo) > DOMAIN_TOL:
                raise StructureError("chain pieces are not adjacent")
            if abs(left(left.hi) - right(right.lo)) > tol:
                raise StructureError(f"chain is discontinuous at {left.hi}")
            if left.increasing != right.increasing:
                raise StructureError(f"chain changes monotonicity at {left.hi}")
        self.pieces = list(branches)
        self.lo, self.hi = self.pieces[0].lo, self.pieces[-1].hi
        self.knots = np.array([b.lo for b in self.pieces] + [self.hi])
        self._finish_init()

    def _index(self, x):
        k = np.searchsorted(self.knots, x, side="right") - 1
        return np.clip(k, 0, len(self.pieces) - 1)

    def _by_piece(self, x, method):
        x = np.asarray(x, dtype=float)
        xs = np.atleast_1d(x)
        k = self._index(xs)
        out = np.empty(xs.shape)
        for i, b in enumerate(self.pieces):
            m = k == i
            if np.any(m):
                out[m] = getattr(b, method)(xs[m])
        return out.reshape(x.shape)

    def _eval(self, x):
        return self._by_piece(x, "_eval")

    def _deriv(self, x):
        return self._by_piece(x, "_deriv")

    def _inverse(self, y):
        y = np.asarray(y, dtype=float)
        ys = np.atleast_1d(y)
        out = np.empty(ys.shape)
        done = np.zeros(ys.shape, bool)
        for b in self.pieces:
            ymin, ymax = b.image
            m = (~done) & (ys >= ymin - IMAGE_TOL) & (ys <= ymax + IMAGE_TOL)
            if np.any(m):
                out[m] = np.clip(b._inverse(np.clip(ys[m], ymin, ymax)), b.lo, b.hi)
            done |= m
        return out.reshape(y.shape)

    def restrict(self, lo, hi):
        parts = [b for b in self.pieces if b.hi > lo and b.lo < hi]
        parts = [b.restrict(max(b.lo, lo), min(b.hi, hi)) for b in parts]
        return parts[0] if len(parts) == 1 else ChainBranch(parts)


class TableBranch(BaseBranch):
    """Monotone branch given by a table, linearly interpolated.

    ``xs`` must be strictly increasing and ``ys`` strictly monotone.
    """

    def __init__(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise StructureError("table branch needs two matching 1-d arrays")
        if np.any(np.diff(xs) <= 0):
            raise StructureError("table abscissae must be strictly increasing")
        dy = np.diff(ys)
        if not (np.all(dy > 0) or np.all(dy < 0)):
            raise StructureError("table ordinates must be strictly monotone")
        self.xs, self.ys = xs, ys
        self.lo, self.hi = float(xs[0]), float(xs[-1])
        self._slopes = dy / np.diff(xs)
        self._finish_init()

    def _eval(self, x):
        return np.interp(x, self.xs, self.ys)

    def _deriv(self, x):
        k = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, self._slopes.size - 1)
        return self._slopes[k]

    def _inverse(self, y):
        if self.increasing:
            return np.interp(y, self.ys, self.xs)
        return np.interp(y, self.ys[::-1], self.xs[::-1])

    def slope_at_value(self, y):
        """Slope of the segment whose image holds ``y``.

        Chosen in ``y`` because a segment that is narrow in ``x`` can round
        its preimages onto a neighbouring segment.
        """
        y, scalar = _as_array(y)
        ys, slopes = (self.ys, self._slopes) if self.increasing else (self.ys[::-1], self._slopes[::-1])
        k = np.clip(np.searchsorted(ys, y, side="right") - 1, 0, slopes.size - 1)
        return _out(slopes[k], scalar)

    def restrict(self, lo, hi):
        inner = (self.xs > lo) & (self.xs < hi)
        xs = np.concatenate([[lo], self.xs[inner], [hi]])
        return TableBranch(xs, self._eval(xs))


class FunctionBranch(BaseBranch):
    """Branch defined by callables for the value, derivative and inverse."""

    def __init__(self, lo, hi, func, dfunc, inv=None):
        self.lo, self.hi = float(lo), float(hi)
        self.func, self.dfunc, self.inv = func, dfunc, inv
        self._finish_init()

    def _eval(self, x):
        return np.asarray(self.func(x), dtype=float)

    def _deriv(self, x):
        return np.asarray(self.dfunc(x), dtype=float)

    def _inverse(self, y):
        if self.inv is not None:
            return np.asarray(self.inv(y), dtype=float)
        x = self._bisect(np.asarray(y, dtype=float))
        return x


@dataclass
class ValidationReport:
    valid: bool
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.valid


class PiecewiseMap:
    """Piecewise-monotone map of ``[0, 1]`` built from tiling branches."""

    def __init__(self, branches):
        branches = list(branches)
        if not branches:
            raise StructureError("a map needs at least one branch")
        part = [branches[0].lo]
        for b in branches:
            if abs(b.lo - part[-1]) > DOMAIN_TOL:
                raise StructureError(
                    f"branch domains do not tile: gap or overlap at {part[-1]}")
            part.append(b.hi)
        if abs(part[0]) > DOMAIN_TOL or abs(part[-1] - 1.0) > DOMAIN_TOL:
            raise StructureError("branch domains must cover [0, 1]")
        self.branches = branches
        self.partition = np.array(part, dtype=float)
        self.partition[0], self.partition[-1] = 0.0, 1.0

    @classmethod
    def from_pieces(cls, partition, coeff_lists):
        """Build from a partition and one ascending coefficient list per cell."""
        if len(partition) != len(coeff_lists) + 1:
            raise StructureError("need one coefficient list per partition cell")
        return cls(Branch(lo, hi, c)
                   for lo, hi, c in zip(partition[:-1], partition[1:], coeff_lists))

    @property
    def m(self):
        return len(self.branches)

    def __len__(self):
        return len(self.branches)

    def _check_domain(self, x):
        if np.any((x < -DOMAIN_TOL) | (x > 1 + DOMAIN_TOL)) or np.any(np.isnan(x)):
            raise DomainError("map argument outside [0, 1]")

    def branch_index(self, x):
        x, scalar = _as_array(x)
        self._check_domain(x)
        k = np.clip(np.searchsorted(self.partition, x, side="right") - 1, 0, self.m - 1)
        return int(k) if scalar else k

    def _apply(self, x, method):
        x, scalar = _as_array(x)
        self._check_domain(x)
        xs = np.atleast_1d(x)
        k = np.clip(np.searchsorted(self.partition, xs, side="right") - 1, 0, self.m - 1)
        out = np.empty(xs.shape)
        for j, b in enumerate(self.branches):
            mask = k == j
            if np.any(mask):
                out[mask] = getattr(b, method)(xs[mask])
        return _out(out.reshape(x.shape), scalar)

    def __call__(self, x):
        return self._apply(x, "__call__")

    def deriv(self, x):
        return self._apply(x, "deriv")

    def branch_inverse(self, j, y):
        return self.branches[j].inverse(y)

    def extended_inverse(self, j, y):
        return self.branches[j].extended_inverse(y)

    def piece(self, lo, hi):
        """Branches covering ``[lo, hi]`` glued into one monotone branch."""
        inside = [b for b in self.branches
                  if b.lo >= lo - DOMAIN_TOL and b.hi <= hi + DOMAIN_TOL]
        if not inside or abs(inside[0].lo - lo) > DOMAIN_TOL or abs(inside[-1].hi - hi) > DOMAIN_TOL:
            raise StructureError(f"[{lo}, {hi}] is not a union of partition cells")
        return inside[0] if len(inside) == 1 else ChainBranch(inside)

    def refine(self, points):
        """Same map on a finer partition containing ``points``."""
        cuts = np.unique(np.concatenate([self.partition, np.asarray(points, float)]))
        out = []
        for b in self.branches:
            inner = cuts[(cuts > b.lo + DOMAIN_TOL) & (cuts < b.hi - DOMAIN_TOL)]
            edges = np.concatenate([[b.lo], inner, [b.hi]])
            if edges.size == 2:
                out.append(b)
            else:
                out.extend(b.restrict(lo, hi) for lo, hi in zip(edges[:-1], edges[1:]))
        return PiecewiseMap(out)

    @property
    def is_affine(self):
        return all(isinstance(b, Branch) and b.is_affine for b in self.branches)

    def validate(self, samples=1000):
        """Check tiling, monotonicity and image bounds; never raises."""
        problems = []
        if abs(self.partition[0]) > DOMAIN_TOL or abs(self.partition[-1] - 1) > DOMAIN_TOL:
            problems.append("partition does not span [0, 1]")
        for j, b in enumerate(self.branches):
            x = np.linspace(b.lo, b.hi, samples)
            d = b.deriv(x)
            if np.any(np.abs(d) < EPS_MONO):
                bad = x[np.argmin(np.abs(d))]
                problems.append(f"branch {j}: |derivative| below {EPS_MONO} near x={bad:.6g}")
            elif not (np.all(d > 0) or np.all(d < 0)):
                problems.append(f"branch {j}: derivative changes sign")
            y = b(x)
            if y.min() < -IMAGE_TOL or y.max() > 1 + IMAGE_TOL:
                problems.append(
                    f"branch {j}: image [{y.min():.6g}, {y.max():.6g}] leaves [0, 1]")
        return ValidationReport(not problems, problems)

    def to_dict(self):
        for b in self.branches:
            if not isinstance(b, Branch):
                raise StructureError("only polynomial maps serialize to JSON")
        return {"partition": [float(v) for v in self.partition],
                "branches": [b.to_dict() for b in self.branches]}

    @classmethod
    def from_dict(cls, data):
        part = data["partition"]
        specs = data["branches"]
        if len(part) != len(specs) + 1:
            raise StructureError("partition and branch list lengths disagree")
        out = []
        for lo, hi, spec in zip(part[:-1], part[1:], specs):
            kind = spec.get("type")
            if kind == "affine":
                out.append(Branch.affine(lo, hi, spec["slope"], spec["intercept"]))
            elif kind == "poly":
                out.append(Branch(lo, hi, spec["coeffs"]))
            else:
                raise StructureError(f"unknown branch type {kind!r}")
        return cls(out)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def __repr__(self):
        return f"PiecewiseMap(partition={list(np.round(self.partition, 12))})"


def common_refinement(*maps):
    """Refine every map onto the union of all partitions."""
    pts = np.unique(np.concatenate([m.partition for m in maps]))
    return tuple(m.refine(pts) for m in maps)


def eval_map(tau, x):
    return tau(x)


def deriv(tau, x):
    return tau.deriv(x)


def branch_inverse(tau, j, y):
    return tau.branch_inverse(j, y)


def extended_inverse(tau, j, y):
    return tau.extended_inverse(j, y)


def validate(tau, samples=1000):
    return tau.validate(samples)


class ComposedMap(BaseBranch):
    """``tau21 = tau2^{-1} o tau1`` on ``[0, a]``.

    ``inner`` and ``outer`` are the increasing first laps of the lower and
    upper boundary maps, both onto ``[0, 1]``.  The derivative uses the chain
    rule ``tau21'(y) = tau1'(y) / tau2'(tau21(y))``; the inverse is
    ``tau1^{-1} o tau2``.
    """

    def __init__(self, inner, outer, check=True, samples=1001):
        self.inner, self.outer = inner, outer
        self.lo, self.hi = 0.0, float(inner.hi)
        self.a = self.hi
        self._finish_init()
        if check:
            self._check(samples)

    def _eval(self, x):
        return np.clip(self.outer._inverse(np.clip(self.inner._eval(x), 0.0, 1.0)), 0.0, self.a)

    def _deriv(self, x):
        return self.inner._deriv(x) / self.outer._deriv(self._eval(x))

    def _inverse(self, z):
        return self.inner._inverse(np.clip(self.outer._eval(z), 0.0, 1.0))

    def value_and_deriv(self, x):
        """``tau21(x)`` and ``tau21'(x)`` sharing one inversion."""
        x = np.asarray(x, dtype=float)
        z = self._eval(x)
        return z, self.inner._deriv(x) / self.outer._deriv(z)

    def _check(self, samples):
        a = self.a
        if abs(self(0.0)) > 1e-10 or abs(self(a) - a) > 1e-10:
            raise StructureError("tau21 must fix both 0 and a")
        x = np.linspace(0.0, a, samples)[1:-1]
        gap = x - self(x)
        if np.any(gap <= 0):
            bad = x[np.argmin(gap)]
            raise StructureError(f"tau21(x) < x fails near x={bad:.6g}")

    def iterate(self, x, n):
        """``tau21^n(x)`` and ``(tau21^n)'(x)`` for ``n >= 0``."""
        x = np.asarray(x, dtype=float)
        d = np.ones_like(x)
        for _ in range(n):
            d = d * self._deriv(x)
            x = self._eval(x)
        return x, d


def compose_tau21(tau1, tau2, a, strict=True):
    """Build ``tau21`` from the first laps ``[0, a]`` of two boundary maps.

    With ``strict`` the result must satisfy ``tau21(x) < x`` inside
    ``(0, a)``; ``strict=False`` skips that check, e.g. to inspect
    ``tau1 = tau2`` where ``tau21`` is the identity.
    """
    inner = tau1.piece(0.0, a) if isinstance(tau1, PiecewiseMap) else tau1
    outer = tau2.piece(0.0, a) if isinstance(tau2, PiecewiseMap) else tau2
    for name, b in (("tau1", inner), ("tau2", outer)):
        if abs(b.hi - a) > DOMAIN_TOL or abs(b.lo) > DOMAIN_TOL:
            raise StructureError(f"{name} lap must be defined on [0, {a}]")
        if not b.increasing or abs(b.image[0]) > 1e-10 or abs(b.image[1] - 1) > 1e-10:
            raise StructureError(f"{name} must map [0, {a}] increasingly onto [0, 1]")
    return ComposedMap(inner, outer, check=strict)
