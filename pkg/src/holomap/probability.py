"""Position-dependent probability functions ``p: [0, 1] -> [0, 1]``."""

from __future__ import annotations

import numpy as np

from .errors import DomainError, StructureError

RANGE_EPS = 1e-10


class PiecewiseAffineProbability:
    """``p(x) = intercepts[k] + slopes[k] * x`` on ``[edges[k], edges[k+1])``.

    Covers the affine, step and periodized probability functions used by the
    boundary-map examples.  Right-continuous; ``x = 1`` uses the last cell.
    """

    def __init__(self, edges, intercepts, slopes=None, arbitrary=None):
        self.edges = np.asarray(edges, dtype=float)
        self.intercepts = np.asarray(intercepts, dtype=float)
        self.slopes = (np.zeros_like(self.intercepts) if slopes is None
                       else np.asarray(slopes, dtype=float))
        if not (self.intercepts.size == self.slopes.size == self.edges.size - 1):
            raise StructureError("need one affine piece per cell")
        if np.any(np.diff(self.edges) <= 0):
            raise StructureError("edges must be strictly increasing")
        # cells where the value does not matter because both maps agree
        self.arbitrary = (np.zeros(self.intercepts.size, bool) if arbitrary is None
                          else np.asarray(arbitrary, bool))

    @classmethod
    def constant(cls, value):
        return cls([0.0, 1.0], [value])

    @classmethod
    def step(cls, edges, values, arbitrary=None):
        return cls(edges, values, None, arbitrary)

    @classmethod
    def affine(cls, intercept, slope, upto=1.0, rest=1.0):
        """``intercept + slope*x`` on ``[0, upto]``, constant ``rest`` after.

        The tail value is a convention for the stretch where both boundary
        maps coincide and ``p`` does not affect the random map.
        """
        if upto >= 1.0:
            return cls([0.0, 1.0], [intercept], [slope])
        return cls([0.0, upto, 1.0], [intercept, rest], [slope, 0.0],
                   arbitrary=[False, True])

    @classmethod
    def periodic_affine(cls, intercept, slope, period=0.5):
        """``intercept + slope*(x mod period)`` repeated over ``[0, 1]``."""
        k = int(round(1.0 / period))
        if abs(k * period - 1.0) > 1e-12:
            raise DomainError("period must divide 1")
        edges = np.linspace(0.0, 1.0, k + 1)
        inter = intercept - slope * edges[:-1]
        return cls(edges, inter, np.full(k, slope))

    @property
    def breakpoints(self):
        return self.edges

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any((x < -1e-12) | (x > 1 + 1e-12)):
            raise DomainError("probability argument outside [0, 1]")
        k = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.intercepts.size - 1)
        out = self.intercepts[k] + self.slopes[k] * x
        return float(out) if out.ndim == 0 else out

    def with_arbitrary(self, value):
        """Copy with the arbitrary cells set to a constant ``value``."""
        inter = np.where(self.arbitrary, value, self.intercepts)
        slopes = np.where(self.arbitrary, 0.0, self.slopes)
        return PiecewiseAffineProbability(self.edges, inter, slopes, self.arbitrary)

    def cell_means(self, edges):
        """Exact averages of ``p`` over the cells of a partition."""
        edges = np.asarray(edges, dtype=float)
        return np.diff(self.antiderivative(edges)) / np.diff(edges)

    def antiderivative(self, x):
        """``int_0^x p(t) dt`` (exact)."""
        x = np.asarray(x, dtype=float)
        e = self.edges
        full = self.intercepts * np.diff(e) + 0.5 * self.slopes * np.diff(e ** 2)
        cum = np.concatenate([[0.0], np.cumsum(full)])
        k = np.clip(np.searchsorted(e, x, side="right") - 1, 0, self.intercepts.size - 1)
        part = self.intercepts[k] * (x - e[k]) + 0.5 * self.slopes[k] * (x ** 2 - e[k] ** 2)
        return cum[k] + part

    def to_dict(self):
        return {"edges": self.edges.tolist(), "intercepts": self.intercepts.tolist(),
                "slopes": self.slopes.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["edges"], data["intercepts"], data.get("slopes"))


class GridProbability:
    """Probability sampled on ascending nodes, linearly interpolated."""

    def __init__(self, x, values, breakpoints=None):
        self.x = np.asarray(x, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.x.shape != self.values.shape or np.any(np.diff(self.x) <= 0):
            raise StructureError("grid probability needs increasing nodes")
        self._bp = breakpoints

    @property
    def breakpoints(self):
        return self.x if self._bp is None else self._bp

    def __call__(self, x):
        out = np.interp(np.asarray(x, dtype=float), self.x, self.values)
        return float(out) if np.ndim(out) == 0 else out


def range_violation(p, x):
    """Largest excursion of ``p`` outside ``[0, 1]`` on the points ``x``.

    Returns ``(excess, x_at, p_at)``; ``excess <= 0`` means in range.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(p(x), dtype=float)
    excess = np.maximum(-v, v - 1.0)
    k = int(np.argmax(excess))
    return float(excess[k]), float(x[k]), float(v[k])


def clamp(values, eps=RANGE_EPS):
    """Clamp values lying within ``eps`` of ``[0, 1]``; reject the rest."""
    v = np.asarray(values, dtype=float)
    if np.any((v < -eps) | (v > 1 + eps)):
        raise DomainError("probability values outside [0, 1]")
    return np.clip(v, 0.0, 1.0)
