"""Boundary maps, selectors and probability functions of the worked examples.

Every constructor returns plain library objects so the examples can be fed to
any solver.  The naming follows the example numbering used throughout the
docs: ``example1`` (quadratic first lap, linear tail), ``example2``/``example3``
(semi-Markov five-branch maps), ``example4``/``example5`` (series solver
cases) and ``singular`` (two maps without acims whose random combination
preserves Lebesgue measure).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial import Polynomial

from .density import StepDensity
from .piecewise import Branch, PiecewiseMap
from .probability import PiecewiseAffineProbability


@dataclass
class BoundaryPair:
    """Lower and upper boundary maps plus example metadata."""

    tau1: PiecewiseMap
    tau2: PiecewiseMap
    a: float | None = None
    p: object = None
    extra: dict = field(default_factory=dict)


def triangle():
    """The tent map ``2x`` on ``[0, 1/2]``, ``2 - 2x`` on ``[1/2, 1]``."""
    return PiecewiseMap([Branch.affine(0.0, 0.5, 2.0, 0.0), Branch.affine(0.5, 1.0, -2.0, 2.0)])


def times_mod_one(k, lo=0.0):
    """Branches of ``k x mod 1`` on ``[lo, 1]`` (``lo`` a multiple of ``1/k``)."""
    start = int(round(lo * k))
    return [Branch.affine(i / k, (i + 1) / k, float(k), -float(i)) for i in range(start, k)]


def linear_tail(a):
    """Decreasing onto tail ``(1 - x)/(1 - a)`` on ``[a, 1]``."""
    s = 1.0 / (1.0 - a)
    return Branch(a, 1.0, [s, -s])


def quadratic_lap(a, b):
    """``c x**2 + b x`` on ``[0, a]`` with ``c`` chosen so that ``tau(a) = 1``."""
    return Branch(0.0, a, [0.0, b, (1.0 - a * b) / a ** 2])


def example1(a=1 / 3, b1=0.5, b2=4.5):
    """Quadratic first laps and a common linear tail.

    The closed-form probability ``A + B x`` is attached as ``p`` (with the
    conventional value 1 on ``(a, 1]``).
    """
    from .probsolver import closed_form_quadratic

    tail = linear_tail(a)
    tau1 = PiecewiseMap([quadratic_lap(a, b1), tail])
    tau2 = PiecewiseMap([quadratic_lap(a, b2), tail])
    return BoundaryPair(tau1, tau2, a, closed_form_quadratic(a, b1, b2),
                        {"b1": b1, "b2": b2})


def example2():
    """Semi-Markov boundary maps around the selector ``5x mod 1``."""
    tail = times_mod_one(5, 0.2)
    tau1 = PiecewiseMap([Branch.affine(0.0, 0.1, 2.0, 0.0), Branch.affine(0.1, 0.2, 8.0, -0.6)] + tail)
    tau2 = PiecewiseMap([Branch.affine(0.0, 0.1, 8.0, 0.0), Branch.affine(0.1, 0.2, 2.0, 0.6)] + tail)
    p = PiecewiseAffineProbability.step([0.0, 0.1, 0.2, 1.0], [0.2, 0.8, 1.0],
                                        arbitrary=[False, False, True])
    return BoundaryPair(tau1, tau2, 0.2, p, {
        "selector": PiecewiseMap(times_mod_one(5)),
        "edges": np.array([0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0]),
        "p_cells": np.array([0.2, 0.8, 1.0, 1.0, 1.0, 1.0]),
        "printed_matrix": np.array([
            [0.2, 0.2, 0.1, 0.1, 0.1, 0.0],
            [0.0, 0.0, 0.1, 0.1, 0.1, 0.2],
            [0.2] * 6, [0.2] * 6, [0.2] * 6, [0.2] * 6]),
    })


def example3():
    """Same boundary maps as :func:`example2` with the bent selector.

    ``extra["f"]`` is the selector's invariant step density with exact
    rational values ``30/31`` and ``65/62``.
    """
    pair = example2()
    selector = PiecewiseMap([Branch.affine(0.0, 0.1, 6.0, 0.0), Branch.affine(0.1, 0.2, 4.0, 0.2)]
                            + times_mod_one(5, 0.2))
    f = StepDensity([Fraction(0), Fraction(3, 5), Fraction(1)], [Fraction(30, 31), Fraction(65, 62)])
    return BoundaryPair(pair.tau1, pair.tau2, 0.2, None, {"selector": selector, "f": f})


def example4():
    """``tau1 = 2x**2 + x``, ``tau2 = -2x**2 + 3x`` on ``[0, 1/2]``; solution ``x + 1/4``."""
    a = 0.5
    tail = linear_tail(a)
    tau1 = PiecewiseMap([Branch(0.0, a, [0.0, 1.0, 2.0]), tail])
    tau2 = PiecewiseMap([Branch(0.0, a, [0.0, 3.0, -2.0]), tail])
    p = PiecewiseAffineProbability.affine(0.25, 1.0, upto=a)
    return BoundaryPair(tau1, tau2, a, p)


# the two quadratic pieces of the lower map, as published (10 digits)
EXAMPLE5_PIECES = ([0.0, 1.365128205, 4.0 / 3.0],
                   [2.323374150, -34.37908948, 138.8110936])


def example5():
    """Two-piece C1 first laps on ``[0, 1/5]`` for which no probability exists.

    The published coefficients give ``tau1(1/5) = 1 - 2e-9``; both pieces are
    divided by that value so the lap is exactly onto ``[0, 1]``.  The relative
    change is far below the printed precision.
    """
    a = 0.2
    c1, c2 = (Polynomial(c) for c in EXAMPLE5_PIECES)
    scale = c2(a)
    c1, c2 = c1 / scale, c2 / scale
    flip = Polynomial([a, -1.0])
    d1 = 1.0 - c2(flip)          # upper map on [0, 0.07]
    d2 = 1.0 - c1(flip)          # upper map on [0.07, 0.2]
    tail = linear_tail(a)
    tau1 = PiecewiseMap([Branch(0.0, 0.13, c1.coef), Branch(0.13, a, c2.coef), tail])
    tau2 = PiecewiseMap([Branch(0.0, a - 0.13, d1.coef), Branch(a - 0.13, a, d2.coef), tail])
    return BoundaryPair(tau1, tau2, a, None, {"scale": float(scale)})


def _shifted(c, shift):
    return (Polynomial(c)(Polynomial([-shift, 1.0]))).coef


def singular_map(b):
    """Quadratic lap ``a_i x**2 + b x`` on ``[0, 1/2]`` repeated on ``[1/2, 1]``."""
    c = [0.0, b, 4.0 * (1.0 - b / 2.0)]
    return PiecewiseMap([Branch(0.0, 0.5, c), Branch(0.5, 1.0, _shifted(c, 0.5))])


def singular(b1=0.5, b2=3.5):
    """Maps without acims whose random map preserves Lebesgue measure."""
    from .probsolver import closed_form_quadratic

    p = closed_form_quadratic(0.5, b1, b2, periodic=True)
    return BoundaryPair(singular_map(b1), singular_map(b2), 0.5, p, {"b1": b1, "b2": b2})


EXAMPLES = {
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "example4": example4,
    "example5": example5,
    "singular": singular,
}
