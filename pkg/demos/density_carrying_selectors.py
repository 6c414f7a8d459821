"""Build selectors that carry a chosen invariant density.

Given the boundary maps and their invariant distributions F1, F2, every
mixture lam F1 + (1 - lam) F2 is the invariant distribution of some selector
between them.  Likewise the invariant density of any random map on the
boundaries belongs to some selector.  Both are built from extended inverses
and checked against the transfer operator.
"""

import warnings

from holomap import catalog
from holomap.density import cumulative
from holomap.fperron import deterministic_residual
from holomap.selector import selector_from_mixture, selector_from_random_pdf
from holomap.semimarkov import induced_matrix, invariant_step_density


def main():
    pair = catalog.example2()
    E = pair.extra["edges"]
    F1 = cumulative(invariant_step_density(induced_matrix(pair.tau1, E)))
    F2 = cumulative(invariant_step_density(induced_matrix(pair.tau2, E)))
    for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
        b = selector_from_mixture(pair.tau1, pair.tau2, F1, F2, lam)
        res = deterministic_residual(b.selector, b.density)[1]
        print(f"mixture lam={lam:.2f}: residual {res:.1e}, between bounds: {b.between}")

    for name in ("example2", "example1", "singular"):
        p = getattr(catalog, name)()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            b = selector_from_random_pdf(p.tau1, p.tau2, p.p, 1.0)
        res = deterministic_residual(b.selector, 1.0)[1]
        print(f"{name}: Lebesgue-preserving selector with {b.selector.m} branches, "
              f"residual {res:.1e}")


if __name__ == "__main__":
    main()
