"""Find the probability that makes two quadratic laps preserve Lebesgue measure.

The lower map is slow near 0 and the upper one fast.  The series solver
returns p on the first lap; for quadratic laps it must be affine, and the
closed form gives the exact coefficients.  A lap pair whose derivative ratio
is large at the far end needs values of p far outside [0, 1], so no random
map built on it preserves Lebesgue measure.
"""

import numpy as np

from holomap import catalog
from holomap.probsolver import closed_form_coefficients, solve_lebesgue


def affine_case():
    pair = catalog.example1()
    rep = solve_lebesgue(pair.tau1, pair.tau2)
    x = np.linspace(0, pair.a, 9)
    A, B = closed_form_coefficients(pair.a, 0.5, 4.5)
    print("quadratic laps on [0, 1/3], slopes 0.5 and 4.5 at the origin")
    print(f"  closed form  p(x) = {A} + {B} x")
    for xi, pi in zip(x, rep.p(x)):
        print(f"  x={xi:.4f}  series p={pi:.10f}  closed form={float(A) + float(B) * xi:.10f}")
    print(f"  equation residual {rep.residual:.2e}, truncation bound {rep.truncation_bound:.1e}")


def infeasible_case():
    pair = catalog.example5()
    rep = solve_lebesgue(pair.tau1, pair.tau2)
    x, p = rep.samples
    inner = x <= 0.19
    print("\ntwo-piece laps on [0, 1/5]")
    print(f"  p ranges over [{p[inner].min():.2f}, {p[inner].max():.2f}] on [0, 0.19]")
    print(f"  verdict: {rep.verdict}; worst point x={rep.witness['x']:.5f}, p={rep.witness['p']:.1f}")


if __name__ == "__main__":
    affine_case()
    infeasible_case()
