"""The twelve acceptance criteria, one test each, with a PASS/FAIL line per criterion."""

import time
import warnings
from fractions import Fraction

import numpy as np
import pytest

from holomap import catalog
from holomap.bangbang import ObjectiveFn, enumerate_bangbang, hull_membership, optimize
from holomap.bangbang import refine_and_converge
from holomap.density import cumulative, grid_midpoints, grid_nodes
from holomap.fperron import RandomMap, deterministic_residual, fp_random_at
from holomap.montecarlo import SimConfig, bin_deviation, ks_distance, mass_near, simulate
from holomap.piecewise import compose_tau21
from holomap.probsolver import (SeriesSolution, closed_form_coefficients, closed_form_quadratic,
                                infeasibility_probe, lebesgue_kernel, solve_general,
                                solve_lebesgue, step_search)
from holomap.selector import selector_from_mixture, selector_from_random_pdf
from holomap.semimarkov import combine, induced_matrix, invariant_step_density, left_invariant

N_SEL = 4096


def test_01_example4_closed_form(ex4, criterion):
    t0 = time.perf_counter()
    rep = solve_lebesgue(ex4.tau1, ex4.tau2, grid=4096, n_terms=60)
    x = np.linspace(0, 0.45, 4097)
    err = float(np.max(np.abs(rep.p(x) - (x + 0.25))))
    elapsed = time.perf_counter() - t0
    ok = criterion(1, "max|p - (x + 1/4)| on [0, 0.45]; runtime s", (err, round(elapsed, 3)),
                   (1e-6, 5.0), err <= 1e-6 and elapsed < 5.0)
    assert ok


def test_02_example1_coefficients(ex1, criterion):
    rep = solve_lebesgue(ex1.tau1, ex1.tau2)
    x = np.linspace(0, 1 / 3, 4097)
    X = np.column_stack([np.ones_like(x), x])
    (A, B), *_ = np.linalg.lstsq(X, rep.p(x), rcond=None)
    fit_res = float(np.max(np.abs(X @ [A, B] - rep.p(x))))
    coef_err = float(max(abs(A - 0.0625), abs(B - 1.875)))
    exact = closed_form_coefficients(Fraction(1, 3), Fraction(1, 2), Fraction(9, 2))
    cf = closed_form_quadratic(1 / 3, 0.5, 4.5)
    ok = criterion(2, "affine fit residual; coefficient error; closed form exact",
                   (fit_res, coef_err, exact == (Fraction(1, 16), Fraction(15, 8))), 1e-6,
                   fit_res <= 1e-6 and coef_err <= 1e-6
                   and exact == (Fraction(1, 16), Fraction(15, 8))
                   and cf.intercepts[0] == 0.0625 and cf.slopes[0] == 1.875)
    assert ok


def test_03_example2_matrix(ex2, criterion):
    E = ex2.extra["edges"]
    M = combine(induced_matrix(ex2.tau1, E), induced_matrix(ex2.tau2, E), ex2.extra["p_cells"])
    merr = float(np.max(np.abs(M.matrix - ex2.extra["printed_matrix"])))
    verr = float(np.max(np.abs(left_invariant(M) - 1.0)))
    ok = criterion(3, "matrix entry error; invariant vector error", (merr, verr),
                   (1e-12, 1e-10), merr <= 1e-12 and verr <= 1e-10)
    assert ok


def test_04_example3_infeasible(ex3, criterion):
    rep = infeasibility_probe(ex3.tau1, ex3.tau2, ex3.extra["selector"], ex3.extra["f"])
    # the free cells of the 6-cell partition are [0, 0.1] and [0.1, 0.2]
    search = step_search(ex3.tau1, ex3.tau2, ex3.extra["f"], np.array([0.0, 0.1, 0.2]))
    forced = rep.forced_value
    ok = criterion(4, "verdict; forced p; best 6-cell step residual",
                   (rep.verdict, forced, search.residual_linf), (">= 1.5", "> 1e-6"),
                   rep.verdict == "Infeasible" and forced is not None
                   and forced >= 1.5 and search.residual_linf > 1e-6)
    assert ok


def test_05_example5_infeasible(ex5, criterion):
    rep = solve_lebesgue(ex5.tau1, ex5.tau2)
    p = rep.witness["p"] if rep.witness else 0.0
    excursion = max(p - 1.0, -p)
    ok = criterion(5, "feasible; witness excursion outside [0, 1]", (rep.feasible, excursion),
                   0.5, (not rep.feasible) and excursion >= 0.5)
    assert ok


def test_06_singular_sum(sing, criterion):
    R = RandomMap(sing.tau1, sing.tau2, sing.p)
    x = grid_midpoints(10_000)
    err = float(np.max(np.abs(fp_random_at(R, 1.0, x) - 1.0)))
    cfg = SimConfig(seed=0, n_steps=100_000, burn_in=1000, bins=100)
    h = simulate(RandomMap(sing.tau1, sing.tau1, 1.0), 0.4, cfg)
    mass = mass_near(h, 0.0, 0.01)
    ok = criterion(6, "||P_R 1 - 1||_inf; tau1 mass in [0, 0.01]", (err, mass), (1e-8, 0.99),
                   err <= 1e-8 and mass >= 0.99)
    assert ok


def _boundary_cdfs(pair):
    E = pair.extra["edges"]
    return (cumulative(invariant_step_density(induced_matrix(pair.tau1, E))),
            cumulative(invariant_step_density(induced_matrix(pair.tau2, E))))


def test_07_mixture_selector(ex2, criterion):
    F1, F2 = _boundary_cdfs(ex2)
    x = grid_nodes(N_SEL)[:-1] + 1e-9
    residuals, ends = [], []
    for lam in (0.0, 0.5, 1.0):
        b = selector_from_mixture(ex2.tau1, ex2.tau2, F1, F2, lam, N_SEL)
        residuals.append(deterministic_residual(b.selector, b.density, N_SEL)[1])
        if lam in (0.0, 1.0):
            ref = ex2.tau2 if lam == 0.0 else ex2.tau1
            ends.append(float(np.max(np.abs(b.selector(x) - ref(x)))))
    ok = criterion(7, "max fp residual; max endpoint deviation", (max(residuals), max(ends)),
                   (1e-3, 2 / N_SEL), max(residuals) <= 1e-3 and max(ends) <= 2 / N_SEL)
    assert ok


def test_08_random_pdf_roundtrip(criterion):
    worst_res, worst_gap = 0.0, np.inf
    for name in ("example2", "singular", "example1"):
        pair = getattr(catalog, name)()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            b = selector_from_random_pdf(pair.tau1, pair.tau2, pair.p, 1.0, N_SEL)
        worst_res = max(worst_res, deterministic_residual(b.selector, 1.0, N_SEL)[1])
        worst_gap = min(worst_gap, b.lower_gap, b.upper_gap)
    ok = criterion(8, "max fp residual; min between-bounds gap", (worst_res, worst_gap),
                   (1e-3, -2 / N_SEL), worst_res <= 1e-3 and worst_gap >= -2 / N_SEL)
    assert ok


@pytest.mark.parametrize("name", ["example2", "singular", "example1"])
def test_09_monte_carlo(name, criterion):
    pair = getattr(catalog, name)()
    t0 = time.perf_counter()
    h = simulate(RandomMap(pair.tau1, pair.tau2, pair.p), 0.3, SimConfig(seed=0))
    elapsed = time.perf_counter() - t0
    ks, dev = ks_distance(h, 1.0), bin_deviation(h, 1.0)
    ok = criterion(9, f"{name}: KS; sup-bin deviation; runtime s",
                   (ks, dev, round(elapsed, 2)), (0.005, 0.02, 10.0),
                   ks <= 0.005 and dev <= 0.02 and elapsed < 10.0)
    assert ok


def test_10_bangbang_desk_scale(ex2, rng, criterion):
    t0 = time.perf_counter()
    E = ex2.extra["edges"]
    M1, M2 = induced_matrix(ex2.tau1, E), induced_matrix(ex2.tau2, E)
    count = len(enumerate_bangbang(M1, M2, dedup=False))
    verts = enumerate_bangbang(M1, M2)
    g = ObjectiveFn(lambda x: x)
    best = optimize(g, M1, M2).best_value
    worst_hull, top_sample = 0.0, -np.inf
    for _ in range(100):
        v = left_invariant(combine(M1, M2, rng.uniform(0, 1, 6)))
        worst_hull = max(worst_hull, hull_membership(v, verts, M1.widths).residual)
        top_sample = max(top_sample, g.value(v, E))
    elapsed = time.perf_counter() - t0
    ok = criterion(10, "densities; max hull residual; best - top sample; runtime s",
                   (count, worst_hull, best - top_sample, round(elapsed, 2)),
                   (64, 1e-8, -1e-9, 30.0),
                   count == 64 and worst_hull <= 1e-8 and best >= top_sample - 1e-9
                   and elapsed < 30.0)
    assert ok


def test_11_solver_invariants(ex1, ex4, criterion):
    f = lambda t: 0.8 + 0.4 * t
    tail_ok, indep, fe_ratio = True, 0.0, 0.0
    for pair in (ex1, ex4):
        rep = solve_lebesgue(pair.tau1, pair.tau2)
        P = rep.params
        tau21 = compose_tau21(pair.tau1, pair.tau2, P.a)
        sol = SeriesSolution(tau21, lebesgue_kernel(tau21.inner, tau21, P.a), P)
        x = np.linspace(0, P.a_hat, 20001)
        for k in (5, 10, 20):
            err = np.trapezoid(np.abs(sol(x) - sol.partial_sum(x, k)), x)
            tail_ok &= bool(err <= P.a_hat * P.sigma ** (k + 1) * sol.sup_b / (1 - P.sigma))
        base = solve_general(pair.tau1, pair.tau2, f, fp_check=False)
        xs = np.linspace(0, P.a, 1001)
        for frac in (0.3, 0.6):
            other = solve_general(pair.tau1, pair.tau2, f, a_hat=frac * P.a, fp_check=False)
            indep = max(indep, float(np.max(np.abs(other.p(xs) - base.p(xs)))))
        for terms in (5, 10):
            r = solve_lebesgue(pair.tau1, pair.tau2, n_terms=terms)
            fe_ratio = max(fe_ratio, r.residual / r.truncation_bound)
    ok = criterion(11, "tail bounds honored; a_hat spread; FE residual / bound",
                   (tail_ok, indep, fe_ratio), (True, 1e-8, 10.0),
                   tail_ok and indep <= 1e-8 and fe_ratio <= 10.0)
    assert ok


def test_12_refinement_convergence(sing, criterion):
    rows, _ = refine_and_converge(sing.tau1, sing.tau2, lambda x: x, [64, 128, 256, 512],
                                  p=sing.p)
    l1 = [r.density_l1 for r in rows[1:]]
    decreasing = all(b < a for a, b in zip(l1, l1[1:]))
    ratios = [r.ratio for r in rows if np.isfinite(r.ratio)]
    if not all(q >= 1.5 for q in ratios):
        warnings.warn(f"value ratios per doubling below 1.5: {ratios}")
    ok = criterion(12, "successive L1 distances; value ratios (soft)",
                   ([round(v, 6) for v in l1], ratios), "decreasing; ratio >= 1.5 soft",
                   decreasing)
    assert ok
