from fractions import Fraction

import numpy as np
import pytest

from holomap import catalog
from holomap.density import StepDensity
from holomap.errors import PreconditionError, StructureError
from holomap.fperron import RandomMap, invariance_residual
from holomap.piecewise import compose_tau21
from holomap.probsolver import (SeriesSolution, choose_a_hat, closed_form_coefficients,
                                closed_form_quadratic, first_lap_end, infeasibility_probe,
                                lebesgue_kernel, propagate_bounds, solve_general,
                                solve_lebesgue, step_search, terms_for)


def _solution(pair, **kw):
    rep = solve_lebesgue(pair.tau1, pair.tau2, **kw)
    tau21 = compose_tau21(pair.tau1, pair.tau2, rep.params.a)
    return rep, SeriesSolution(tau21, lebesgue_kernel(tau21.inner, tau21, rep.params.a),
                               rep.params)


def test_closed_form_exact():
    assert closed_form_coefficients(Fraction(1, 3), Fraction(1, 2), Fraction(9, 2)) == (
        Fraction(1, 16), Fraction(15, 8))
    assert closed_form_coefficients(0.5, 1.0, 3.0) == (Fraction(1, 4), Fraction(1))
    A, B = closed_form_coefficients(1 / 3, 0.5, 4.5)
    assert (float(A), float(B)) == (0.0625, 1.875)


def test_closed_form_preconditions():
    with pytest.raises(PreconditionError):
        closed_form_coefficients(0.5, 3.0, 1.0)
    with pytest.raises(PreconditionError):
        closed_form_quadratic(1 / 3, 0.5, 4.5, periodic=True)


def test_example4_series(ex4):
    rep = solve_lebesgue(ex4.tau1, ex4.tau2, n_terms=60)
    x = np.linspace(0, 0.45, 4097)
    assert np.max(np.abs(rep.p(x) - (x + 0.25))) <= 1e-6
    assert rep.feasible and rep.verdict == "Feasible"


def test_example1_affine_fit(ex1):
    rep = solve_lebesgue(ex1.tau1, ex1.tau2)
    x = np.linspace(0, 1 / 3, 2049)
    B, A = np.polyfit(x, rep.p(x), 1)
    assert abs(A - 0.0625) <= 1e-6 and abs(B - 1.875) <= 1e-6
    assert np.max(np.abs(A + B * x - rep.p(x))) <= 1e-6


def test_value_at_repelling_end(ex4):
    rep = solve_lebesgue(ex4.tau1, ex4.tau2)
    assert rep.p(0.5) == pytest.approx(0.75, abs=1e-12)


def test_example5_infeasible(ex5):
    rep = solve_lebesgue(ex5.tau1, ex5.tau2)
    assert not rep.feasible
    excess = max(rep.witness["p"] - 1, -rep.witness["p"])
    assert excess >= 0.5
    x, p = rep.samples
    inner = x <= 0.19
    assert p[inner].min() < -0.5 and p[inner].max() > 1.5


def test_a_hat_choice(ex4):
    tau21 = compose_tau21(ex4.tau1, ex4.tau2, 0.5)
    par = choose_a_hat(tau21, 0.5)
    # tau21'(x) <= 0.95 up to a_hat, and a_hat is the last grid point with that
    assert 0.29 < par.a_hat < 0.3 and par.sigma <= 0.95
    assert tau21.deriv(par.a_hat + 1 / 4096) > 0.95
    assert par.sigma ** par.n_terms <= 1e-10
    assert terms_for(0.5) == 34


@pytest.mark.parametrize("name", ["example1", "example4"])
def test_a_hat_independence(name):
    pair = getattr(catalog, name)()
    f = lambda t: 0.8 + 0.4 * t
    base = solve_general(pair.tau1, pair.tau2, f, fp_check=False)
    x = np.linspace(0, base.params.a, 1001)
    for frac in (0.3, 0.6):
        other = solve_general(pair.tau1, pair.tau2, f, a_hat=frac * base.params.a,
                              fp_check=False)
        assert np.max(np.abs(other.p(x) - base.p(x))) <= 1e-8


@pytest.mark.parametrize("name", ["example1", "example4"])
@pytest.mark.parametrize("k", [5, 10, 20])
def test_partial_sum_tail_bound(name, k):
    rep, sol = _solution(getattr(catalog, name)())
    P = rep.params
    x = np.linspace(0, P.a_hat, 20001)
    err = np.trapezoid(np.abs(sol(x) - sol.partial_sum(x, k)), x)
    assert err <= P.a_hat * P.sigma ** (k + 1) * sol.sup_b / (1 - P.sigma)


@pytest.mark.parametrize("name", ["example1", "example4"])
@pytest.mark.parametrize("k", [5, 10])
def test_partial_sums_integrate_to_zero(name, k):
    # each term integrates to int_0^a B = 0, yet int p > 0: no L1 convergence
    rep, sol = _solution(getattr(catalog, name)())
    a = rep.params.a
    x = np.append(np.sort(a - a * 10 ** -np.linspace(0, 12, 60001)), a)
    assert abs(np.trapezoid(sol.partial_sum(x, k), x)) <= 1e-7
    assert np.trapezoid(sol(x), x) > 0.1


@pytest.mark.parametrize("name,terms", [("example4", 5), ("example4", 10), ("example4", 20),
                                        ("example1", 5), ("example1", 10),
                                        ("example5", 5), ("example5", 10)])
def test_residual_within_truncation_bound(name, terms):
    pair = getattr(catalog, name)()
    rep = solve_lebesgue(pair.tau1, pair.tau2, n_terms=terms)
    assert rep.residual <= 10 * rep.truncation_bound


def test_residual_at_default_terms_is_roundoff(ex1, ex4):
    for pair in (ex1, ex4):
        rep = solve_lebesgue(pair.tau1, pair.tau2)
        assert rep.residual <= 10 * rep.truncation_bound + 1e-12


def test_general_with_lebesgue_matches(ex4):
    a = solve_lebesgue(ex4.tau1, ex4.tau2)
    b = solve_general(ex4.tau1, ex4.tau2, 1.0)
    assert np.max(np.abs(a.samples[1] - b.samples[1])) <= 1e-12
    assert b.fp_residual <= 1e-10


def test_general_density_invariant(ex4):
    f = lambda t: 0.5 + t
    rep = solve_general(ex4.tau1, ex4.tau2, f)
    R = RandomMap(ex4.tau1, ex4.tau2, rep.p, check=False)
    assert invariance_residual(R, f, 2048)[1] <= 1e-9
    assert rep.fp_residual <= 1e-9


def test_general_rejects_vanishing_density(ex4):
    with pytest.raises(PreconditionError):
        solve_general(ex4.tau1, ex4.tau2, lambda t: t)


def test_first_lap_end(ex1, ex2):
    from holomap.piecewise import Branch, PiecewiseMap
    assert first_lap_end(ex1.tau1) == pytest.approx(1 / 3)
    assert first_lap_end(ex2.tau1) == pytest.approx(0.2)
    with pytest.raises(StructureError):
        first_lap_end(PiecewiseMap([Branch.affine(0.0, 1.0, -1.0, 1.0)]))


def test_example3_forced_value(ex3):
    rep = infeasibility_probe(ex3.tau1, ex3.tau2, ex3.extra["selector"], ex3.extra["f"])
    assert rep.verdict == "Infeasible"
    assert rep.forced_value == pytest.approx(2.0, abs=1e-9)
    lo, hi = rep.witness["x"]
    assert lo <= 0.9 <= hi


def test_example3_step_search(ex3):
    for edges in (np.array([0, 0.1, 0.2]), np.linspace(0, 0.2, 41)):
        assert step_search(ex3.tau1, ex3.tau2, ex3.extra["f"], edges).residual_linf > 1e-6


def test_example2_feasible(ex2):
    rep = infeasibility_probe(ex2.tau1, ex2.tau2, ex2.extra["selector"], 1.0)
    assert rep.feasible
    assert rep.p(np.array([0.05, 0.15])) == pytest.approx([0.2, 0.8], abs=1e-9)
    assert rep.fp_residual <= 1e-10
    s = step_search(ex2.tau1, ex2.tau2, 1.0, np.array([0, 0.1, 0.2]))
    assert s.values == pytest.approx([0.2, 0.8], abs=1e-9)


def test_tau1_density_gives_p_one(ex2):
    from holomap.semimarkov import induced_matrix, left_invariant
    M = induced_matrix(ex2.tau1, ex2.extra["edges"])
    f = StepDensity(M.edges, left_invariant(M))
    rep = infeasibility_probe(ex2.tau1, ex2.tau2, None, f)
    assert rep.feasible
    assert np.allclose(rep.p(np.array([0.05, 0.15])), 1.0)


def test_propagate_bounds_detects_conflict():
    A = np.array([[1.0, 1.0], [1.0, -1.0]])
    lo, hi, conflict = propagate_bounds(A, np.array([1.2, -0.2]))
    assert conflict is None
    assert np.all(lo <= [0.5, 0.7]) and np.all(hi >= [0.5, 0.7])
    # x + y = 1.8, x - y = -0.8 forces y = 1.3
    _, _, conflict = propagate_bounds(A, np.array([1.8, -0.8]))
    assert conflict is not None and conflict["value"] > 1


def test_report_roundtrip(tmp_path, ex4):
    import json
    rep = solve_lebesgue(ex4.tau1, ex4.tau2)
    rep.to_json(tmp_path / "r.json")
    rep.p_to_csv(tmp_path / "p.csv", n=16)
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["feasible"] and data["params"]["a"] == 0.5
    rows = np.loadtxt(tmp_path / "p.csv", delimiter=",", comments="#")
    assert rows.shape == (17, 2)
