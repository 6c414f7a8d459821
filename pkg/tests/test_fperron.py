import numpy as np
import pytest
from hypothesis import given, strategies as st

from holomap import catalog
from holomap.density import grid_midpoints
from holomap.errors import StructureError
from holomap.fperron import (RandomMap, deterministic_residual, fp_deterministic_at,
                             fp_random_at, invariance_residual, iterate_density, pelikan_check)
from holomap.probability import PiecewiseAffineProbability


def test_tent_preserves_lebesgue():
    tau = catalog.triangle()
    x = grid_midpoints(1000)
    assert np.allclose(fp_deterministic_at(tau, 1.0, x), 1.0, atol=1e-14)


def test_tent_on_linear_density():
    # P(2x) = (x/2) + (1 - x/2) = 1 for the tent map
    tau = catalog.triangle()
    x = grid_midpoints(64)
    assert np.allclose(fp_deterministic_at(tau, lambda t: 2 * t, x), 1.0, atol=1e-13)


def test_example2_preserves_lebesgue(ex2):
    R = RandomMap(ex2.tau1, ex2.tau2, ex2.p)
    assert invariance_residual(R, 1.0, 4096)[1] <= 1e-12


def test_example4_preserves_lebesgue(ex4):
    R = RandomMap(ex4.tau1, ex4.tau2, ex4.p)
    assert invariance_residual(R, 1.0, 4096)[1] <= 1e-10


def test_example3_selector_density(ex3):
    assert deterministic_residual(ex3.extra["selector"], ex3.extra["f"], 2048)[1] <= 1e-12


def test_arbitrary_region_irrelevant(ex2):
    x = grid_midpoints(500)
    base = fp_random_at(RandomMap(ex2.tau1, ex2.tau2, ex2.p), 1.0, x)
    for v in (0.0, 0.37):
        q = ex2.p.with_arbitrary(v)
        assert np.allclose(fp_random_at(RandomMap(ex2.tau1, ex2.tau2, q), 1.0, x), base,
                           atol=1e-14)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(-3, 3))
def test_linearity(c1, s, k):
    pair = catalog.example4()
    R = RandomMap(pair.tau1, pair.tau2, pair.p)
    x = grid_midpoints(128)
    f = lambda t: 1.0 + t
    g = lambda t: np.cos(t)
    lhs = fp_random_at(R, lambda t: c1 * f(t) + k * g(t), x)
    rhs = c1 * fp_random_at(R, f, x) + k * fp_random_at(R, g, x)
    assert np.allclose(lhs, rhs, atol=1e-11)


def test_positivity_and_mass(ex1, rng):
    R = RandomMap(ex1.tau1, ex1.tau2, ex1.p)
    c = rng.uniform(0, 1, 4)
    f = lambda t: c[0] + c[1] * t + c[2] * np.sin(5 * t) ** 2 + c[3]
    n = 20000
    x = grid_midpoints(n)
    Pf = fp_random_at(R, f, x)
    assert np.all(Pf >= 0)
    assert Pf.mean() == pytest.approx(f(x).mean(), rel=2e-3)


def test_random_map_rejects_bad_probability(ex2):
    bad = PiecewiseAffineProbability([0.0, 1.0], [-0.2], [1.0])
    with pytest.raises(StructureError):
        RandomMap(ex2.tau1, ex2.tau2, bad)
    RandomMap(ex2.tau1, ex2.tau2, bad, check=False)


def test_apply_selects_branch(ex2):
    R = RandomMap(ex2.tau1, ex2.tau2, ex2.p)
    x = np.array([0.05, 0.05, 0.15, 0.15])
    u = np.array([0.1, 0.5, 0.5, 0.9])
    assert np.allclose(R.apply(x, u), [0.1, 0.4, 0.6, 0.9])


def test_pelikan_example2(ex2):
    # p/2 + (1-p)/8 = 0.2 on both free cells, 1/5 on the tail
    rep = pelikan_check(RandomMap(ex2.tau1, ex2.tau2, ex2.p))
    assert rep.passed
    assert rep.sup_sum == pytest.approx(0.2, abs=1e-12)
    assert rep.min_slope == pytest.approx(2.0) and not rep.slopes_above_two


def test_pelikan_example4_balanced(ex4):
    # (x + 1/4)/(1 + 4x) + (3/4 - x)/(3 - 4x) = 1/2 on the whole lap
    rep = pelikan_check(RandomMap(ex4.tau1, ex4.tau2, ex4.p))
    assert rep.passed and rep.sup_sum == pytest.approx(0.5, abs=1e-12)
    assert not rep.slopes_above_two


def test_pelikan_fails_at_neutral_point(ex4):
    # tau1'(0) = 1, so the sum approaches 1 at the neutral fixed point
    rep = pelikan_check(RandomMap(ex4.tau1, ex4.tau2, 1.0))
    assert rep.sup_sum > 0.999
    rep = pelikan_check(RandomMap(ex4.tau1, ex4.tau2, 1.0), alpha=0.99)
    assert not rep.passed and rep.notes


def test_iterate_density_fixed_point(ex2):
    g = iterate_density(RandomMap(ex2.tau1, ex2.tau2, ex2.p), 1.0, 3, 512)
    assert np.allclose(g.values[1:-1], 1.0, atol=1e-12)
