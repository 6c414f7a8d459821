import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from holomap import catalog
from holomap.density import cumulative, grid_nodes
from holomap.errors import DomainError, PreconditionError
from holomap.fperron import deterministic_residual
from holomap.piecewise import Branch
from holomap.selector import (conjugate_selector, conjugated_triangle, selector_from_mixture,
                              selector_from_random_pdf)
from holomap.semimarkov import induced_matrix, invariant_step_density

N = 4096


def _boundary():
    e = catalog.example2()
    E = e.extra["edges"]
    return (e, cumulative(invariant_step_density(induced_matrix(e.tau1, E))),
            cumulative(invariant_step_density(induced_matrix(e.tau2, E))))


@pytest.fixture(scope="module")
def boundary():
    return _boundary()


@pytest.mark.parametrize("lam", [0.0, 0.5, 1.0])
def test_mixture_preserves_mixed_density(boundary, lam):
    e, F1, F2 = boundary
    b = selector_from_mixture(e.tau1, e.tau2, F1, F2, lam, N)
    assert deterministic_residual(b.selector, b.density, N)[1] <= 1e-3
    assert b.between
    assert len(b.selector.branches) == 6


@pytest.mark.parametrize("lam,which", [(0.0, "tau2"), (1.0, "tau1")])
def test_mixture_endpoints(boundary, lam, which):
    e, F1, F2 = boundary
    b = selector_from_mixture(e.tau1, e.tau2, F1, F2, lam, N)
    x = grid_nodes(N)[:-1] + 1e-9
    assert np.max(np.abs(b.selector(x) - getattr(e, which)(x))) <= 2 / N


@settings(max_examples=10)
@given(st.floats(0.0, 1.0))
def test_mixture_any_weight(lam):
    e, F1, F2 = _boundary()
    b = selector_from_mixture(e.tau1, e.tau2, F1, F2, lam, 1024)
    assert deterministic_residual(b.selector, b.density, 1024)[1] <= 1e-3


@pytest.mark.parametrize("n", [1024, 4096, 8192])
@pytest.mark.parametrize("lam", [1e-13, 8e-13, 1e-12, 1 - 1e-12])
def test_mixture_near_vertical_segments(boundary, lam, n):
    # weights this close to 0 or 1 leave segments only ulps wide in x
    e, F1, F2 = boundary
    b = selector_from_mixture(e.tau1, e.tau2, F1, F2, lam, n)
    assert deterministic_residual(b.selector, b.density, n)[1] <= 1e-6


def test_mixture_rejects_bad_weight(boundary):
    e, F1, F2 = boundary
    with pytest.raises(DomainError):
        selector_from_mixture(e.tau1, e.tau2, F1, F2, 1.5)


@pytest.mark.filterwarnings("ignore:boundary maps are not expanding")
@pytest.mark.parametrize("name", ["example2", "singular", "example1"])
def test_random_pdf_roundtrip(name):
    e = getattr(catalog, name)()
    b = selector_from_random_pdf(e.tau1, e.tau2, e.p, 1.0, N)
    assert b.between
    assert deterministic_residual(b.selector, 1.0, N)[1] <= 1e-3


def test_random_pdf_keeps_branch_count(ex2):
    b = selector_from_random_pdf(ex2.tau1, ex2.tau2, ex2.p, 1.0, N)
    assert len(b.selector.branches) == len(ex2.tau1.branches)


def test_random_pdf_warns_for_non_expanding(sing):
    with pytest.warns(UserWarning, match="not expanding"):
        b = selector_from_random_pdf(sing.tau1, sing.tau2, sing.p, 1.0, 1024)
    assert b.warnings


def test_random_pdf_needs_invariance(ex2):
    with pytest.raises(PreconditionError):
        selector_from_random_pdf(ex2.tau1, ex2.tau2, 0.5, 1.0, 1024)


def test_random_pdf_tau1_only(ex2):
    # p = 1 with tau1's density gives back tau1
    f = invariant_step_density(induced_matrix(ex2.tau1, ex2.extra["edges"]))
    b = selector_from_random_pdf(ex2.tau1, ex2.tau2, 1.0, f, N)
    x = grid_nodes(N)[:-1] + 1e-9
    assert np.max(np.abs(b.selector(x) - ex2.tau1(x))) <= 2 / N


def test_conjugated_triangle_identity():
    tau = conjugated_triangle(Branch(0.0, 1.0, [0.0, 1.0]))
    x = np.linspace(0, 1, 101)
    assert np.allclose(tau(x), catalog.triangle()(x), atol=1e-12)


def test_conjugate_selector_density():
    h1 = Branch(0.0, 1.0, [0.0, 0.5, 0.5])
    h2 = Branch(0.0, 1.0, [0.0, 1.5, -0.5])
    b = conjugate_selector(h1, h2, 0.4, 2048)
    assert deterministic_residual(b.selector, b.density, 2048)[1] <= 1e-9


def test_conjugate_selector_leaves_envelope():
    h1 = Branch(0.0, 1.0, [0.0, 0.5, 0.5])
    h2 = Branch(0.0, 1.0, [0.0, 1.5, -0.5])
    lam = 0.4
    b = conjugate_selector(h1, h2, lam, 2048)
    assert b.warnings and not b.between

    # oracle: root-find every conjugated map directly
    def conj(h, x):
        y = h(x)
        t = 2 * y if y <= 0.5 else 2 - 2 * y
        return brentq(lambda s: h(s) - t, 0.0, 1.0, xtol=1e-14)

    h = lambda x: lam * h1(x) + (1 - lam) * h2(x)
    xs = np.linspace(0, 1, 2049)
    v1 = np.array([conj(h1, x) for x in xs])
    v2 = np.array([conj(h2, x) for x in xs])
    vs = np.array([conj(h, x) for x in xs])
    worst = min(np.min(vs - np.minimum(v1, v2)), np.min(np.maximum(v1, v2) - vs))
    assert min(b.lower_gap, b.upper_gap) == pytest.approx(worst, abs=2e-3)
    assert worst < -0.2


def test_conjugate_selector_equal_maps():
    h = Branch(0.0, 1.0, [0.0, 0.5, 0.5])
    b = conjugate_selector(h, h, 0.7, 1024)
    assert b.between and not b.warnings


def test_conjugacy_must_be_bijection():
    with pytest.raises(PreconditionError):
        conjugate_selector(Branch(0.0, 1.0, [0.0, 0.5]), Branch(0.0, 1.0, [0.0, 1.0]), 0.5)


def test_selector_csv(ex2, tmp_path):
    b = selector_from_random_pdf(ex2.tau1, ex2.tau2, ex2.p, 1.0, 64)
    b.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "x,tau(x)" and len(lines) == 66
