import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from piezobeam.errors import SolverSingular
from piezobeam.grid import build_grid
from piezobeam.sigma import (
    EllipticSolver,
    SigmaKernel,
    SigmaOperators,
    apply_J,
    apply_P_kernel,
    apply_P_solve,
    green_kernel,
)


def direct_kernel(x, z, a, L, bc):
    """Textbook hyperbolic forms, only safe for moderate aL."""
    lo, hi = min(x, z), max(x, z)
    if bc == "dn":
        return np.cosh(a * (hi - L)) * np.sinh(a * lo) / (a * np.cosh(a * L))
    return np.cosh(a * lo) * np.cosh(a * (L - hi)) / (a * np.sinh(a * L))


@pytest.mark.parametrize("bc", ["dn", "nn"])
def test_kernel_matches_hyperbolic_form(bc):
    a, L = 2.3, 1.7
    for x, z in [(0.1, 0.5), (1.2, 0.3), (0.9, 0.9), (0.0, 1.7)]:
        assert green_kernel(x, z, a, L, bc) == pytest.approx(direct_kernel(x, z, a, L, bc), rel=1e-13, abs=1e-15)


def test_kernel_no_overflow_for_large_parameter():
    k = green_kernel(np.linspace(0, 1, 5), 0.5, 500.0, 1.0, "dn")
    assert np.all(np.isfinite(k))


def test_constant_input_nn():
    g = build_grid(40)
    out = apply_P_solve(np.full(g.N + 1, 3.0), g, 4.0, "nn")
    np.testing.assert_allclose(out, 3.0 / 4.0, rtol=1e-12)


def test_dn_fixes_root_value():
    g = build_grid(40)
    out = apply_P_solve(np.ones(g.N + 1), g, 4.0, "dn")
    assert out[0] == 0.0
    # closed form (1/a²)(1 - cosh(a(x-L))/cosh(aL))
    a = 2.0
    exact = (1 - np.cosh(a * (g.nodes - 1)) / np.cosh(a)) / a**2
    assert g.norm(out - exact) / g.norm(exact) < 1e-3


@pytest.mark.parametrize("bc", ["dn", "nn"])
def test_kernel_and_solve_converge(bc):
    errs = []
    for N in (50, 100, 200):
        g = build_grid(N)
        f = np.sin(2 * np.pi * g.nodes) + g.nodes**2
        errs.append(g.norm(apply_P_kernel(f, g, 4.0, bc) - apply_P_solve(f, g, 4.0, bc)) / g.norm(apply_P_solve(f, g, 4.0, bc)))
    slope = np.polyfit(np.log([50, 100, 200]), np.log(errs), 1)[0]
    assert -slope == pytest.approx(2.0, abs=0.1)


@pytest.mark.parametrize("bc", ["dn", "nn"])
def test_weighted_symmetry_both_routes(bc):
    g = build_grid(30)
    ops = SigmaOperators(g, 9.0, bc)
    W = g.weights
    WP = W[:, None] * ops.P_matrix
    assert np.linalg.norm(WP - WP.T) <= 1e-12 * np.linalg.norm(WP)
    K = SigmaKernel(g, 9.0, bc).matrix
    np.testing.assert_allclose(K, K.T, rtol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=8, max_value=60), st.floats(min_value=0.1, max_value=1e4), st.sampled_from(["dn", "nn"]), st.integers(0, 2**31))
def test_sign_properties(N, sC, bc, seed):
    g = build_grid(N)
    u = np.random.default_rng(seed).standard_normal(N + 1)
    ops = SigmaOperators(g, sC, bc)
    nu = g.inner(u, u)
    assert g.inner(ops.apply_P_solve(u), u) >= -1e-12 * nu
    if bc == "dn":
        u[0] = 0.0  # J is only non-positive on functions in the domain of P
        nu = g.inner(u, u)
    assert g.inner(ops.apply_J(u), u) <= 1e-12 * nu


def test_J_identity_dn():
    errs = []
    for N in (50, 100):
        g = build_grid(N)
        k = np.pi / 2
        w = np.sin(k * g.nodes)
        Jw = apply_J(w, g, 4.0, "dn")
        errs.append(g.norm(Jw - apply_P_solve(-(k**2) * w, g, 4.0, "dn")))
    assert errs[1] < errs[0] / 3.5


def test_invalid_parameters():
    g = build_grid(10)
    with pytest.raises(SolverSingular):
        EllipticSolver(g, 0.0)
    with pytest.raises(ValueError):
        EllipticSolver(g, 1.0, "dd")


def test_linearity():
    g = build_grid(20)
    rng = np.random.default_rng(3)
    f1, f2 = rng.standard_normal((2, g.N + 1))
    ops = SigmaOperators(g, 5.0)
    np.testing.assert_allclose(ops.apply_P_solve(2 * f1 - 3 * f2), 2 * ops.apply_P_solve(f1) - 3 * ops.apply_P_solve(f2), atol=1e-12)
