import numpy as np
import pytest

from piezobeam import controller as ctl
from piezobeam.errors import EigensolverFailure
from piezobeam.grid import build_grid, curvature_matrix
from piezobeam.model import assemble
from piezobeam.spectral import (
    assemble_generator,
    dissipativity_check,
    gram_matrix,
    spectral_abscissa,
    spectrum,
)


def test_abscissa_of_diagonal():
    assert spectral_abscissa(np.diag([-1.0, -2.0])) == -1.0


def test_spectrum_sorted_and_conjugate_closed(coeffs):
    ev = spectrum(assemble_generator(assemble(build_grid(20), coeffs, "viscous", ctl.ControllerConfig())))
    assert np.all(np.diff(ev.real) <= 0)
    np.testing.assert_allclose(np.sort_complex(ev), np.sort_complex(ev.conj()), rtol=1e-8, atol=1e-8)


def test_eigensolver_failure():
    with pytest.raises(EigensolverFailure):
        spectrum(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_gain_zero_is_open_loop(coeffs):
    sys = assemble(build_grid(20), coeffs, "constraint", ctl.ControllerConfig("analytic_feed"))
    gen = assemble_generator(sys, ctl.OFF)
    np.testing.assert_array_equal(gen.matrix, assemble(build_grid(20), coeffs, "constraint").generator())
    assert not gen.closed_loop


def test_uncoupled_limit_is_classical_beam(coeffs):
    c = coeffs
    weak = type(c)(**{**c.as_dict(), "B_tilde": 1e-30})
    g = build_grid(20)
    sys = assemble(g, weak, "constraint", kappa=0.0)
    D = curvature_matrix(g.N, g.dx)
    K = weak.A_tilde * D.T @ (g.weights[:-1, None] * D)
    np.testing.assert_allclose(sys.K, K, rtol=1e-12, atol=1e-12 * np.abs(K).max())


def test_gram_positive_definite_constraint(coeffs):
    Q = gram_matrix(assemble(build_grid(16), coeffs, "constraint", ctl.ControllerConfig("analytic_feed")))
    assert np.linalg.norm(Q - Q.T) <= 1e-12 * np.linalg.norm(Q)
    assert np.linalg.eigvalsh(Q).min() > 0


def test_gram_semidefinite_viscous(coeffs):
    """The energy does not see the shear unknowns directly, so Q is only semi-definite."""
    Q = gram_matrix(assemble(build_grid(16), coeffs, "viscous", ctl.OFF))
    assert np.linalg.norm(Q - Q.T) <= 1e-12 * np.linalg.norm(Q)
    ev = np.linalg.eigvalsh(Q)
    assert ev.min() >= -1e-12 * ev.max()
    n = 15
    wv = Q[: 2 * n, : 2 * n]
    assert np.linalg.eigvalsh(wv).min() > 0


def test_open_loop_conservative_checks(coeffs):
    gen = assemble_generator(assemble(build_grid(30), coeffs, "constraint", kappa=0.0))
    ev = spectrum(gen)
    assert np.abs(ev.real).max() <= 1e-8 * np.abs(ev).max()
    assert np.abs(ev).min() > 0
    rep = dissipativity_check(gen, 10)
    assert np.abs(rep.quotients).max() <= 1e-9
    np.testing.assert_array_equal(rep.boundary_terms, 0.0)


def test_closed_loop_trace_free_samples(coeffs):
    gen = assemble_generator(assemble(build_grid(30), coeffs, "constraint", ctl.ControllerConfig("analytic_feed"), kappa=0.0))
    rep = dissipativity_check(gen, 10, trace_free=True)
    assert np.abs(rep.quotients).max() <= 1e-9
    rep = dissipativity_check(gen, 10)
    assert rep.max_quotient < 0


def test_viscosity_adds_dissipation(coeffs):
    g = build_grid(30)
    a = spectral_abscissa(assemble_generator(assemble(g, coeffs, "constraint", kappa=0.0)))
    b = spectral_abscissa(assemble_generator(assemble(g, coeffs, "constraint")))
    assert abs(a) < 1e-8 and b < 0
