import numpy as np
import pytest

from piezobeam import controller as ctl
from piezobeam.errors import NonPositiveEnergy, StabilityViolation, ValidationError, WindowTooShort
from piezobeam.grid import build_grid
from piezobeam.model import BeamState, assemble, bump_initial_state
from piezobeam.spectral import gram_matrix
from piezobeam.time_march import IntegratorConfig, SimulationTrace, energy, fit_decay_rate, run, step


def test_integrator_guards():
    with pytest.raises(ValidationError):
        IntegratorConfig(dt=0.0)
    with pytest.raises(ValidationError):
        IntegratorConfig(scheme="euler")
    assert IntegratorConfig().horizon(0.8) == pytest.approx(6.25)


def test_energy_of_zero_state(coeffs):
    sys = assemble(build_grid(20), coeffs, "constraint")
    z = np.zeros(21)
    assert energy(BeamState(z, z, z), sys) == 0.0


def test_energy_kinetic_only(coeffs):
    """Real-time velocity 1 everywhere, w = 0 -> E = mL/2 (boundary ignored)."""
    g = build_grid(50)
    sys = assemble(g, coeffs, "constraint")
    z = np.zeros(g.N + 1)
    wdot = np.full(g.N + 1, coeffs.A1)  # t* rate of a unit real-time velocity
    assert energy(BeamState(z, wdot, z), sys) == pytest.approx(coeffs.m * coeffs.L / 2, rel=1e-12)


def test_energy_refinement(coeffs):
    vals = []
    for N in (50, 100, 200):
        g = build_grid(N)
        sys = assemble(g, coeffs, "constraint")
        x = g.nodes
        # w_xx(L) = 0, as the free end requires
        w = 6 * x**2 - 4 * x**3 + x**4
        st = sys.state_from_fields(w, x**2 * np.cos(2 * x))
        vals.append(energy(st, sys))
    d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
    assert d2 < d1 / 3  # O(dx²) self-convergence
    assert d2 / vals[2] < 1e-3


@pytest.mark.parametrize("mode, cfg", [("constraint", ctl.ControllerConfig("analytic_feed")), ("viscous", ctl.ControllerConfig())])
def test_energy_equals_gram_form(coeffs, mode, cfg):
    sys = assemble(build_grid(24), coeffs, mode, cfg)
    z = np.random.default_rng(0).standard_normal(sys.size)
    Q = gram_matrix(sys)
    assert energy(sys.unpack(z), sys) == pytest.approx(0.5 * z @ Q @ z, rel=1e-9)


def test_zero_state_stays_zero(coeffs):
    sys = assemble(build_grid(20), coeffs, "viscous", ctl.ControllerConfig())
    z = np.zeros(21)
    out = step(BeamState(z, z, z), sys, integrator=IntegratorConfig())
    assert np.all(out.w == 0) and np.all(out.wdot == 0) and np.all(out.phi2 == 0)


def test_conservative_run_and_fit(coeffs):
    sys = assemble(build_grid(30), coeffs, "constraint", kappa=0.0)
    trace = run(bump_initial_state(sys), sys, integrator=IntegratorConfig(t_end=2.0))
    E = np.asarray(trace.energies)
    assert np.max(np.abs(E - E[0])) / E[0] < 1e-9
    assert fit_decay_rate(trace, (0.5, 2.0)).omega == pytest.approx(0.0, abs=1e-4)


def test_stability_violation_is_raised(coeffs):
    sys = assemble(build_grid(16), coeffs, "constraint", kappa=0.0)
    G = sys.generator()
    sys._generator = G + 0.5 * np.eye(G.shape[0])  # inject growth
    with pytest.raises(StabilityViolation):
        run(bump_initial_state(sys), sys, integrator=IntegratorConfig(t_end=0.1))


def test_rk4_agrees_with_midpoint(coeffs):
    sys = assemble(build_grid(12), coeffs, "constraint", ctl.ControllerConfig("analytic_feed", k1=1e6))
    st = bump_initial_state(sys)
    a = run(st, sys, integrator=IntegratorConfig("rk4", dt=1e-4, t_end=0.05))
    b = run(st, sys, integrator=IntegratorConfig("implicit_midpoint", dt=1e-4, t_end=0.05))
    assert a.energies[-1] == pytest.approx(b.energies[-1], rel=1e-5)
    with pytest.raises(ValidationError):
        run(st, sys, integrator=IntegratorConfig("rk4", dt=1e-2, t_end=0.05))


def test_fit_exact_exponential():
    t = np.linspace(0, 5, 501)
    fit = fit_decay_rate((t, 3.0 * np.exp(-2 * t)), (0.0, 5.0))
    assert fit.omega == pytest.approx(1.0, abs=1e-6)
    omega, M = fit
    assert M == pytest.approx(3.0, rel=1e-9)


def test_fit_errors():
    t = np.linspace(0, 1, 11)
    with pytest.raises(WindowTooShort):
        fit_decay_rate((t, np.exp(-t)), (0.95, 1.0))
    with pytest.raises(WindowTooShort):
        fit_decay_rate((t, np.exp(-t)), (1.0, 0.5))
    E = np.exp(-t)
    E[5] = 0.0
    with pytest.raises(NonPositiveEnergy):
        fit_decay_rate((t, E), (0.0, 1.0))


def test_trace_determinism_and_snapshots(coeffs):
    sys = assemble(build_grid(16), coeffs, "viscous", ctl.ControllerConfig())
    cfg = IntegratorConfig(t_end=0.05, snapshot_stride=10)
    a = run(bump_initial_state(sys), sys, integrator=cfg)
    b = run(bump_initial_state(sys), sys, integrator=cfg)
    for k in ("t_star", "E", "V", "w_tip", "phi2_tip"):
        np.testing.assert_array_equal(a.arrays()[k], b.arrays()[k])
    assert [k for k, _ in a.snapshots] == [0, 10, 20, 30, 40, 50]
    assert np.all(np.diff(a.times) > 0)


def test_trace_rejects_time_reversal():
    tr = SimulationTrace(A1=1.0)
    z = np.zeros(3)
    tr.append(BeamState(z, z, z, 1.0), 1.0, 0.0)
    with pytest.raises(ValueError):
        tr.append(BeamState(z, z, z, 1.0), 1.0, 0.0)
