import numpy as np
import pytest

from piezobeam import controller as ctl
from piezobeam.errors import ValidationError
from piezobeam.grid import build_grid
from piezobeam.model import BeamState, assemble


def state(N, wdot, phi2dot=None):
    z = np.zeros(N + 1)
    return BeamState(z, np.asarray(wdot, float), z, 0.0, 0.0, phi2dot)


def test_config_guards():
    with pytest.raises(ValidationError, match="k1 > 0 required"):
        ctl.ControllerConfig("analytic_feed", k1=0.0)
    with pytest.raises(ValidationError):
        ctl.ControllerConfig("pid")
    assert not ctl.OFF.active


def test_rest_state_gives_zero(coeffs):
    g = build_grid(20)
    sys = assemble(g, coeffs, "constraint", ctl.ControllerConfig("analytic_feed"))
    s = state(g.N, np.zeros(g.N + 1), np.zeros(g.N + 1))
    assert ctl.voltage_analytic(s, sys, sys.control) == 0.0
    assert ctl.voltage_discrete_sec4(s, g, coeffs) == 0.0


def test_reduced_formula_unit_tip_slope(coeffs):
    """Real-time tip slope rate 1, shear rate 0 -> V = -k1 (h2h3B̃B2/C̃ + B3)."""
    g = build_grid(30)
    c = coeffs
    x = g.nodes
    wdot = c.A1 * x  # t* rates; real-time slope rate is exactly 1
    cfg = ctl.ControllerConfig("analytic_feed", k1=2.0, trace_method="phi_substitution")
    sys = assemble(g, c, "viscous", cfg)
    V = ctl.voltage_analytic(state(g.N, wdot, np.zeros(g.N + 1)), sys, cfg)
    assert V == pytest.approx(-2.0 * (c.h2 * c.h3 * c.B_tilde * c.B2 / c.C_tilde + c.B3), rel=1e-12)


def test_sec4_shear_only(coeffs):
    g = build_grid(30)
    phid = np.zeros(g.N + 1)
    phid[-1] = 1.0
    V = ctl.voltage_discrete_sec4(state(g.N, np.zeros(g.N + 1), phid), g, coeffs)
    assert V == pytest.approx(-1.0 / (coeffs.sigma * coeffs.B_tilde * coeffs.C_tilde), rel=1e-14)


def test_sec4_needs_shear_rate(coeffs):
    g = build_grid(10)
    with pytest.raises(ValueError):
        ctl.voltage_discrete_sec4(state(g.N, np.zeros(g.N + 1)), g, coeffs)


def test_trace_methods_agree_in_constraint_mode(coeffs):
    g = build_grid(200)
    rng = np.random.default_rng(4)
    for _ in range(5):
        x = g.nodes
        a = rng.standard_normal(4)
        wdot = x**2 * np.polynomial.legendre.legval(2 * x - 1, a)
        direct = assemble(g, coeffs, "constraint", ctl.ControllerConfig("analytic_feed"))
        subst = assemble(g, coeffs, "constraint", ctl.ControllerConfig("analytic_feed", trace_method="phi_substitution"))
        s = state(g.N, wdot)
        v1 = ctl.voltage_analytic(s, direct, direct.control)
        v2 = ctl.voltage_analytic(s, subst, subst.control)
        assert v2 == pytest.approx(v1, rel=1e-3)


def test_homogeneity_and_off(coeffs):
    g = build_grid(20)
    rng = np.random.default_rng(5)
    wdot = np.concatenate(([0.0], rng.standard_normal(g.N)))
    phid = rng.standard_normal(g.N + 1)
    sys = assemble(g, coeffs, "viscous", ctl.ControllerConfig())
    for cfg in (ctl.ControllerConfig(), ctl.ControllerConfig("analytic_feed")):
        v = ctl.law_output(wdot, phid, sys, cfg)
        assert ctl.law_output(3.5 * wdot, 3.5 * phid, sys, cfg) == pytest.approx(3.5 * v, rel=1e-12)
        assert ctl.law_output(wdot, phid, sys, ctl.OFF) == 0.0
    assert ctl.applied_voltage(1.0, ctl.ControllerConfig(k1=5.0)) == -5.0
    assert ctl.applied_voltage(7.0, ctl.OFF) == 0.0


def test_law_ratio_is_reported(coeffs):
    """The two laws are different designs; their ratio on a test state is finite and not -k1."""
    g = build_grid(60)
    x = g.nodes
    wdot = x**2
    sys = assemble(g, coeffs, "viscous", ctl.ControllerConfig())
    phid = sys.sigma_ops.apply_P_solve(np.zeros(g.N + 1))
    va = ctl.law_output(wdot, phid, sys, ctl.ControllerConfig("analytic_feed", trace_method="phi_substitution"))
    vs = ctl.law_output(wdot, phid, sys, ctl.ControllerConfig())
    ratio = va / vs
    assert np.isfinite(ratio)
    assert ratio != pytest.approx(-1e8, rel=1e-3)


def test_instantaneous_power_is_nonpositive_along_a_run(coeffs):
    """γ/B₄ · V · (ςh₂h₃B̃B₂P + B₃)ẇ_x(L) <= 1e-9 E at every accepted step."""
    from piezobeam.model import bump_initial_state
    from piezobeam.spectral import boundary_trace
    from piezobeam.time_march import IntegratorConfig, Stepper, energy, law_output

    sys = assemble(build_grid(30), coeffs, "constraint", ctl.ControllerConfig("analytic_feed", k1=1e8))
    cfg = IntegratorConfig(dt=1e-3, t_end=0.5)
    advance = Stepper(sys, cfg)
    st = bump_initial_state(sys)
    worst = -np.inf
    for k in range(500):
        power = coeffs.gamma / coeffs.B4 * law_output(st, sys) * boundary_trace(sys, st.wdot, "solve")
        worst = max(worst, power / energy(st, sys))
        st = sys.unpack(advance(sys.pack(st)), st.time + cfg.dt)
    assert worst <= 1e-9
