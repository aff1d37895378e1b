"""Boundary voltage laws.

All laws are linear in the velocity fields.  ``voltage_*`` return the law
output V; :func:`applied_voltage` turns it into the load that enters the
boundary rows of the discretization.  Rates are with respect to the
nondimensional time t*; the B*-feedback works in real time and divides by
A1 internally.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

LAWS = ("analytic_feed", "discrete_sec4", "off")
TRACE_METHODS = ("p_sigma_direct", "phi_substitution")


@dataclass(frozen=True)
class ControllerConfig:
    law: str = "discrete_sec4"
    k1: float = 1.0e8
    trace_method: str = "p_sigma_direct"
    # The tabulated four-law output is a measurement; the applied voltage is
    # feedback_sign * k1 * V.  -1 makes the boundary work non-positive.
    feedback_sign: float = -1.0

    def __post_init__(self):
        if self.law not in LAWS:
            raise ValidationError(f"unknown controller law {self.law!r}")
        if self.trace_method not in TRACE_METHODS:
            raise ValidationError(f"unknown trace method {self.trace_method!r}")
        if self.law != "off" and not self.k1 > 0:
            raise ValidationError("k1 > 0 required")

    @property
    def active(self) -> bool:
        return self.law != "off"


OFF = ControllerConfig(law="off", k1=0.0)


def tip_slope(values, dx: float) -> float:
    """Backward three-point slope (3z_N - 4z_{N-1} + z_{N-2}) / (2dx)."""
    z = np.asarray(values)
    return (3 * z[-1] - 4 * z[-2] + z[-3]) / (2 * dx)


def sec4_from_rates(wdot, phi2dot, dx: float, coeffs) -> float:
    sC = coeffs.sigma_C
    Bt = coeffs.B_tilde
    return (sC + Bt) / sC * tip_slope(wdot, dx) - phi2dot[-1] / (coeffs.sigma * Bt * coeffs.C_tilde)


def analytic_from_rates(wdot, phi2dot, dx, coeffs, k1, trace_method, sigma_ops=None) -> float:
    """B*-feedback from t*-rates on nodes 0..N."""
    from .grid import slope

    c = coeffs
    A1 = c.A1
    if trace_method == "p_sigma_direct":
        s = slope(wdot, dx)
        Ps_tip = sigma_ops.apply_P_solve(s)[-1]
        trace = c.sigma * c.h2 * c.h3 * c.B_tilde * c.B2 * Ps_tip + c.B3 * s[-1]
    else:
        ws = tip_slope(wdot, dx)
        trace = (c.h2 * c.h3 * c.B_tilde * c.B2 / c.C_tilde + c.B3) * ws - (
            c.h2 * c.h3 * c.B2 / c.C_tilde
        ) * phi2dot[-1]
    return -k1 * trace / A1


def voltage_analytic(state, sys, cfg: ControllerConfig) -> float:
    """V = -k1 [ςh₂h₃B̃B₂ (P ẇ_x)(L) + B₃ ẇ_x(L)] with real-time velocities.

    With ``trace_method="phi_substitution"`` the smoothed trace is replaced
    by (B̃ẇ_x - φ̇²)(L) / (ςB̃C̃), which needs ``state.phi2dot``.
    """
    if cfg.law == "off":
        return 0.0
    phi2dot = state.phi2dot
    if cfg.trace_method == "phi_substitution" and phi2dot is None:
        if sys.mode != "constraint":
            raise ValueError("phi_substitution needs the shear rate phi2dot")
        phi2dot = sys.solve_phi_constraint(state.wdot, 0.0)
    return analytic_from_rates(
        state.wdot, phi2dot, sys.grid.dx, sys.coeffs, cfg.k1, cfg.trace_method, sys.sigma_ops
    )


def voltage_discrete_sec4(state, grid, coeffs, cfg: ControllerConfig = None) -> float:
    """((ςC̃ + B̃)/(ςC̃)) (3ẇ_N - 4ẇ_{N-1} + ẇ_{N-2})/(2dx) - φ̇²_N/(ςB̃C̃).

    The gain is not applied here; see :func:`applied_voltage`.
    """
    if cfg is not None and cfg.law == "off":
        return 0.0
    if state.phi2dot is None:
        raise ValueError("the discrete law needs the shear rate phi2dot")
    return sec4_from_rates(state.wdot, state.phi2dot, grid.dx, coeffs)


def applied_voltage(V: float, cfg: ControllerConfig) -> float:
    if cfg.law == "discrete_sec4":
        return cfg.feedback_sign * cfg.k1 * V
    if cfg.law == "analytic_feed":
        return V
    return 0.0


def law_output(wdot, phi2dot, sys, cfg: ControllerConfig) -> float:
    """Law output V from rate fields on nodes 0..N."""
    if cfg.law == "discrete_sec4":
        return sec4_from_rates(wdot, phi2dot, sys.grid.dx, sys.coeffs)
    if cfg.law == "analytic_feed":
        return analytic_from_rates(
            wdot, phi2dot, sys.grid.dx, sys.coeffs, cfg.k1, cfg.trace_method, sys.sigma_ops
        )
    return 0.0


def applied_from_rates(wdot, phi2dot, sys, cfg: ControllerConfig) -> float:
    return applied_voltage(law_output(wdot, phi2dot, sys, cfg), cfg)
