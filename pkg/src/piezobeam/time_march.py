"""Time stepping, the discrete energy and decay-rate fits."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import controller as ctl
from .errors import NonConvergence, NonPositiveEnergy, StabilityViolation, ValidationError, WindowTooShort
from .grid import curvature, slope
from .model import BeamState, SemiDiscreteSystem, assemble

log = logging.getLogger(__name__)

SCHEMES = ("implicit_midpoint", "rk4")
RK4_REAL_AXIS = 2.78  # RK4 stability interval on the negative real axis
CONSERVATION_TOL = 1e-6


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "implicit_midpoint"
    dt: float = 1e-3
    t_end: Optional[float] = None  # None -> 5 s real time, i.e. 5 / A1
    snapshot_stride: int = 0  # 0 disables snapshots

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if not self.dt > 0:
            raise ValidationError("dt > 0 required")
        if self.t_end is not None and not self.t_end > 0:
            raise ValidationError("t_end > 0 required")
        if self.snapshot_stride < 0:
            raise ValidationError("snapshot_stride >= 0 required")

    def horizon(self, A1: float) -> float:
        return 5.0 / A1 if self.t_end is None else self.t_end


@dataclass
class SimulationTrace:
    A1: float
    times: List[float] = field(default_factory=list)
    energies: List[float] = field(default_factory=list)
    voltages: List[float] = field(default_factory=list)
    w_tip: List[float] = field(default_factory=list)
    phi2_tip: List[float] = field(default_factory=list)
    snapshots: List[Tuple[int, BeamState]] = field(default_factory=list)

    def append(self, state: BeamState, E: float, V: float):
        if self.times and not state.time > self.times[-1]:
            raise ValueError("trace times must increase strictly")
        self.times.append(float(state.time))
        self.energies.append(float(E))
        self.voltages.append(float(V))
        self.w_tip.append(float(state.w[-1]))
        self.phi2_tip.append(float(state.phi2[-1]))

    def arrays(self) -> dict:
        t = np.asarray(self.times)
        E = np.asarray(self.energies)
        return {
            "t_star": t,
            "t_real": self.A1 * t,
            "E": E,
            "E_normalized": E / E[0] if E.size and E[0] > 0 else np.full_like(E, np.nan),
            "V": np.asarray(self.voltages),
            "w_tip": np.asarray(self.w_tip),
            "phi2_tip": np.asarray(self.phi2_tip),
        }


def energy(state: BeamState, sys: SemiDiscreteSystem) -> float:
    """½∫ m|w_t|² + Ã|w_xx|² - γβςh₂h₃B̃²(J w_x) w_x dx by the trapezoid rule.

    Velocities are d/dt*, so the kinetic density m|w_t|² is (Ã/L²)|ẇ|².
    Curvature uses the d2 stencil with the mirror ghost at x=0; at the tip it
    is the value the boundary row prescribes (zero in the constraint mode).
    """
    g, c = sys.grid, sys.coeffs
    wts = g.weights
    curv = curvature(state.w, g.dx)
    tip_curv = sys.c_w * state.voltage if sys.mode == "viscous" else 0.0
    s = slope(state.w, g.dx)
    shear = -sys.sigma_ops.apply_J(s)
    kinetic = c.A_tilde / c.L**2 * np.sum(wts * state.wdot**2)
    bending = c.A_tilde * (np.sum(wts[:-1] * curv**2) + wts[-1] * tip_curv**2)
    return 0.5 * float(kinetic + bending + sys.c_coupling * np.sum(wts * shear * s))


def law_output(state: BeamState, sys: SemiDiscreteSystem) -> float:
    """The value recorded in the V column: the law output before any gain."""
    return float(ctl.law_output(state.wdot, state.phi2dot, sys, sys.control))


def _with_controller(sys: SemiDiscreteSystem, controller) -> SemiDiscreteSystem:
    if controller is None or controller == sys.control:
        return sys
    return assemble(sys.grid, sys.coeffs, sys.mode, controller, sys.kappa, sys.options)


class Stepper:
    """One-step map z -> z_next for a fixed system and integrator."""

    def __init__(self, sys: SemiDiscreteSystem, integrator: IntegratorConfig):
        self.sys = sys
        self.integrator = integrator
        dt = integrator.dt
        if integrator.scheme == "implicit_midpoint":
            G = sys.generator()
            n = G.shape[0]
            lhs = np.eye(n) - 0.5 * dt * G
            self._rhs = np.eye(n) + 0.5 * dt * G
            try:
                self._lu = lu_factor(lhs, check_finite=True)
            except (ValueError, np.linalg.LinAlgError) as exc:
                raise NonConvergence(f"midpoint matrix factorization failed: {exc}") from exc
            if not np.all(np.isfinite(self._lu[0])) or np.min(np.abs(np.diag(self._lu[0]))) == 0:
                raise NonConvergence("midpoint matrix is singular")
        else:
            bound = rk4_stable_step(np.linalg.eigvals(sys.generator()))
            log.info("rk4 stability bound dt <= %.3e (c = %.3e in c*dx^2)", bound, bound / sys.grid.dx**2)
            if dt > bound:
                raise ValidationError(f"rk4 dt={dt:g} exceeds stability bound {bound:.3e}")

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self.integrator.scheme == "implicit_midpoint":
            out = lu_solve(self._lu, self._rhs @ z)
        else:
            f = self.sys.rhs_vector
            h = self.integrator.dt
            k1 = f(z)
            k2 = f(z + 0.5 * h * k1)
            k3 = f(z + 0.5 * h * k2)
            k4 = f(z + h * k3)
            out = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(out)):
            raise NonConvergence("non-finite state after step")
        return out


def _rk4_amplification(z):
    return np.abs(1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24)


def rk4_stable_step(eigenvalues, tol: float = 1e-12) -> float:
    """Largest dt with |R(dt λ)| <= 1 for every eigenvalue, by bisection.

    Eigenvalues with non-negative real part are skipped, except that purely
    imaginary ones are held to the RK4 interval on the imaginary axis.
    """
    ev = np.asarray(eigenvalues)
    ev = ev[(ev.real < 0) | (np.abs(ev) > 0)]
    if ev.size == 0:
        return np.inf
    rho = np.abs(ev).max()
    lo, hi = 0.0, 4.0 / rho
    if np.all(_rk4_amplification(hi * ev[ev.real < 0]) <= 1 + tol) and not np.any(ev.real >= 0):
        return hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        ok = np.all(_rk4_amplification(mid * ev[ev.real < 0]) <= 1 + tol)
        im = ev[ev.real >= 0]
        if im.size:
            ok = ok and mid * np.abs(im).max() <= 2 * np.sqrt(2)
        lo, hi = (mid, hi) if ok else (lo, mid)
    return lo


def step(state: BeamState, sys: SemiDiscreteSystem, controller=None, integrator: IntegratorConfig = IntegratorConfig()) -> BeamState:
    sys = _with_controller(sys, controller)
    z = Stepper(sys, integrator)(sys.pack(state))
    return sys.unpack(z, state.time + integrator.dt)


def is_conservative(sys: SemiDiscreteSystem) -> bool:
    return sys.mode == "constraint" and sys.kappa == 0 and not sys.control.active


def run(initial: BeamState, sys: SemiDiscreteSystem, controller=None, integrator: IntegratorConfig = IntegratorConfig()) -> SimulationTrace:
    """March from ``initial`` to the horizon, recording E, V and tip values each step."""
    sys = _with_controller(sys, controller)
    stepper = Stepper(sys, integrator)
    steps = int(round(integrator.horizon(sys.A1) / integrator.dt))
    trace = SimulationTrace(A1=sys.A1)
    z = sys.pack(initial)
    state = sys.unpack(z, initial.time)
    E0 = energy(state, sys)
    trace.append(state, E0, law_output(state, sys))
    stride = integrator.snapshot_stride
    if stride:
        trace.snapshots.append((0, state))
    conservative = is_conservative(sys)
    for k in range(1, steps + 1):
        z = stepper(z)
        state = sys.unpack(z, initial.time + k * integrator.dt)
        E = energy(state, sys)
        if E < 0:
            raise NonPositiveEnergy(f"negative energy {E:g} at step {k}")
        if conservative and E0 > 0 and (E - E0) / E0 > CONSERVATION_TOL:
            raise StabilityViolation(
                f"energy grew by {(E - E0) / E0:.3e} relative at step {k} (t*={state.time:.6g})"
            )
        trace.append(state, E, law_output(state, sys))
        if stride and k % stride == 0:
            trace.snapshots.append((k, state))
    return trace


@dataclass(frozen=True)
class DecayFit:
    omega: float
    amplitude: float
    residual: float

    def __iter__(self):
        return iter((self.omega, self.amplitude))


def fit_decay_rate(trace, window: Tuple[float, float], min_samples: int = 3) -> DecayFit:
    """Least-squares fit of log E(t) = log M - 2ωt over ``window``.

    ``trace`` is a :class:`SimulationTrace` or a ``(times, energies)`` pair.
    Returns ω, M and the RMS residual of the log fit.
    """
    if isinstance(trace, SimulationTrace):
        t, E = np.asarray(trace.times), np.asarray(trace.energies)
    else:
        t, E = (np.asarray(a, float) for a in trace)
    lo, hi = window
    if not hi > lo:
        raise WindowTooShort(f"empty window [{lo}, {hi}]")
    mask = (t >= lo) & (t <= hi)
    if mask.sum() < min_samples:
        raise WindowTooShort(f"{mask.sum()} samples in window [{lo}, {hi}]")
    Ew = E[mask]
    if np.any(Ew <= 0):
        raise NonPositiveEnergy("energies in the fit window must be positive")
    A = np.column_stack((np.ones(mask.sum()), t[mask]))
    coef, *_ = np.linalg.lstsq(A, np.log(Ew), rcond=None)
    resid = np.log(Ew) - A @ coef
    return DecayFit(omega=float(-coef[1] / 2), amplitude=float(np.exp(coef[0])), residual=float(np.sqrt(np.mean(resid**2))))
