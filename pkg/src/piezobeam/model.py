"""Semi-discrete bending/shear system.

Two modes share one state container:

``viscous``
    The filtered finite-difference scheme: bending rows
    ẅ + D₄w - κ'D₂ẇ ∓ c_wφ D₁φ² = 0 and shear rows
    -D₂φ̇²/L² - D₂φ²/L² + ςC̃φ² + (B̃/L³)D₃w = 0 at nodes 1..N-1, with
    φ²_0 = w_0 = 0, w_{-1} = w_1 and three tip rows carrying the applied
    voltage.  Dynamic unknowns: w, ẇ, φ² at nodes 1..N-1 plus the applied
    voltage u when a feedback law closes the loop (the law involves φ̇²_N,
    whose tip row involves u, so u obeys its own first-order equation).
    Time is t*, coefficients as in the nondimensional scheme.

``constraint``
    Shear eliminated through φ² = -B̃ J w_x.  Dimensional coefficients,
    discretized from the quadrature of the energy so that the open-loop
    system conserves exactly that energy.  Unknowns: w, ẇ at nodes 1..N.

Reduced state layout (``pack``/``unpack``): displacement block, velocity
block, then shear block (viscous only) and finally u (viscous, closed loop).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from . import controller as ctl
from .config import BeamCoefficients
from .errors import SingularMass, SolverSingular
from .grid import (
    TIP_D3_CONSISTENT,
    TIP_D3_PRINTED,
    Grid,
    apply_interior,
    curvature,
    curvature_adjoint,
    curvature_matrix,
    slope,
    slope_adjoint,
    slope_matrix,
    stencil_rows,
)
from .sigma import SigmaOperators

MODES = {
    "viscous": "viscous",
    "viscous_filtered": "viscous",
    "constraint": "constraint",
    "elliptic_constraint": "constraint",
}


@dataclass
class BeamState:
    """Grid functions on x_0..x_N at one instant (rates are d/dt*)."""

    w: np.ndarray
    wdot: np.ndarray
    phi2: np.ndarray
    time: float = 0.0
    voltage: float = 0.0
    phi2dot: Optional[np.ndarray] = None

    def scaled(self, c: float) -> "BeamState":
        return BeamState(
            c * self.w,
            c * self.wdot,
            c * self.phi2,
            self.time,
            c * self.voltage,
            None if self.phi2dot is None else c * self.phi2dot,
        )


@dataclass(frozen=True)
class SchemeOptions:
    """Choices where the printed scheme admits more than one reading.

    coupling_sign
        Sign s in the bending row ``+ s c_wφ D₁φ²`` and the tip row
        ``Ã w_xxx + s c_s φ²_N = 0``.  +1 is the printed discretization,
        -1 the sign of the continuum equations.  With -1 the lagging shear
        filter stiffens the beam after a delay and pumps energy into the
        mid-range modes (positive real parts); +1 lags a softening term
        instead and is damped.
    tip_stencil
        ``"consistent"`` uses (3, -10, 12, -6, 1)/(2dx³) on N+1..N-3;
        ``"printed"`` uses (2, -5, 2, 4, -4)/(2dx³).
    viscosity_denominator
        κ'= κ / viscosity_denominator multiplies D₂ẇ.
    """

    coupling_sign: float = 1.0
    tip_stencil: str = "consistent"
    viscosity_denominator: float = 2.0


def normalize_mode(mode: str) -> str:
    try:
        return MODES[mode]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r}") from None


class SemiDiscreteSystem:
    def __init__(
        self,
        grid: Grid,
        coeffs: BeamCoefficients,
        mode: str = "viscous",
        control: ctl.ControllerConfig = ctl.OFF,
        kappa: Optional[float] = None,
        options: SchemeOptions = SchemeOptions(),
    ):
        self.grid = grid
        self.coeffs = coeffs
        self.mode = normalize_mode(mode)
        self.control = control
        if kappa is None:
            kappa = coeffs.kappa if coeffs.kappa is not None else grid.dx / 5
        self.kappa = float(kappa)
        self.options = options
        self.sigma_ops = SigmaOperators(grid, coeffs.sigma_C, "dn")
        if self.mode == "constraint" and control.law == "discrete_sec4":
            raise ValueError("the discrete four-term law needs the viscous mode")
        N, dx, L = grid.N, grid.dx, coeffs.L
        c = coeffs
        self.n = N - 1 if self.mode == "viscous" else N
        self.controlled = control.active and self.mode == "viscous"

        # coefficient names follow the printed rows
        self.c_wphi = c.shear_coupling * L**3 / c.A_tilde
        self.c_s = c.shear_coupling * L**3
        self.c_w = c.gamma * c.B3 / (c.B4 * c.A_tilde)
        self.c_phi = c.gamma * c.B_tilde * c.B3 / (L**2 * c.B4 * c.A_tilde) - c.B2 / (c.beta * c.B4)
        self.kappa_eff = self.kappa / options.viscosity_denominator
        if options.tip_stencil == "consistent":
            self._tip = dict(zip(*TIP_D3_CONSISTENT))
        elif options.tip_stencil == "printed":
            self._tip = dict(zip(*TIP_D3_PRINTED))
        else:
            raise ValueError(f"unknown tip stencil {options.tip_stencil!r}")

        self._generator = None
        if self.mode == "constraint":
            self._assemble_constraint()

    # ------------------------------------------------------------------ sizes
    @property
    def size(self) -> int:
        if self.mode == "constraint":
            return 2 * self.n
        return 3 * self.n + (1 if self.controlled else 0)

    @property
    def A1(self) -> float:
        return self.coeffs.A1

    # ------------------------------------------------------- viscous helpers
    def extend(self, w_int, phi_int, u):
        """Fill boundary and ghost values from the interior unknowns.

        Returns the ghost-padded bending field (nodes -1..N+1) and the shear
        field on nodes 0..N.  Also valid for rates, since the map is linear.
        """
        N, dx = self.grid.N, self.grid.dx
        w_int = np.asarray(w_int)
        phi_int = np.asarray(phi_int)
        dtype = np.result_type(w_int, phi_int, u, float)
        Phi = np.zeros(N + 1, dtype=dtype)
        Phi[1:N] = phi_int
        Phi[N] = (4 * phi_int[-1] - phi_int[-2] + 2 * dx * self.c_phi * u) / 3
        W = np.zeros(N + 3, dtype=dtype)
        W[2 : N + 1] = w_int
        W[0] = w_int[0]
        t = self._tip
        s = self.options.coupling_sign
        wN1, wN2, wN3 = w_int[-1], w_int[-2], w_int[-3]
        WN = (
            -2 * dx**3 * s * self.c_s * Phi[N] / self.coeffs.A_tilde
            - (t[-1] - t[1]) * wN1
            - t[-2] * wN2
            - t[-3] * wN3
            - t[1] * dx**2 * self.c_w * u
        ) / (2 * t[1] + t[0])
        W[N + 1] = WN
        W[N + 2] = 2 * WN - wN1 + dx**2 * self.c_w * u
        return W, Phi

    def _split(self, z):
        n = self.n
        w = z[:n]
        v = z[n : 2 * n]
        if self.mode == "constraint":
            return w, v, None, 0.0
        phi = z[2 * n : 3 * n]
        u = z[3 * n] if self.controlled else 0.0
        return w, v, phi, u

    def _phi_mass_banded(self):
        """Banded form of the shear-rate mass rows, nodes 1..N-1."""
        n, dx, L = self.n, self.grid.dx, self.coeffs.L
        k = 1.0 / (L**2 * dx**2)
        ab = np.zeros((3, n))
        ab[1, :] = 2 * k
        ab[0, 1:] = -k
        ab[2, :-1] = -k
        # last row sees φ̇_N = (4φ̇_{N-1} - φ̇_{N-2})/3 + ...
        ab[1, -1] = 2 * k / 3
        ab[2, -2] = -2 * k / 3
        return ab

    def _viscous_rates(self, z, V=None):
        """Matrix-free rates for the viscous scheme.

        Returns (v̇, φ̇, u̇, W, Φ, Ẇ, Φ̇).  ``V`` given means an open-loop
        applied voltage held constant over the evaluation.
        """
        N, dx, L = self.grid.N, self.grid.dx, self.coeffs.L
        c = self.coeffs
        w, v, phi, u = self._split(z)
        closed = self.controlled and V is None
        if V is not None:
            u = V
        W, Phi = self.extend(w, phi, u)
        Phi_pad = np.concatenate(([0.0], Phi, [0.0]))
        rhs_phi = (
            apply_interior("d2", Phi_pad, 1, N - 1, dx) / L**2
            - c.sigma_C * phi
            - c.B_tilde / L**3 * apply_interior("d3", W, 1, N - 1, dx)
        )
        ab = self._phi_mass_banded()
        try:
            x1 = solve_banded((1, 1), ab, rhs_phi)
        except np.linalg.LinAlgError as exc:
            raise SingularMass(str(exc)) from exc
        zeros = np.zeros(self.n)
        if closed:
            col = np.zeros(self.n)
            col[-1] = -2 * dx * self.c_phi / 3 / (L**2 * dx**2)
            x2 = solve_banded((1, 1), ab, col)

            def law(wr, pr, ur):
                Wd, Pd = self.extend(wr, pr, ur)
                return ctl.applied_from_rates(Wd[1 : N + 2], Pd, self, self.control)

            base = law(v, zeros, 0.0)
            e1 = np.zeros(self.n)
            e1[-1] = 1.0
            e2 = np.zeros(self.n)
            e2[-2] = 1.0
            r1, r2 = law(zeros, e1, 0.0), law(zeros, e2, 0.0)
            d = law(zeros, zeros, 1.0)
            denom = d - (r1 * x2[-1] + r2 * x2[-2])
            if abs(denom) < 1e-300:
                raise SingularMass("voltage row is degenerate")
            udot = (u - base - (r1 * x1[-1] + r2 * x1[-2])) / denom
            phidot = x1 - x2 * udot
        else:
            udot = 0.0
            phidot = x1
        Wd, Phid = self.extend(v, phidot, udot)
        Phi_pad_1 = Phi_pad
        vdot = (
            -apply_interior("d4", W, 1, N - 1, dx)
            + self.kappa_eff * apply_interior("d2", Wd, 1, N - 1, dx)
            - self.options.coupling_sign * self.c_wphi * apply_interior("d1_central", Phi_pad_1, 1, N - 1, dx)
        )
        return vdot, phidot, udot, W, Phi, Wd, Phid

    # ---------------------------------------------------- constraint helpers
    def _assemble_constraint(self):
        g, c = self.grid, self.coeffs
        N, dx, L = g.N, g.dx, c.L
        wts = g.weights
        D2 = curvature_matrix(N, dx)
        G = slope_matrix(N, dx)
        J = self.sigma_ops.J_matrix
        self.mass = (c.A_tilde / L**2) * wts[1:]  # m / A1² times trapezoid weights
        self.K = c.A_tilde * D2.T @ (wts[:N, None] * D2) + self.c_coupling * G.T @ (
            wts[:, None] * (-J @ G)
        )
        self.K = 0.5 * (self.K + self.K.T)
        S = np.zeros((N, N))
        for i in range(N):  # forward differences (v_{i+1} - v_i)/dx, v_0 = 0
            S[i, i] = 1 / dx
            if i >= 1:
                S[i, i - 1] = -1 / dx
        self.R = self.kappa_eff * (c.A_tilde / L**2) * dx * S.T @ S
        P = self.sigma_ops.P_matrix
        tip = np.zeros(N + 1)
        tip[N] = 1.0
        self.ell = (c.sigma * c.h2 * c.h3 * c.B_tilde * c.B2) * (P[N, :] @ G) + c.B3 * G[N, :]
        self.b = (c.gamma / c.B4) * self.ell

    @property
    def c_coupling(self) -> float:
        """βγςh₂h₃B̃·B̃, the weight of the -J term in the energy."""
        return self.coeffs.shear_coupling * self.coeffs.B_tilde

    def solve_phi_constraint(self, w, V: float = 0.0) -> np.ndarray:
        """φ² from ςC̃φ² - φ²_xx + B̃w_xxx = -(B₂/(βB₄)) V δ_L, φ²(0)=0, φ²_x(L)=0.

        ``w`` is given on nodes 0..N (clamped).  One tridiagonal solve for
        χ = φ² - B̃w_x, which obeys (ςC̃ - D²)χ = -ςC̃B̃w_x - (B₂/(βB₄))Vδ_L.
        """
        c, g = self.coeffs, self.grid
        s = slope(w, g.dx)
        f = -c.sigma_C * c.B_tilde * s
        if V:
            f = f.astype(np.result_type(f, V))
            f[-1] -= c.B2 / (c.beta * c.B4) * V / g.weights[-1]
        chi = self.sigma_ops.apply_P_solve(f)
        return chi + c.B_tilde * s

    def _constraint_force(self, w_nodes, v_int, u):
        """Matrix-free -K w - R v + b u on nodes 1..N."""
        g, c = self.grid, self.coeffs
        N, dx = g.N, g.dx
        wts = g.weights
        curv = curvature(w_nodes, dx)
        phi = self.solve_phi_constraint(w_nodes, 0.0)
        force = -c.A_tilde * curvature_adjoint(wts[:N] * curv, dx)
        force -= self.coeffs.shear_coupling * slope_adjoint(wts * phi, dx)
        # viscosity: forward differences and their adjoint
        vfull = np.concatenate(([0.0], v_int))
        diff = (vfull[1:] - vfull[:-1]) / dx
        adj = np.zeros(N + 1, dtype=diff.dtype)
        adj[1:] += diff / dx
        adj[:-1] -= diff / dx
        force -= self.kappa_eff * (c.A_tilde / c.L**2) * dx * adj[1:]
        if u:
            force = force + u * self.b
        return force

    def constraint_voltage(self, v_nodes) -> float:
        """Applied voltage of the closed loop in constraint mode."""
        if not self.control.active:
            return 0.0
        phi2dot = None
        if self.control.trace_method == "phi_substitution":
            phi2dot = self.solve_phi_constraint(v_nodes, 0.0)
        V = ctl.law_output(v_nodes, phi2dot, self, self.control)
        return ctl.applied_voltage(V, self.control)

    # -------------------------------------------------------------- public
    def rhs_vector(self, z, V=None) -> np.ndarray:
        z = np.asarray(z)
        if self.mode == "constraint":
            w, v, _, _ = self._split(z)
            w_nodes = np.concatenate(([0.0], w))
            v_nodes = np.concatenate(([0.0], v))
            u = self.constraint_voltage(v_nodes) if V is None else V
            vdot = self._constraint_force(w_nodes, v, u) / self.mass
            return np.concatenate((v, vdot))
        vdot, phidot, udot, *_ = self._viscous_rates(z, V)
        w, v, phi, u = self._split(z)
        parts = [v, vdot, phidot]
        if self.controlled:
            parts.append([udot if V is None else 0.0])
        return np.concatenate(parts)

    def generator(self) -> np.ndarray:
        """Dense matrix G with ż = G z for the (closed- or open-loop) system."""
        if self._generator is None:
            if self.mode == "constraint":
                self._generator = self._constraint_generator()
            else:
                self._generator = self._viscous_generator()
        return self._generator

    def _constraint_generator(self):
        n = self.n
        Minv = 1.0 / self.mass
        Gm = np.zeros((2 * n, 2 * n))
        Gm[:n, n:] = np.eye(n)
        Gm[n:, :n] = -Minv[:, None] * self.K
        damp = -Minv[:, None] * self.R
        if self.control.active:
            a = self._constraint_law_row()
            damp = damp + np.outer(Minv * self.b, a)
        Gm[n:, n:] = damp
        return Gm

    def _constraint_law_row(self):
        """Row a with applied voltage u = a·v (v on nodes 1..N)."""
        N = self.grid.N
        a = np.zeros(N)
        for j in range(N):
            e = np.zeros(N + 1)
            e[j + 1] = 1.0
            a[j] = self.constraint_voltage(e)
        return a

    def _extension_matrices(self):
        """Ew (N+3, 2n+1) and EΦ (N+1, 2n+1) acting on q = [w_int, φ_int, u]."""
        n, N = self.n, self.grid.N
        Ew = np.zeros((N + 3, 2 * n + 1))
        Ep = np.zeros((N + 1, 2 * n + 1))
        for j in range(2 * n + 1):
            q = np.zeros(2 * n + 1)
            q[j] = 1.0
            W, P = self.extend(q[:n], q[n : 2 * n], q[2 * n])
            Ew[:, j] = W
            Ep[:, j] = P
        return Ew, Ep

    def _viscous_generator(self):
        n, N, dx, L = self.n, self.grid.N, self.grid.dx, self.coeffs.L
        c = self.coeffs
        size = self.size
        Ew, Ep = self._extension_matrices()
        Ep_pad = np.vstack((np.zeros((1, 2 * n + 1)), Ep, np.zeros((1, 2 * n + 1))))
        rows = range(1, N)
        D4 = stencil_rows("d4", rows, N + 3, dx)
        D3 = stencil_rows("d3", rows, N + 3, dx)
        D2 = stencil_rows("d2", rows, N + 3, dx)
        D1 = stencil_rows("d1_central", rows, N + 3, dx)

        # selection maps from the state z
        Q = np.zeros((2 * n + 1, size))  # z -> q = [w, φ, u]
        Q[:n, :n] = np.eye(n)
        Q[n : 2 * n, 2 * n : 3 * n] = np.eye(n)
        if self.controlled:
            Q[2 * n, 3 * n] = 1.0
        Vsel = np.zeros((n, size))
        Vsel[:, n : 2 * n] = np.eye(n)
        ny = n + (1 if self.controlled else 0)
        # qdot = Sv v + Sy y, y = [φ̇, u̇]
        Sv = np.zeros((2 * n + 1, n))
        Sv[:n] = np.eye(n)
        Sy = np.zeros((2 * n + 1, ny))
        Sy[n : 2 * n, :n] = np.eye(n)
        if self.controlled:
            Sy[2 * n, n] = 1.0

        Ms = np.zeros((ny, ny))
        F = np.zeros((ny, size))
        Ms[:n] = -(D2 @ Ep_pad @ Sy) / L**2
        phi_sel = Q[n : 2 * n]
        F[:n] = (D2 @ Ep_pad @ Q) / L**2 - c.sigma_C * phi_sel - c.B_tilde / L**3 * (D3 @ Ew @ Q)
        if self.controlled:
            lw = np.zeros(N + 1)
            lp = np.zeros(N + 1)
            for j in range(N + 1):
                e = np.zeros(N + 1)
                e[j] = 1.0
                lw[j] = ctl.applied_from_rates(e, np.zeros(N + 1), self, self.control)
                lp[j] = ctl.applied_from_rates(np.zeros(N + 1), e, self, self.control)
            law = lw @ Ew[1 : N + 2] + lp @ Ep  # acts on qdot
            Ms[n] = law @ Sy
            F[n] = -(law @ Sv) @ Vsel
            F[n, 3 * n] += 1.0
        try:
            Y = np.linalg.solve(Ms, F)
        except np.linalg.LinAlgError as exc:
            raise SingularMass(str(exc)) from exc
        qdot = Sv @ Vsel + Sy @ Y
        vdot = (
            -(D4 @ Ew @ Q)
            + self.kappa_eff * (D2 @ Ew @ qdot)
            - self.options.coupling_sign * self.c_wphi * (D1 @ Ep_pad @ Q)
        )
        Gm = np.zeros((size, size))
        Gm[:n] = Vsel
        Gm[n : 2 * n] = vdot
        Gm[2 * n :] = Y
        return Gm

    # ------------------------------------------------------------ pack/unpack
    def pack(self, state: BeamState) -> np.ndarray:
        n = self.n
        if self.mode == "constraint":
            return np.concatenate((state.w[1 : n + 1], state.wdot[1 : n + 1]))
        parts = [state.w[1 : n + 1], state.wdot[1 : n + 1], state.phi2[1 : n + 1]]
        if self.controlled:
            parts.append([state.voltage])
        return np.concatenate(parts)

    def unpack(self, z, time: float = 0.0) -> BeamState:
        z = np.asarray(z)
        if self.mode == "constraint":
            w, v, _, _ = self._split(z)
            w_nodes = np.concatenate(([0.0], w))
            v_nodes = np.concatenate(([0.0], v))
            u = self.constraint_voltage(v_nodes)
            phi = self.solve_phi_constraint(w_nodes, u)
            phidot = self.solve_phi_constraint(v_nodes, 0.0)
            return BeamState(w_nodes, v_nodes, phi, time, u, phidot)
        N = self.grid.N
        vdot, phidot, udot, W, Phi, Wd, Phid = self._viscous_rates(z)
        _, _, _, u = self._split(z)
        return BeamState(W[1 : N + 2], Wd[1 : N + 2], Phi, time, float(u), Phid)

    def state_from_fields(self, w, wdot, phi2=None, voltage: float = 0.0, time: float = 0.0) -> BeamState:
        """Build a consistent state from nodal fields (boundary nodes rebuilt)."""
        N = self.grid.N
        phi2 = np.zeros(N + 1) if phi2 is None else np.asarray(phi2, float)
        raw = BeamState(np.asarray(w, float), np.asarray(wdot, float), phi2, time, voltage)
        return self.unpack(self.pack(raw), time)


def assemble(
    grid: Grid,
    coeffs: BeamCoefficients,
    mode: str = "viscous",
    control: ctl.ControllerConfig = ctl.OFF,
    kappa: Optional[float] = None,
    options: SchemeOptions = SchemeOptions(),
) -> SemiDiscreteSystem:
    return SemiDiscreteSystem(grid, coeffs, mode, control, kappa, options)


def solve_phi_constraint(sys: SemiDiscreteSystem, w, V: float = 0.0) -> np.ndarray:
    if sys.mode != "constraint":
        raise ValueError("solve_phi_constraint needs the constraint mode")
    return sys.solve_phi_constraint(w, V)


def rhs(sys: SemiDiscreteSystem, state: BeamState, V: Optional[float] = None) -> BeamState:
    """Time derivative (d/dt*) of ``state``, returned in a BeamState container.

    Field mapping: ``w`` holds ẇ, ``wdot`` holds ẅ, ``phi2`` holds φ̇² and
    ``voltage`` the rate of the applied voltage.  ``V`` given means an
    open-loop applied voltage; otherwise the system's own law is used.
    """
    z = sys.pack(state)
    dz = sys.rhs_vector(z, V)
    n, N = sys.n, sys.grid.N
    if sys.mode == "constraint":
        wd = np.concatenate(([0.0], dz[:n]))
        wdd = np.concatenate(([0.0], dz[n:]))
        return BeamState(wd, wdd, sys.solve_phi_constraint(wd, 0.0), state.time)
    # tip rates follow from the boundary rows
    vdot, phidot, udot, _, _, Wd, Phid = sys._viscous_rates(z, V)
    wdd_full = np.zeros(N + 1)
    wdd_full[1:N] = vdot
    return BeamState(Wd[1 : N + 2], wdd_full, Phid, state.time, float(udot))


def gaussian_bumps(x, L: float = 1.0, amplitude: float = 1e-4, exponent_sign: float = -1.0):
    """Sum of three bumps centred at 2L/5, 3L/5, 4L/5 with width 0.2L.

    Returns the values and the x-derivative.  ``exponent_sign=+1`` gives the
    growing exponential exactly as printed in the source.
    """
    x = np.asarray(x, float)
    f = np.zeros_like(x)
    df = np.zeros_like(x)
    width = 0.2 * L
    for i in (2, 3, 4):
        r = (x - i * L / 5) / width
        e = np.exp(exponent_sign * r**2)
        f += e
        df += e * exponent_sign * 2 * r / width
    return amplitude * f, amplitude * df


def clamp_projection(f, df0: float, x, L: float = 1.0):
    """Remove value and slope at x=0 with a correction supported near the root.

    Subtracts (f(0) + (f'(0) + 4f(0)/L) x)(1 - x/L)⁴, which has the same value
    and slope at 0 and vanishes with three derivatives at x = L.
    """
    x = np.asarray(x, float)
    f = np.asarray(f, float)
    f0 = f[0]
    return f - (f0 + (df0 + 4 * f0 / L) * x) * (1 - x / L) ** 4


def bump_initial_state(sys: SemiDiscreteSystem, amplitude: float = 1e-4, exponent_sign: float = -1.0) -> BeamState:
    """w(x,0) = ẇ(x,0) = bumps, projected onto the clamped conditions; φ² = 0, u = 0."""
    x = sys.grid.nodes
    f, df = gaussian_bumps(x, sys.coeffs.L, amplitude, exponent_sign)
    f = clamp_projection(f, df[0], x, sys.coeffs.L)
    return sys.state_from_fields(f, f)
