"""The smoothing operator P = (a² I - D²)⁻¹ and J = a² P - I, with a² = ςC̃.

Two boundary variants are supported:

``"dn"``
    s(0) = 0, s_x(L) = 0.  This is the closed-form Green's kernel
    cosh(a(z-L)) sinh(a x) / (a cosh(a L)) for x <= z, and the variant under
    which φ² = -B̃ J w_x meets φ²(0) = 0, φ²_x(L) = 0.  Default.
``"nn"``
    s_x(0) = s_x(L) = 0, kernel cosh(a x_<) cosh(a (L - x_>)) / (a sinh(a L)).

Each variant has a quadrature path (:class:`SigmaKernel`) and a finite
difference path (:class:`EllipticSolver`); the latter is what the model uses.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from .errors import SolverSingular
from .grid import Grid

BOUNDARY_KINDS = ("dn", "nn")


def green_kernel(x, z, a: float, L: float, bc: str = "dn"):
    """Closed-form Green's function of a² - d²/dx², evaluated without overflow."""
    x, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(z, float))
    lo = np.minimum(x, z)
    hi = np.maximum(x, z)
    if bc == "dn":
        # cosh(a(hi-L)) sinh(a lo) / (a cosh(aL)), every exponent below is <= 0
        num = (
            np.exp(a * (lo + hi - 2 * L))
            - np.exp(a * (hi - lo - 2 * L))
            + np.exp(a * (lo - hi))
            - np.exp(-a * (lo + hi))
        )
        return num / (2 * a * (1 + np.exp(-2 * a * L)))
    if bc == "nn":
        # cosh(a lo) cosh(a(L-hi)) / (a sinh(aL))
        num = (
            np.exp(a * (lo - hi))
            + np.exp(a * (lo + hi - 2 * L))
            + np.exp(-a * (lo + hi))
            + np.exp(a * (hi - lo - 2 * L))
        )
        return num / (2 * a * (1 - np.exp(-2 * a * L)))
    raise ValueError(f"unknown boundary kind {bc!r}")


class SigmaKernel:
    """P applied by trapezoid quadrature of the closed-form kernel."""

    def __init__(self, grid: Grid, sigma_C: float, bc: str = "dn"):
        if not sigma_C > 0:
            raise SolverSingular("kernel parameter ςC̃ must be positive")
        self.grid = grid
        self.sigma_C = float(sigma_C)
        self.bc = bc
        x = grid.nodes
        self.matrix = green_kernel(x[:, None], x[None, :], np.sqrt(sigma_C), grid.L, bc)
        self.weights = grid.weights

    def apply(self, f) -> np.ndarray:
        return self.matrix @ (self.weights * np.asarray(f))


class EllipticSolver:
    """Second-order finite difference solve of (a² I - D²_h) s = f.

    Dirichlet ends are imposed by fixing the node value; Neumann ends use the
    mirror ghost s_{-1} = s_1 or s_{N+1} = s_{N-1}.  The resulting matrix is
    self-adjoint in the trapezoid inner product.
    """

    def __init__(self, grid: Grid, sigma_C: float, bc: str = "dn"):
        if bc not in BOUNDARY_KINDS:
            raise ValueError(f"unknown boundary kind {bc!r}")
        if not sigma_C > 0:
            raise SolverSingular("ςC̃ must be positive for a unique solution")
        self.grid = grid
        self.sigma_C = float(sigma_C)
        self.bc = bc
        N, h2 = grid.N, grid.dx**2
        self._first = 1 if bc == "dn" else 0
        n = N + 1 - self._first
        ab = np.zeros((3, n))
        ab[1, :] = sigma_C + 2 / h2
        ab[0, 1:] = -1 / h2  # super-diagonal
        ab[2, :-1] = -1 / h2  # sub-diagonal
        ab[2, -2] = -2 / h2  # mirror at x = L
        if bc == "nn":
            ab[0, 1] = -2 / h2  # mirror at x = 0
        self._ab = ab
        self._matrix = None

    def apply(self, f) -> np.ndarray:
        f = np.asarray(f)
        out = np.zeros(f.shape, dtype=np.result_type(f, float))
        rhs = f[self._first :]
        try:
            out[self._first :] = solve_banded((1, 1), self._ab, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverSingular(str(exc)) from exc
        return out

    def operator_matrix(self) -> np.ndarray:
        """Dense (a² I - D²_h) on the solved nodes."""
        n = self._ab.shape[1]
        A = np.diag(self._ab[1])
        A += np.diag(self._ab[0, 1:], 1)
        A += np.diag(self._ab[2, :-1], -1)
        return A

    @property
    def matrix(self) -> np.ndarray:
        """Dense P on all nodes x_0..x_N (rows/columns of fixed nodes are zero)."""
        if self._matrix is None:
            N = self.grid.N
            P = np.zeros((N + 1, N + 1))
            P[self._first :, self._first :] = np.linalg.inv(self.operator_matrix())
            self._matrix = P
        return self._matrix


class SigmaOperators:
    """Bundle of P (solve and kernel routes) and J on one grid."""

    def __init__(self, grid: Grid, sigma_C: float, bc: str = "dn"):
        self.grid = grid
        self.sigma_C = float(sigma_C)
        self.bc = bc
        self.solver = EllipticSolver(grid, sigma_C, bc)
        self._kernel = None

    @property
    def kernel(self) -> SigmaKernel:
        if self._kernel is None:
            self._kernel = SigmaKernel(self.grid, self.sigma_C, self.bc)
        return self._kernel

    def apply_P_solve(self, f) -> np.ndarray:
        return self.solver.apply(f)

    def apply_P_kernel(self, f) -> np.ndarray:
        return self.kernel.apply(f)

    def apply_J(self, f) -> np.ndarray:
        f = np.asarray(f)
        return self.sigma_C * self.solver.apply(f) - f

    @property
    def P_matrix(self) -> np.ndarray:
        return self.solver.matrix

    @property
    def J_matrix(self) -> np.ndarray:
        return self.sigma_C * self.solver.matrix - np.eye(self.grid.N + 1)


def apply_P_kernel(f, grid: Grid, sigma_C: float, bc: str = "dn") -> np.ndarray:
    return SigmaKernel(grid, sigma_C, bc).apply(f)


def apply_P_solve(f, grid: Grid, sigma_C: float, bc: str = "dn") -> np.ndarray:
    return EllipticSolver(grid, sigma_C, bc).apply(f)


def apply_J(f, grid: Grid, sigma_C: float, bc: str = "dn") -> np.ndarray:
    return SigmaOperators(grid, sigma_C, bc).apply_J(f)
