"""Cross-checks of the smoothing operator: quadrature against solve, symmetry,
sign conditions and the identity J = P D² on compatible functions."""
from __future__ import annotations

import numpy as np

from .grid import build_grid
from .sigma import SigmaOperators

ORACLE_N = (50, 100, 200)


def smooth_inputs(x, L, rng, count: int = 20, degree: int = 6):
    """Random Legendre series on [0, L] with unit-scale coefficients."""
    t = 2 * np.asarray(x) / L - 1
    return [np.polynomial.legendre.legval(t, rng.standard_normal(degree + 1)) for _ in range(count)]


def kernel_vs_solve(sigma_C, L, bc, rng, N_values=ORACLE_N, count=20):
    """Max relative L² discrepancy per N and the fitted refinement slope."""
    coeffs = [rng.standard_normal(7) for _ in range(count)]
    errs = []
    for N in N_values:
        grid = build_grid(N, L)
        ops = SigmaOperators(grid, sigma_C, bc)
        t = 2 * grid.nodes / L - 1
        worst = 0.0
        for a in coeffs:
            f = np.polynomial.legendre.legval(t, a)
            ps = ops.apply_P_solve(f)
            pk = ops.apply_P_kernel(f)
            worst = max(worst, grid.norm(pk - ps) / grid.norm(ps))
        errs.append(worst)
    slope = -np.polyfit(np.log(N_values), np.log(errs), 1)[0]
    return np.asarray(errs), float(slope)


def weighted_symmetry(sigma_C, L, bc, N=100):
    """‖WP - (WP)ᵀ‖ / ‖WP‖ with W the trapezoid weights."""
    grid = build_grid(N, L)
    ops = SigmaOperators(grid, sigma_C, bc)
    WP = grid.weights[:, None] * ops.P_matrix
    return float(np.linalg.norm(WP - WP.T) / np.linalg.norm(WP))


def sign_violations(sigma_C, L, bc, rng, N=100, count=50):
    """Largest violations of ⟨Pu,u⟩ ≥ 0 and ⟨Ju,u⟩ ≤ 0, each over ‖u‖²."""
    grid = build_grid(N, L)
    ops = SigmaOperators(grid, sigma_C, bc)
    p_viol = j_viol = 0.0
    for _ in range(count):
        u = rng.standard_normal(N + 1)
        if bc == "dn":
            u[0] = 0.0  # P acts on functions vanishing at x=0
        nu = grid.inner(u, u)
        p_viol = max(p_viol, -grid.inner(ops.apply_P_solve(u), u) / nu)
        j_viol = max(j_viol, grid.inner(ops.apply_J(u), u) / nu)
    return float(p_viol), float(j_viol)


def j_identity_errors(sigma_C, L, bc, N_values=ORACLE_N):
    """Relative error of J w against P w'' for exactly compatible w.

    ``dn`` uses w = sin(πx/2L) + sin(3πx/2L)/3, ``nn`` uses
    w = cos(πx/L) + cos(2πx/L)/2; w'' is taken analytically.
    """
    errs = []
    for N in N_values:
        grid = build_grid(N, L)
        x = grid.nodes
        ops = SigmaOperators(grid, sigma_C, bc)
        if bc == "dn":
            k1, k3 = np.pi / (2 * L), 3 * np.pi / (2 * L)
            w = np.sin(k1 * x) + np.sin(k3 * x) / 3
            wxx = -(k1**2) * np.sin(k1 * x) - k3**2 * np.sin(k3 * x) / 3
        else:
            k1, k2 = np.pi / L, 2 * np.pi / L
            w = np.cos(k1 * x) + np.cos(k2 * x) / 2
            wxx = -(k1**2) * np.cos(k1 * x) - k2**2 * np.cos(k2 * x) / 2
        Jw = ops.apply_J(w)
        PD2w = ops.apply_P_solve(wxx)
        errs.append(grid.norm(Jw - PD2w) / grid.norm(PD2w))
    slope = -np.polyfit(np.log(N_values), np.log(errs), 1)[0]
    return np.asarray(errs), float(slope)


def sigma_oracle_suite(sigma_C: float, L: float = 1.0, seed: int = 0):
    """Rows (check, bc, value, threshold, passed) for both boundary variants."""
    rows = []
    for bc in ("dn", "nn"):
        rng = np.random.default_rng(seed)
        errs, slope = kernel_vs_solve(sigma_C, L, bc, rng)
        rows.append(dict(check="kernel_vs_solve_N200", bc=bc, value=errs[-1], threshold=1e-3, passed=errs[-1] <= 1e-3))
        rows.append(dict(check="kernel_vs_solve_slope_dev", bc=bc, value=abs(slope - 2), threshold=0.3, passed=abs(slope - 2) <= 0.3))
        sym = weighted_symmetry(sigma_C, L, bc)
        rows.append(dict(check="P_symmetry", bc=bc, value=sym, threshold=1e-10, passed=sym <= 1e-10))
        pv, jv = sign_violations(sigma_C, L, bc, rng)
        rows.append(dict(check="P_nonnegative_violation", bc=bc, value=pv, threshold=1e-12, passed=pv <= 1e-12))
        rows.append(dict(check="J_nonpositive_violation", bc=bc, value=jv, threshold=1e-12, passed=jv <= 1e-12))
        jerr, jslope = j_identity_errors(sigma_C, L, bc)
        rows.append(dict(check="J_identity_slope_dev", bc=bc, value=abs(jslope - 2), threshold=0.3, passed=abs(jslope - 2) <= 0.3))
    return rows
