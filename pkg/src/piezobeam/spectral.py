"""Discrete analogues of the stability statements: spectra and dissipativity."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from . import controller as ctl
from .errors import EigensolverFailure
from .grid import curvature, slope
from .model import SemiDiscreteSystem, assemble, clamp_projection

MAX_N = 400


@dataclass
class DiscreteGenerator:
    """Generator matrix with the Gram matrix of the energy, E(z) = ½ zᵀ Q z."""

    matrix: np.ndarray
    gram: np.ndarray
    sys: SemiDiscreteSystem

    @property
    def closed_loop(self) -> bool:
        return self.sys.control.active


def _field_maps(sys: SemiDiscreteSystem):
    """Linear maps from the reduced state to nodal w, ẇ and the tip curvature."""
    n = sys.size
    N = sys.grid.N
    Wm = np.zeros((N + 1, n))
    Vm = np.zeros((N + 1, n))
    tip = np.zeros(n)
    if sys.mode == "constraint":
        Wm[1:, : sys.n] = np.eye(sys.n)
        Vm[1:, sys.n :] = np.eye(sys.n)
        return Wm, Vm, tip
    G = sys.generator()
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        w_int, _, phi, u = sys._split(e)
        W, _ = sys.extend(w_int, phi, u)
        Wm[:, j] = W[1 : N + 2]
        tip[j] = sys.c_w * u
    # rates: ż = G z, then extend the rate fields
    for j in range(n):
        wr, _, pr, ur = sys._split(G[:, j])
        Wd, _ = sys.extend(wr, pr, ur)
        Vm[:, j] = Wd[1 : N + 2]
    return Wm, Vm, tip


def gram_matrix(sys: SemiDiscreteSystem) -> np.ndarray:
    """Q with energy(z) = ½ zᵀQz, assembled from the same quadrature."""
    if sys.mode == "constraint":
        n = sys.n
        Q = np.zeros((2 * n, 2 * n))
        Q[:n, :n] = sys.K
        Q[n:, n:] = np.diag(sys.mass)
        return Q
    g, c = sys.grid, sys.coeffs
    wts = g.weights
    Wm, Vm, tip = _field_maps(sys)
    Cm = np.array([curvature(col, g.dx) for col in Wm.T]).T  # N x n
    Sm = np.array([slope(col, g.dx) for col in Wm.T]).T  # N+1 x n
    J = sys.sigma_ops.J_matrix
    Q = c.A_tilde / c.L**2 * Vm.T @ (wts[:, None] * Vm)
    Q += c.A_tilde * (Cm.T @ (wts[:-1, None] * Cm) + wts[-1] * np.outer(tip, tip))
    Q += sys.c_coupling * Sm.T @ (wts[:, None] * (-J @ Sm))
    return 0.5 * (Q + Q.T)


def assemble_generator(sys: SemiDiscreteSystem, controller_cfg: Optional[ctl.ControllerConfig] = None) -> DiscreteGenerator:
    if controller_cfg is not None and controller_cfg != sys.control:
        sys = assemble(sys.grid, sys.coeffs, sys.mode, controller_cfg, sys.kappa, sys.options)
    return DiscreteGenerator(sys.generator(), gram_matrix(sys), sys)


def _matrix(gen) -> np.ndarray:
    return gen.matrix if isinstance(gen, DiscreteGenerator) else np.asarray(gen)


def spectrum(gen) -> np.ndarray:
    """All eigenvalues, sorted by real part, largest first."""
    if isinstance(gen, DiscreteGenerator) and gen.sys.grid.N > MAX_N:
        raise EigensolverFailure(f"dense spectrum capped at N={MAX_N}")
    A = _matrix(gen)
    try:
        ev = scipy.linalg.eigvals(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(str(exc)) from exc
    if not np.all(np.isfinite(ev)):
        raise EigensolverFailure("non-finite eigenvalues")
    order = np.lexsort((ev.imag, -ev.real))
    return ev[order]


def spectral_abscissa(gen) -> float:
    return float(np.max(spectrum(gen).real))


def boundary_trace(sys: SemiDiscreteSystem, v_nodes, route: str = "kernel") -> float:
    """(ςh₂h₃B̃B₂ P + B₃)(v_x)(L), with P by quadrature (``kernel``) or by solve."""
    c = sys.coeffs
    s = slope(v_nodes, sys.grid.dx)
    Ps = sys.sigma_ops.apply_P_kernel(s) if route == "kernel" else sys.sigma_ops.apply_P_solve(s)
    return float(c.sigma * c.h2 * c.h3 * c.B_tilde * c.B2 * Ps[-1] + c.B3 * s[-1])


def boundary_dissipation(sys: SemiDiscreteSystem, v_nodes, route: str = "kernel") -> float:
    """-(γk₁/(B₄A₁)) [(ςh₂h₃B̃B₂ P + B₃)(v_x)(L)]², the predicted Re⟨𝒜̃z, z⟩_E.

    Zero when the law is off.
    """
    cfg = sys.control
    if not cfg.active:
        return 0.0
    c = sys.coeffs
    return -(c.gamma * cfg.k1 / (c.B4 * c.A1)) * boundary_trace(sys, v_nodes, route) ** 2


def smooth_random_fields(grid, rng, terms: int = 5):
    """Random smooth clamped displacement and velocity fields on the nodes."""
    x = grid.nodes / grid.L
    out = []
    for _ in range(2):
        a = rng.standard_normal(terms)
        f = x**2 * np.polynomial.legendre.legval(2 * x - 1, a)
        out.append(clamp_projection(f, 0.0, grid.nodes, grid.L))
    return out


def random_admissible(sys: SemiDiscreteSystem, rng, trace_free: bool = False) -> np.ndarray:
    """Reduced state built from smooth nodal fields with the boundary rows enforced.

    ``trace_free`` removes the component of the velocity seen by the
    boundary trace, so the feedback does no work on the sample.
    """
    w, v = smooth_random_fields(sys.grid, rng)
    if trace_free:
        _, v2 = smooth_random_fields(sys.grid, rng)
        t1 = boundary_trace(sys, v, "solve")
        t2 = boundary_trace(sys, v2, "solve")
        v = v - (t1 / t2) * v2
    N = sys.grid.N
    phi = np.zeros(N + 1)
    if sys.mode == "viscous":
        phi = smooth_random_fields(sys.grid, rng)[0]
    return sys.pack(sys.state_from_fields(w, v, phi))


@dataclass
class DissipativityReport:
    max_quotient: float
    quotients: np.ndarray  # Re⟨𝒜̃z, z⟩_E / ‖z‖²_E
    values: np.ndarray  # Re⟨𝒜̃z, z⟩_E
    boundary_terms: np.ndarray  # predicted values from the boundary trace
    norms: np.ndarray

    @property
    def mismatch(self) -> float:
        """max |value - boundary term| / ‖z‖²_E, on the scale of the quotients.

        Relative to the boundary term alone the difference is dominated by
        round-off of the 1/dx⁴ stiffness on samples with a small trace.
        """
        return float(np.max(np.abs(self.values - self.boundary_terms) / self.norms))


def dissipativity_check(gen: DiscreteGenerator, samples: int = 20, seed: int = 0, trace_free: bool = False) -> DissipativityReport:
    """Rayleigh-type quotients of the generator in the energy inner product.

    With ‖z‖²_E = zᵀQz (twice the energy) the quotient is zᵀQ𝒜z / zᵀQz, so
    that ``values`` equals dE/dt* along the flow through z.
    """
    rng = np.random.default_rng(seed)
    A, Q, sys = gen.matrix, gen.gram, gen.sys
    q, vals, bnd, norms = [], [], [], []
    for _ in range(samples):
        z = random_admissible(sys, rng, trace_free)
        nz = float(z @ Q @ z)
        val = float(z @ Q @ (A @ z))
        st = sys.unpack(z)
        q.append(val / nz)
        vals.append(val)
        norms.append(nz)
        bnd.append(boundary_dissipation(sys, st.wdot))
    q = np.asarray(q)
    return DissipativityReport(float(q.max()), q, np.asarray(vals), np.asarray(bnd), np.asarray(norms))
