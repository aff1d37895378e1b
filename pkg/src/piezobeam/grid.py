"""Uniform grid with one ghost node per end, and second-order stencils.

Grid functions that include ghosts are stored with an offset of one, so
``values[i + 1]`` holds z_i for i = -1, ..., N+1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, ResolutionTooSmall

MIN_RESOLUTION = 8

# kind -> (offsets, integer weights, denominator factor, derivative order);
# stencil value = sum(w * z[i + off]) / (factor * dx**order)
STENCILS = {
    "d1_central": ((-1, 1), (-1.0, 1.0), 2.0, 1),
    "d1_backward3": ((-2, -1, 0), (1.0, -4.0, 3.0), 2.0, 1),
    "d2": ((-1, 0, 1), (1.0, -2.0, 1.0), 1.0, 2),
    "d3": ((-2, -1, 1, 2), (-1.0, 2.0, -2.0, 1.0), 2.0, 3),
    "d4": ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0), 1.0, 4),
}

# Third derivative at the tip from nodes N+1, N, ..., N-3 (denominator 2 dx^3).
TIP_D3_CONSISTENT = ((1, 0, -1, -2, -3), (3.0, -10.0, 12.0, -6.0, 1.0))
# As printed in the source scheme; the weights do not sum to zero.
TIP_D3_PRINTED = ((1, 0, -1, -2, -3), (2.0, -5.0, 2.0, 4.0, -4.0))


@dataclass(frozen=True)
class Grid:
    N: int
    L: float

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def nodes(self) -> np.ndarray:
        """Physical nodes x_0, ..., x_N."""
        return np.arange(self.N + 1) * self.dx

    @property
    def nodes_with_ghosts(self) -> np.ndarray:
        return np.arange(-1, self.N + 2) * self.dx

    @property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights on x_0, ..., x_N."""
        w = np.full(self.N + 1, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def inner(self, u, v) -> float:
        """Discrete L² inner product with trapezoid weights."""
        return float(np.sum(self.weights * np.asarray(u) * np.asarray(v)))

    def norm(self, u) -> float:
        return float(np.sqrt(self.inner(u, u)))


def build_grid(N: int, L: float = 1.0) -> Grid:
    if int(N) != N or N < MIN_RESOLUTION:
        raise ResolutionTooSmall(f"ResolutionTooSmall: N={N} < {MIN_RESOLUTION}")
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    return Grid(int(N), float(L))


def apply_stencil(kind: str, values, i: int, dx: float) -> float:
    """Evaluate stencil ``kind`` at node ``i`` of a ghost-padded grid function."""
    try:
        offsets, weights, factor, order = STENCILS[kind]
    except KeyError:
        raise ValueError(f"unknown stencil {kind!r}") from None
    values = np.asarray(values)
    idx = [i + o + 1 for o in offsets]
    if min(idx) < 0 or max(idx) >= values.size:
        raise IndexOutOfRange(f"stencil {kind} at node {i} leaves the padded grid")
    total = sum(w * values[j] for w, j in zip(weights, idx))
    return total / (factor * dx**order)


def stencil_rows(kind: str, rows, n_padded: int, dx: float) -> np.ndarray:
    """Dense matrix mapping a ghost-padded vector to the stencil values at ``rows``."""
    offsets, weights, factor, order = STENCILS[kind]
    rows = list(rows)
    out = np.zeros((len(rows), n_padded))
    scale = 1.0 / (factor * dx**order)
    for r, i in enumerate(rows):
        for o, w in zip(offsets, weights):
            j = i + o + 1
            if j < 0 or j >= n_padded:
                raise IndexOutOfRange(f"stencil {kind} at node {i} leaves the padded grid")
            out[r, j] += w * scale
    return out


def apply_interior(kind: str, values, lo: int, hi: int, dx: float) -> np.ndarray:
    """Vectorized stencil at nodes lo..hi (inclusive) of a ghost-padded array."""
    offsets, weights, factor, order = STENCILS[kind]
    values = np.asarray(values)
    if lo + min(offsets) + 1 < 0 or hi + max(offsets) + 1 >= values.size:
        raise IndexOutOfRange(f"stencil {kind} on nodes {lo}..{hi} leaves the padded grid")
    out = np.zeros(hi - lo + 1, dtype=values.dtype if values.dtype.kind == "c" else float)
    for o, w in zip(offsets, weights):
        out += w * values[lo + o + 1 : hi + o + 2]
    return out / (factor * dx**order)


def slope(w_nodes, dx: float) -> np.ndarray:
    """w_x on x_0..x_N of a clamped function given on physical nodes.

    Node 0 uses the mirror ghost (so the slope there is zero), interior nodes
    the central difference and node N the three-point backward difference.
    """
    w = np.asarray(w_nodes)
    s = np.zeros_like(w, dtype=w.dtype if w.dtype.kind == "c" else float)
    s[1:-1] = (w[2:] - w[:-2]) / (2 * dx)
    s[-1] = (3 * w[-1] - 4 * w[-2] + w[-3]) / (2 * dx)
    return s


def slope_adjoint(g, dx: float) -> np.ndarray:
    """Transpose of :func:`slope` restricted to unknowns w_1..w_N (w_0 = 0)."""
    g = np.asarray(g)
    n = g.size - 1
    out = np.zeros(n + 1, dtype=g.dtype if g.dtype.kind == "c" else float)
    # central rows i = 1..N-1: +g_i/(2dx) on w_{i+1}, -g_i/(2dx) on w_{i-1}
    out[2:] += g[1:-1] / (2 * dx)
    out[:-2] -= g[1:-1] / (2 * dx)
    out[n] += 3 * g[n] / (2 * dx)
    out[n - 1] -= 4 * g[n] / (2 * dx)
    out[n - 2] += g[n] / (2 * dx)
    return out[1:]


def slope_matrix(N: int, dx: float) -> np.ndarray:
    """Dense (N+1) x N matrix of :func:`slope` acting on w_1..w_N."""
    G = np.zeros((N + 1, N))
    for i in range(1, N):
        if i + 1 <= N:
            G[i, i] += 1 / (2 * dx)  # column of w_{i+1} is index i
        if i - 1 >= 1:
            G[i, i - 2] -= 1 / (2 * dx)
    G[N, N - 1] += 3 / (2 * dx)
    G[N, N - 2] -= 4 / (2 * dx)
    G[N, N - 3] += 1 / (2 * dx)
    return G


def curvature(w_nodes, dx: float) -> np.ndarray:
    """w_xx on x_0..x_{N-1} of a clamped function (ghost w_{-1} = w_1)."""
    w = np.asarray(w_nodes)
    c = np.empty(w.size - 1, dtype=w.dtype if w.dtype.kind == "c" else float)
    c[0] = (2 * w[1] - 2 * w[0]) / dx**2
    c[1:] = (w[2:] - 2 * w[1:-1] + w[:-2]) / dx**2
    return c


def curvature_adjoint(c, dx: float) -> np.ndarray:
    """Transpose of :func:`curvature` restricted to unknowns w_1..w_N."""
    c = np.asarray(c)
    n = c.size  # = N
    out = np.zeros(n + 1, dtype=c.dtype if c.dtype.kind == "c" else float)
    out[1] += 2 * c[0] / dx**2
    out[2:] += c[1:] / dx**2
    out[1:-1] -= 2 * c[1:] / dx**2
    out[:-2] += c[1:] / dx**2
    return out[1:]


def curvature_matrix(N: int, dx: float) -> np.ndarray:
    """Dense N x N matrix of :func:`curvature` acting on w_1..w_N."""
    D = np.zeros((N, N))
    D[0, 0] = 2 / dx**2
    for i in range(1, N):
        D[i, i - 1] -= 2 / dx**2
        D[i, i] += 1 / dx**2
        if i - 2 >= 0:
            D[i, i - 2] += 1 / dx**2
    return D
