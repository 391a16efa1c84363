"""Vertical eigenproblems on a multidomain Chebyshev grid with a PML.

In each x-uniform region the scattered field is expanded in eigenfunctions of

    (1/s) d/dx2 ( (1/s) dphi/dx2 ) + k^2 n(x2)^2 phi = mu phi,   s = 1 + i sigma2(x2),

on ``[g, L + d]`` with ``phi(g) = 0`` and either the Robin termination
``phi' - i s beta0 phi = 0`` (plane waves) or ``phi = 0`` (point sources) at the
top.  Subdomain boundaries sit at every index jump and at the PML entrance;
continuity of ``phi`` and ``phi'/s`` is imposed there and the boundary values are
eliminated, leaving a standard dense eigenproblem on interior nodes.
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .geometry import Region

__all__ = [
    "PmlParams",
    "CollocationGrid",
    "VerticalOperator",
    "ModeSet",
    "cheb_grid",
    "cheb_diff",
    "barycentric_matrix",
    "assemble_vertical_operator",
    "solve_modes",
    "sqrt_branch",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PmlParams:
    """Linear absorbing profile ``sigma2(t) = sigma (t - L) / d`` on ``[L, L + d]``."""

    L: float
    d: float
    sigma: float

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("PML thickness must be positive")
        if self.sigma < 0:
            raise ValueError("PML strength must be non-negative")

    @property
    def top(self) -> float:
        return self.L + self.d

    def sigma2(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > self.L, (t - self.L) * self.sigma / self.d, 0.0)

    def stretch(self, t):
        """``1 + i sigma2(t)``."""
        return 1.0 + 1j * self.sigma2(t)

    def stretched(self, t):
        """Complex coordinate ``t + i * int_0^t sigma2``."""
        t = np.asarray(t, dtype=float)
        excess = np.clip(t - self.L, 0.0, None)
        return t + 0.5j * self.sigma * excess**2 / self.d


def cheb_diff(n: int):
    """Chebyshev-Gauss-Lobatto nodes on [-1, 1] (ascending) and the differentiation matrix."""
    if n < 2:
        raise ValueError("need at least two nodes")
    m = n - 1
    j = np.arange(n)
    x = -np.cos(np.pi * j / m)
    c = np.where((j == 0) | (j == m), 2.0, 1.0) * (-1.0) ** j
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    return x, D


def _cgl_bary_weights(n: int):
    w = (-1.0) ** np.arange(n)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _clenshaw_curtis(n: int):
    """Clenshaw-Curtis weights for ascending CGL nodes on [-1, 1]."""
    m = n - 1
    theta = np.pi * np.arange(n) / m
    w = np.zeros(n)
    v = np.ones(n - 2)
    if m % 2 == 0:
        w[0] = w[-1] = 1.0 / (m * m - 1)
        for kk in range(1, m // 2):
            v -= 2.0 * np.cos(2 * kk * theta[1:-1]) / (4 * kk * kk - 1)
        v -= np.cos(m * theta[1:-1]) / (m * m - 1)
    else:
        w[0] = w[-1] = 1.0 / (m * m)
        for kk in range(1, (m - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * kk * theta[1:-1]) / (4 * kk * kk - 1)
    w[1:-1] = 2.0 * v / m
    return w[::-1]


def barycentric_matrix(nodes, weights, x):
    """Matrix mapping nodal values to interpolated values at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    diff = x[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    tmp = weights[None, :] / diff
    P = tmp / tmp.sum(axis=1, keepdims=True)
    rows = np.any(exact, axis=1)
    if np.any(rows):
        P[rows] = exact[rows].astype(float)
    return P


@dataclass
class CollocationGrid:
    """Multidomain Chebyshev grid in x2.

    ``nodes`` lists distinct nodes in ascending order; ``sub_index[s]`` maps the
    local nodes of subdomain ``s`` to positions in ``nodes``.  ``interior`` are
    the positions carrying eigen-unknowns (every node except the grid ends and
    the shared subdomain endpoints).
    """

    breakpoints: np.ndarray
    sub_nodes: list
    sub_D: list
    sub_weights: list
    sub_quad: list
    sub_index: list
    nodes: np.ndarray
    interior: np.ndarray

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    def subdomain_of(self, x2) -> np.ndarray:
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        s = np.searchsorted(self.breakpoints, x2, side="right") - 1
        return np.clip(s, 0, len(self.sub_nodes) - 1)

    def interp_matrix(self, x2) -> np.ndarray:
        """Barycentric interpolation from all nodal values to heights ``x2``."""
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        P = np.zeros((len(x2), len(self.nodes)))
        subs = self.subdomain_of(x2)
        for s in np.unique(subs):
            rows = np.nonzero(subs == s)[0]
            P[np.ix_(rows, self.sub_index[s])] = barycentric_matrix(
                self.sub_nodes[s], self.sub_weights[s], x2[rows]
            )
        return P


def cheb_grid(n_per_subdomain: Sequence[int], breakpoints: Sequence[float]) -> CollocationGrid:
    """Chebyshev-Gauss-Lobatto grid with ``n_per_subdomain[s]`` nodes on each subdomain."""
    bp = np.asarray(breakpoints, dtype=float)
    if len(n_per_subdomain) != len(bp) - 1:
        raise ValueError("need one node count per subdomain")
    if np.any(np.diff(bp) <= 0):
        raise ValueError("subdomain breakpoints must be strictly increasing")
    sub_nodes, sub_D, sub_w, sub_q, sub_index = [], [], [], [], []
    nodes = [bp[0]]
    interior = []
    for s, n in enumerate(n_per_subdomain):
        if n < 3:
            raise ValueError("each subdomain needs at least three nodes")
        a, b = bp[s], bp[s + 1]
        xi, D = cheb_diff(n)
        half = 0.5 * (b - a)
        x = a + half * (xi + 1.0)
        x[0], x[-1] = a, b
        start = len(nodes) - 1
        sub_index.append(np.arange(start, start + n))
        interior.extend(range(start + 1, start + n - 1))
        nodes.extend(x[1:])
        sub_nodes.append(x)
        sub_D.append(D / half)
        sub_w.append(_cgl_bary_weights(n))
        sub_q.append(_clenshaw_curtis(n) * half)
    return CollocationGrid(
        bp, sub_nodes, sub_D, sub_w, sub_q, sub_index, np.asarray(nodes), np.asarray(interior)
    )


@dataclass
class VerticalOperator:
    """Reduced eigen-operator of one region.

    ``matrix`` acts on interior nodal values; ``extend`` maps interior values to
    all nodal values (boundary and subdomain-endpoint values reconstructed from
    the constraint rows).
    """

    matrix: np.ndarray
    extend: np.ndarray
    grid: CollocationGrid
    pml: PmlParams
    k: float
    top_bc: str
    beta0: float | None


def _region_breakpoints(region: Region, pml: PmlParams, extra=()):
    hs = {region.ground, pml.L, pml.top}
    hs.update(h for h in region.interfaces() if region.ground < h < pml.top)
    hs.update(h for h in extra if region.ground < h < pml.top)
    if region.layer_top > pml.L:
        raise ValueError("inclusions must lie below the PML entrance")
    if region.ground >= pml.L:
        raise ValueError("PML entrance must lie above the ground")
    return sorted(hs)


def assemble_vertical_operator(
    region: Region,
    grid: CollocationGrid,
    pml: PmlParams,
    k: float,
    top_bc: str = "robin",
    beta0: float | None = None,
) -> VerticalOperator:
    """Assemble the reduced operator for ``region`` on ``grid``.

    ``top_bc`` is ``"robin"`` (requires ``beta0 = k sin(theta)``) or ``"dirichlet"``.
    """
    if top_bc not in ("robin", "dirichlet"):
        raise ValueError(f"unknown top boundary condition {top_bc!r}")
    if top_bc == "robin" and beta0 is None:
        raise ValueError("Robin termination needs beta0")
    bp = grid.breakpoints
    if not (math.isclose(bp[0], region.ground, abs_tol=1e-12) and math.isclose(bp[-1], pml.top)):
        raise ValueError("grid does not span the region's [ground, L + d]")
    # with sigma == 0 the profile is smooth at L and no breakpoint is needed there
    jumps = region.interfaces() + ([pml.L] if pml.sigma > 0 else [])
    for h in jumps:
        if h < pml.top and not np.any(np.isclose(bp, h, atol=1e-12)):
            raise ValueError(f"missing subdomain boundary at index/PML jump x2={h}")

    nn = len(grid.nodes)
    full = np.zeros((nn, nn), dtype=complex)
    constraint_rows = []
    nsub = len(grid.sub_nodes)
    for s in range(nsub):
        x = grid.sub_nodes[s]
        idx = grid.sub_index[s]
        D = grid.sub_D[s]
        inv_s = 1.0 / pml.stretch(x)
        mid = 0.5 * (x[0] + x[-1])
        n = float(region.index_at(mid))
        loc = (inv_s[:, None] * D) @ (inv_s[:, None] * D) + (k * n) ** 2 * np.eye(len(x))
        full[np.ix_(idx[1:-1], idx)] = loc[1:-1]

    # bottom Dirichlet
    row = np.zeros(nn, dtype=complex)
    row[0] = 1.0
    constraint_rows.append(row)
    # flux continuity at shared subdomain endpoints
    for s in range(nsub - 1):
        row = np.zeros(nn, dtype=complex)
        xa = grid.sub_nodes[s][-1]
        sa = complex(pml.stretch(xa))
        row[grid.sub_index[s]] += grid.sub_D[s][-1] / sa
        row[grid.sub_index[s + 1]] -= grid.sub_D[s + 1][0] / sa
        constraint_rows.append(row)
    # top termination
    row = np.zeros(nn, dtype=complex)
    if top_bc == "dirichlet":
        row[-1] = 1.0
    else:
        s_top = complex(pml.stretch(pml.top))
        row[grid.sub_index[-1]] = grid.sub_D[-1][-1]
        row[-1] -= 1j * s_top * beta0
    constraint_rows.append(row)

    C = np.array(constraint_rows)
    interior = grid.interior
    bnd = np.setdiff1d(np.arange(nn), interior)
    Cb = C[:, bnd]
    Ci = C[:, interior]
    Eb = -la.solve(Cb, Ci)
    extend = np.zeros((nn, len(interior)), dtype=complex)
    extend[interior] = np.eye(len(interior))
    extend[bnd] = Eb
    A = full[np.ix_(interior, interior)] + full[np.ix_(interior, bnd)] @ Eb
    return VerticalOperator(A, extend, grid, pml, k, top_bc, beta0)


def sqrt_branch(mu):
    """Square root with non-negative imaginary part.

    For ``Im mu >= 0`` this is the principal root (so the real part is also
    non-negative); for ``Im mu < 0`` decay in ``|x1|`` takes priority and the
    root with ``Im >= 0`` is returned.
    """
    r = np.sqrt(np.asarray(mu, dtype=complex))
    r = np.where(r.imag < 0, -r, r)
    return complex(r) if r.ndim == 0 else r


@dataclass
class ModeSet:
    """Eigenpairs of one region, sorted by descending ``Re mu``.

    ``phi`` holds normalised nodal values on every grid node (columns are
    modes); ``root`` is the branch-selected square root of ``mu``.
    """

    mu: np.ndarray
    root: np.ndarray
    phi: np.ndarray
    grid: CollocationGrid
    pml: PmlParams
    residual: float

    @property
    def n_modes(self) -> int:
        return len(self.mu)

    def at(self, x2) -> np.ndarray:
        """Mode values at heights ``x2`` (rows) for every mode (columns)."""
        return self.grid.interp_matrix(x2) @ self.phi

    def quadrature_norms(self) -> np.ndarray:
        """``int phi_j^2 s dx2`` (unconjugated), the weight making the operator symmetric."""
        out = np.zeros(self.n_modes, dtype=complex)
        for s, idx in enumerate(self.grid.sub_index):
            w = self.grid.sub_quad[s] * self.pml.stretch(self.grid.sub_nodes[s])
            out += w @ (self.phi[idx] ** 2)
        return out


def solve_modes(op: VerticalOperator, check_passivity: bool = True) -> ModeSet:
    """All eigenpairs of the reduced operator."""
    A = op.matrix
    if A.shape[0] != A.shape[1] or not np.all(np.isfinite(A)):
        raise ValueError("operator must be a finite square matrix")
    try:
        mu, V = la.eig(A)
    except la.LinAlgError as exc:
        cond = np.linalg.cond(A)
        raise RuntimeError(f"eigensolver failed (condition estimate {cond:.3e})") from exc
    order = np.lexsort((-mu.imag, -mu.real))
    mu = mu[order]
    V = V[:, order]
    resid = np.max(np.abs(A @ V - V * mu[None, :])) / max(np.max(np.abs(A)), 1.0)
    phi = op.extend @ V
    imax = np.argmax(np.abs(phi), axis=0)
    peak = phi[imax, np.arange(phi.shape[1])]
    scale = np.conj(peak) / np.abs(peak) ** 2
    phi = phi * scale[None, :]
    if check_passivity:
        tol = 1e-8 * np.max(np.abs(mu))
        bad = np.count_nonzero(mu.imag < -tol)
        if bad:
            log.warning("%d eigenvalues with Im(mu) < -%.2e", bad, tol)
    return ModeSet(mu, sqrt_branch(mu), phi, op.grid, op.pml, float(resid))
