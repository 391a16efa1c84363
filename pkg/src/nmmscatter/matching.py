"""Cross-interface matching of per-region mode expansions.

In region ``r`` the unknown ``u_sc = u_tot - W_r`` is expanded as

    u_sc = sum_j c_j phi_j(x2) exp(-i root_j (x1 - x_right))     (left-going)
         + sum_j d_j phi_j(x2) exp(+i root_j (x1 - x_left))      (right-going)

where the semi-infinite end regions keep only the family that decays away
from the structure.  Anchoring each family at the interface it starts from
keeps every propagator bounded by one inside its own region.

On each interface the expansions are matched at every shared collocation node
(value and x1-derivative) and the lower region additionally satisfies the
sound-soft condition on the exposed wall nodes.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .eigensolver import (
    CollocationGrid,
    ModeSet,
    PmlParams,
    assemble_vertical_operator,
    cheb_grid,
    solve_modes,
)
from .fields import PlaneWave, PointSource, ReferenceField, green_field
from .geometry import Inclusion, Region, SteppedSurface, build_regions

__all__ = [
    "ModeBasis",
    "ModalGreenReference",
    "MatchedSolution",
    "SingularSystemError",
    "allocate_nodes",
    "build_bases",
    "assemble_matching_system",
    "solve_coefficients",
    "solve",
]

log = logging.getLogger(__name__)

# a solve is rejected when refinement cannot push the residual below this
RESIDUAL_LIMIT = 1e-6


class SingularSystemError(RuntimeError):
    """The matching system is numerically singular."""

    def __init__(self, msg, cond):
        super().__init__(f"{msg} (condition estimate {cond:.3e})")
        self.cond = cond


@dataclass
class ModeBasis:
    """Eigenmodes of one region together with the propagation directions used."""

    region: Region
    modes: ModeSet
    left_going: bool
    right_going: bool

    @property
    def n_modes(self) -> int:
        return self.modes.n_modes

    @property
    def n_unknowns(self) -> int:
        return self.n_modes * (int(self.left_going) + int(self.right_going))

    def propagators(self, x1):
        """``(left, right)`` propagators at ``x1``, shape ``(len(x1), n_modes)``; absent families are None."""
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))[:, None]
        root = self.modes.root[None, :]
        left = right = None
        if self.left_going:
            left = np.exp(-1j * root * (x1 - self.region.x_right))
        if self.right_going:
            right = np.exp(1j * root * (x1 - self.region.x_left))
        return left, right


class ModalGreenReference:
    """Point-source field of a layered region expanded in the region's own modes.

    Used where the closed-form image construction does not apply (a point
    source inside a horizontally layered region).  The series converges
    exponentially in ``|x1 - z1|`` and slowly on the source's vertical line.
    """

    def __init__(self, region: Region, modes: ModeSet, inc: PointSource):
        self.region = region
        self.inc = inc
        self.ground = region.ground
        self.modes = modes
        z1, z2 = inc.z
        norms = modes.quadrature_norms()
        phi_z = modes.at([z2])[0]
        self._amp = 0.5j * phi_z / (norms * modes.root)

    @property
    def top(self) -> float:
        return self.region.layer_top

    def _series(self, x1, x2, deriv):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.real(np.asarray(x2))
        x1, x2 = np.broadcast_arrays(x1, x2)
        shape = x1.shape
        x1 = x1.ravel()
        dist = x1 - self.inc.z[0]
        phi = self.modes.at(x2.ravel())
        prop = np.exp(1j * self.modes.root[None, :] * np.abs(dist)[:, None])
        if deriv:
            prop = prop * (1j * self.modes.root[None, :] * np.sign(dist)[:, None])
        return np.sum(phi * prop * self._amp[None, :], axis=1).reshape(shape)

    def value(self, x1, x2):
        return self._series(x1, x2, False)

    def dx1(self, x1, x2):
        return self._series(x1, x2, True)

    def reflected(self, x1, x2):
        return self.value(x1, x2) - green_field(self.inc.k, x1, x2, self.inc.z)[0]

    def reflected_dx1(self, x1, x2):
        return self.dx1(x1, x2) - green_field(self.inc.k, x1, x2, self.inc.z)[1]


def _largest_remainder(total, weights, floors):
    weights = np.asarray(weights, dtype=float)
    floors = np.asarray(floors, dtype=int)
    free = total - floors.sum()
    if free < 0:
        raise ValueError(f"{total} unknowns cannot cover the minimum of {floors.sum()}")
    raw = free * weights / weights.sum()
    base = np.floor(raw).astype(int)
    rem = free - base.sum()
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:rem]] += 1
    return floors + base


def allocate_nodes(
    regions: Sequence[Region],
    pml: PmlParams,
    n_modes: int,
    m_extra: int,
    pml_min: int = 16,
    min_interior: int = 2,
    max_len: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Shared x2 breakpoints and node counts per subdomain.

    ``n_modes`` interior unknowns are spread over ``[max ground, L + d]``
    (the PML subdomain receives at least ``pml_min``) and ``m_extra`` over
    ``[min ground, max ground]``, proportionally to subdomain length.
    """
    grounds = [r.ground for r in regions]
    g_hi, g_lo = max(grounds), min(grounds)
    hs = set(grounds) | {pml.L, pml.top}
    for r in regions:
        hs.update(r.interfaces())
    bp = np.array(sorted(h for h in hs if g_lo <= h <= pml.top))
    if max_len:
        pieces = [bp[:1]]
        for a, b in zip(bp[:-1], bp[1:]):
            m = max(1, int(math.ceil((b - a) / max_len - 1e-9)))
            pieces.append(np.linspace(a, b, m + 1)[1:])
        bp = np.concatenate(pieces)
    lengths = np.diff(bp)
    upper = bp[:-1] >= g_hi
    counts = np.zeros(len(lengths), dtype=int)
    in_pml = bp[:-1][upper] >= pml.L
    floors_up = np.where(in_pml, max(pml_min // max(np.count_nonzero(in_pml), 1), min_interior), min_interior)
    counts[upper] = _largest_remainder(n_modes, lengths[upper], floors_up)
    if np.any(~upper):
        if m_extra <= 0:
            raise ValueError("stepped surfaces need m_extra > 0 wall unknowns")
        counts[~upper] = _largest_remainder(
            m_extra, lengths[~upper], np.full(np.count_nonzero(~upper), min_interior)
        )
    return bp, counts + 2


def _region_grid(region, bp, nodes_per_sub) -> CollocationGrid:
    keep = bp[:-1] >= region.ground - 1e-12
    sub_bp = np.concatenate([bp[:-1][keep], bp[-1:]])
    return cheb_grid(list(nodes_per_sub[keep]), sub_bp)


def build_bases(regions, pml, inc, n_modes, m_extra, pml_min=16, max_len=None):
    """Eigenmodes of every region on a nested grid."""
    bp, counts = allocate_nodes(regions, pml, n_modes, m_extra, pml_min, max_len=max_len)
    if isinstance(inc, PlaneWave):
        top_bc, beta0 = "robin", inc.beta
    else:
        top_bc, beta0 = "dirichlet", None
    k = inc.k
    bases = []
    last = len(regions) - 1
    for r in regions:
        grid = _region_grid(r, bp, counts)
        op = assemble_vertical_operator(r, grid, pml, k, top_bc, beta0)
        modes = solve_modes(op)
        bases.append(ModeBasis(r, modes, left_going=r.index < last, right_going=r.index > 0))
    return bases


def reference_fields(bases: Sequence[ModeBasis], inc):
    """Reference field of every region."""
    refs = []
    for b in bases:
        r = b.region
        if (
            isinstance(inc, PointSource)
            and not r.is_homogeneous
            and r.x_left < inc.z[0] < r.x_right
        ):
            refs.append(ModalGreenReference(r, b.modes, inc))
        else:
            refs.append(ReferenceField(r, inc))
    return refs


def _offsets(bases):
    offs, n = [], 0
    for b in bases:
        left = n if b.left_going else None
        n += b.n_modes if b.left_going else 0
        right = n if b.right_going else None
        n += b.n_modes if b.right_going else 0
        offs.append((left, right))
    return offs, n


def _jumps(wa, wb, b, x2, pml):
    """``W_b - W_a`` and its x1-derivative at real heights ``x2`` (stretched inside the PML)."""
    xs = pml.stretched(x2)
    top = max(wa.top, wb.top)
    hi = x2 >= top
    du = np.empty(len(x2), dtype=complex)
    ddu = np.empty(len(x2), dtype=complex)
    if np.any(hi):
        du[hi] = wb.reflected(b, xs[hi]) - wa.reflected(b, xs[hi])
        ddu[hi] = wb.reflected_dx1(b, xs[hi]) - wa.reflected_dx1(b, xs[hi])
    lo = ~hi
    if np.any(lo):
        du[lo] = wb.value(b, xs[lo]) - wa.value(b, xs[lo])
        ddu[lo] = wb.dx1(b, xs[lo]) - wa.dx1(b, xs[lo])
    return du, ddu


def assemble_matching_system(bases: Sequence[ModeBasis], refs, inc):
    """Dense matching matrix and right-hand side.

    Row blocks per interface: value continuity and ``(1/k)``-scaled
    derivative continuity at shared nodes, then sound-soft rows on the
    exposed part of the wall.
    """
    offs, n_unknowns = _offsets(bases)
    k = inc.k
    pml = bases[0].modes.pml
    rows, rhs = [], []
    for i in range(len(bases) - 1):
        A, B = bases[i], bases[i + 1]
        b = A.region.x_right
        if b != B.region.x_left:
            raise ValueError("regions are not adjacent")
        g_hi = max(A.region.ground, B.region.ground)
        ga, gb = A.modes.grid, B.modes.grid
        ia = ga.interior[ga.nodes[ga.interior] > g_hi + 1e-12]
        ib = gb.interior[gb.nodes[gb.interior] > g_hi + 1e-12]
        if len(ia) != len(ib) or not np.allclose(ga.nodes[ia], gb.nodes[ib], rtol=0, atol=1e-12):
            raise ValueError(f"non-nested grids at interface x1={b}")
        x2 = ga.nodes[ia]
        du, ddu = _jumps(refs[i], refs[i + 1], b, x2, pml)

        blk_v = np.zeros((len(x2), n_unknowns), dtype=complex)
        blk_d = np.zeros((len(x2), n_unknowns), dtype=complex)
        for basis, idx, off, sign in ((A, ia, offs[i], 1.0), (B, ib, offs[i + 1], -1.0)):
            phi = basis.modes.phi[idx]
            left, right = basis.propagators(b)
            root = basis.modes.root
            if left is not None:
                sl = slice(off[0], off[0] + basis.n_modes)
                blk_v[:, sl] = sign * phi * left
                blk_d[:, sl] = sign * phi * (left * (-1j * root)) / k
            if right is not None:
                sl = slice(off[1], off[1] + basis.n_modes)
                blk_v[:, sl] = sign * phi * right
                blk_d[:, sl] = sign * phi * (right * (1j * root)) / k
        rows += [blk_v, blk_d]
        rhs += [du, ddu / k]

        # sound-soft wall on the lower side
        if A.region.ground != B.region.ground:
            low, w, off = (A, refs[i], offs[i]) if A.region.ground < B.region.ground else (B, refs[i + 1], offs[i + 1])
            gl = low.modes.grid
            iw = gl.interior[gl.nodes[gl.interior] < g_hi - 1e-12]
            xw = gl.nodes[iw]
            blk = np.zeros((len(xw), n_unknowns), dtype=complex)
            phi = low.modes.phi[iw]
            left, right = low.propagators(b)
            if left is not None:
                blk[:, off[0]:off[0] + low.n_modes] = phi * left
            if right is not None:
                blk[:, off[1]:off[1] + low.n_modes] = phi * right
            rows.append(blk)
            rhs.append(-w.value(b, xw))

    if not rows:
        return np.zeros((0, 0), dtype=complex), np.zeros(0, dtype=complex)
    M = np.vstack(rows)
    f = np.concatenate(rhs)
    if M.shape[0] != n_unknowns:
        raise ValueError(f"{M.shape[0]} matching rows for {n_unknowns} unknowns")
    return M, f


@dataclass
class MatchedSolution:
    """Solved expansion coefficients plus everything needed to evaluate fields."""

    bases: list
    refs: list
    coefficients: list  # per region: (left or None, right or None)
    inc: object
    pml: PmlParams
    surface: SteppedSurface | None = None
    inclusions: tuple = ()
    size: int = 0
    residual: float = 0.0
    cond: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def regions(self) -> list:
        return [b.region for b in self.bases]


def solve_coefficients(matrix, rhs, refine: int = 2):
    """Dense LU solve with iterative refinement.

    Returns ``(x, relative residual, condition estimate)``.
    """
    n = matrix.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex), 0.0, 1.0
    lu, piv = la.lu_factor(matrix, check_finite=True)
    anorm = np.linalg.norm(matrix, 1)
    (gecon,) = la.get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    cond = math.inf if rcond == 0 else 1.0 / rcond
    if rcond == 0 or np.any(np.diag(lu) == 0):
        raise SingularSystemError("matching system is singular", cond)
    if cond * np.finfo(float).eps > 1e-2:
        # the PML eigenbasis is nearly dependent for moderate sigma; the
        # dependent combinations are tiny below the PML, so LU is still usable
        log.warning("matching system condition estimate %.1e", cond)
    x = la.lu_solve((lu, piv), rhs)
    bnorm = np.linalg.norm(rhs)
    scale = bnorm if bnorm > 0 else 1.0
    # the coefficients cancel heavily, so residuals are formed in extended precision
    a_ext = matrix.astype(np.clongdouble)
    b_ext = rhs.astype(np.clongdouble)
    best, best_rel = x, math.inf
    for _ in range(refine + 1):
        r = b_ext - a_ext @ x.astype(np.clongdouble)
        rel = float(np.sqrt(np.sum(np.abs(r) ** 2))) / scale
        if rel < best_rel:
            best, best_rel = x, rel
        else:
            break
        x = x + la.lu_solve((lu, piv), r.astype(complex))
    if not (np.all(np.isfinite(best)) and best_rel <= RESIDUAL_LIMIT):
        raise SingularSystemError(f"matching solve failed (relative residual {best_rel:.1e})", cond)
    return best, best_rel, float(cond)


def solve(
    surface: SteppedSurface,
    inc,
    pml: PmlParams,
    n_modes: int,
    m_extra: int = 0,
    inclusions: Sequence[Inclusion] = (),
    pml_min: int = 16,
    max_len: float | None = None,
) -> MatchedSolution:
    """Full pipeline: regions, eigenmodes, matching system, coefficients."""
    regions = build_regions(surface, inclusions)
    if isinstance(inc, PointSource):
        if not surface.is_above(inc.z):
            raise ValueError("point source must lie above the surface")
        if inc.z[1] >= pml.L:
            raise ValueError("point source must lie below the PML")
        if inc.z[0] in [r.x_right for r in regions[:-1]]:
            raise ValueError("point source on a region interface is not supported")
    bases = build_bases(regions, pml, inc, n_modes, m_extra, pml_min, max_len)
    refs = reference_fields(bases, inc)
    M, f = assemble_matching_system(bases, refs, inc)
    x, rel, cond = solve_coefficients(M, f)
    offs, _ = _offsets(bases)
    coefs = []
    for b, (lo, ro) in zip(bases, offs):
        cl = x[lo:lo + b.n_modes] if lo is not None else None
        cr = x[ro:ro + b.n_modes] if ro is not None else None
        coefs.append((cl, cr))
    log.info("matched %d unknowns: residual %.2e, cond %.2e", len(x), rel, cond)
    return MatchedSolution(
        bases, refs, coefs, inc, pml, surface, tuple(inclusions), len(x), rel, cond
    )
