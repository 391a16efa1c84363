"""Field reconstruction from a matched solution."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .fields import PlaneWave, ReferenceField
from .geometry import Region, build_regions, classify_point, trapezoid

__all__ = [
    "FieldGrid",
    "eval_scattered",
    "eval_total",
    "eval_outgoing_v",
    "sample_grid",
    "geometry_hash",
]


def _as_points(x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    x1, x2 = np.broadcast_arrays(x1, x2)
    return x1, x2


def _region_ids(sol, x1, x2):
    """Region index per point (left region preferred on a shared line if above its ground)."""
    regions = sol.regions
    rights = np.array([r.x_right for r in regions[:-1]])
    ids = np.searchsorted(rights, x1, side="left")
    on_line = np.zeros(x1.shape, dtype=bool)
    if len(rights):
        clipped = np.minimum(ids, len(rights) - 1)
        on_line = (ids < len(rights)) & (rights[clipped] == x1)
    grounds = np.array([r.ground for r in regions])
    move = on_line & (x2 < grounds[ids])
    ids = np.where(move, ids + 1, ids)
    return ids


def _check_domain(sol, x1, x2, ids):
    grounds = np.array([r.ground for r in sol.regions])
    below = x2 < grounds[ids] - 1e-12
    if np.any(below):
        i = np.argmax(below)
        raise ValueError(f"point ({x1.flat[i]}, {x2.flat[i]}) lies inside the substrate")
    if np.any(x2 > sol.pml.top + 1e-12):
        raise ValueError("point lies above the PML termination")


def _scattered_parts(sol, x1, x2, ids, deriv=False):
    out = np.zeros(x1.shape, dtype=complex)
    for r in np.unique(ids):
        mask = ids == r
        basis = sol.bases[r]
        cl, cr = sol.coefficients[r]
        px1, px2 = x1[mask], x2[mask]
        phi = basis.modes.at(px2)
        left, right = basis.propagators(px1)
        root = basis.modes.root[None, :]
        acc = np.zeros(len(px1), dtype=complex)
        if cl is not None:
            f = left * (-1j * root) if deriv else left
            acc += np.sum(phi * f * cl[None, :], axis=1)
        if cr is not None:
            f = right * (1j * root) if deriv else right
            acc += np.sum(phi * f * cr[None, :], axis=1)
        out[mask] = acc
    return out


def eval_scattered(sol, x1, x2):
    """Mode-expansion unknown ``u_tot - W_region`` at the given point(s)."""
    x1, x2 = _as_points(x1, x2)
    ids = _region_ids(sol, x1, x2)
    _check_domain(sol, x1, x2, ids)
    out = _scattered_parts(sol, x1, x2, ids)
    return out if out.ndim else complex(out)


def eval_total(sol, x1, x2):
    """Total field ``u_sc + W_region``; inside the PML the stretched continuation."""
    x1, x2 = _as_points(x1, x2)
    ids = _region_ids(sol, x1, x2)
    _check_domain(sol, x1, x2, ids)
    out = _scattered_parts(sol, x1, x2, ids)
    xs = sol.pml.stretched(x2)
    for r in np.unique(ids):
        mask = ids == r
        out[mask] += sol.refs[r].value(x1[mask], xs[mask])
    return out if out.ndim else complex(out)


def eval_outgoing_v(sol, x1, x2, theta=None, h=None, variant="v", anchor=(0.0, 0.0)):
    """Outgoing remainder ``v`` (or ``v'`` with ``variant="v_prime"``).

    ``v = u_tot - u_L`` in the L sector and ``u_tot - u_R`` elsewhere, where
    ``u_L``/``u_R`` are the flat-ground total fields for grounds ``0`` and ``-h``.
    ``v'`` moves the M sector to the ``u_L`` side.
    """
    inc = sol.inc
    if not isinstance(inc, PlaneWave):
        raise TypeError("the outgoing remainder is defined for plane-wave incidence")
    theta = inc.theta if theta is None else theta
    if h is None:
        h = -min(r.ground for r in sol.regions)
    x1, x2 = _as_points(x1, x2)
    u = np.atleast_1d(eval_total(sol, x1, x2))
    ul = ReferenceField(Region(0, -math.inf, math.inf, 0.0), inc)
    ur = ReferenceField(Region(0, -math.inf, math.inf, -h), inc)
    flat1, flat2 = np.atleast_1d(x1).ravel(), np.atleast_1d(x2).ravel()
    labels = np.array([classify_point((a, b), theta, h, anchor) for a, b in zip(flat1, flat2)])
    use_left = labels == "L" if variant == "v" else labels != "R"
    if variant not in ("v", "v_prime"):
        raise ValueError("variant must be 'v' or 'v_prime'")
    ref = np.where(use_left, ul.value(flat1, flat2), ur.value(flat1, flat2))
    out = u.ravel() - ref
    out = out.reshape(np.shape(x1))
    return out if out.ndim else complex(out)


def geometry_hash(sol) -> str:
    """Short stable digest of surface, inclusions and PML."""
    surf = sol.surface
    text = repr(
        (
            surf.breakpoints if surf else (),
            surf.ground_heights if surf else (),
            tuple(sol.inclusions),
            (sol.pml.L, sol.pml.d, sol.pml.sigma),
        )
    )
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class FieldGrid:
    """Uniform rectangular samples of a complex field.

    ``values`` has shape ``(n2, n1)`` (row-major, x2 slowest) and holds NaN at
    masked points; ``mask`` is True where the point is inside the substrate.
    """

    rect: tuple[float, float, float, float]
    n1: int
    n2: int
    values: np.ndarray
    mask: np.ndarray
    which: str
    meta: dict = field(default_factory=dict)

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(self.rect[0], self.rect[1], self.n1) if self.n1 > 1 else np.array([self.rect[0]])

    @property
    def x2(self) -> np.ndarray:
        return np.linspace(self.rect[2], self.rect[3], self.n2) if self.n2 > 1 else np.array([self.rect[2]])


def sample_grid(sol, rect, n1: int, n2: int, which: str = "total") -> FieldGrid:
    """Sample ``which`` in {"scattered", "total", "v"} on a uniform grid over ``rect``."""
    if which not in ("scattered", "total", "v"):
        raise ValueError(f"unknown field {which!r}")
    x1a, x1b, x2a, x2b = map(float, rect)
    if n1 < 1 or n2 < 1:
        raise ValueError("grid resolution must be positive")
    if x2b > sol.pml.top:
        raise ValueError("sampling rectangle extends above the PML termination")
    g = FieldGrid((x1a, x1b, x2a, x2b), n1, n2, None, None, which)
    X1, X2 = np.meshgrid(g.x1, g.x2)
    ids = _region_ids(sol, X1, X2)
    grounds = np.array([r.ground for r in sol.regions])
    # wall lines belong to Gamma from the lower side; strict inequality masks Gamma itself
    mask = X2 < grounds[ids]
    vals = np.full(X1.shape, np.nan + 0j, dtype=complex)
    ok = ~mask
    if np.any(ok):
        if which == "scattered":
            vals[ok] = eval_scattered(sol, X1[ok], X2[ok])
        elif which == "total":
            vals[ok] = eval_total(sol, X1[ok], X2[ok])
        else:
            vals[ok] = eval_outgoing_v(sol, X1[ok], X2[ok])
    inc = sol.inc
    g.values = vals
    g.mask = mask
    g.meta = {
        "k": inc.k,
        "incidence": _describe(inc),
        "geometry_hash": geometry_hash(sol),
        "pml": {"L": sol.pml.L, "d": sol.pml.d, "sigma": sol.pml.sigma},
    }
    return g


def _describe(inc) -> str:
    if isinstance(inc, PlaneWave):
        return f"plane theta={inc.theta!r}"
    return f"point z=({inc.z[0]!r}, {inc.z[1]!r})"
