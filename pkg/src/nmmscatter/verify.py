"""Numerical diagnostics for solved fields and for the analytic side conditions.

Everything here reads solutions and never mutates them.  Diagnostics that
sample the physical field stay in the strip below the PML, where the
unstretched field is available.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.signal.windows import tukey

from .eigensolver import PmlParams, sqrt_branch
from .evaluate import eval_outgoing_v, eval_total
from .fields import PlaneWave, PointSource, hankel1
from .geometry import SteppedSurface
from .matching import solve

__all__ = [
    "ArcIntegralReport",
    "AppendixIntegralReport",
    "relative_error",
    "radiation_arc_integrals",
    "w_arc_integrals",
    "asr_check",
    "asr_propagate",
    "appendix_integrals",
    "distance_to_surface",
    "f_limit_check",
    "reciprocity_check",
    "surface_probes",
    "surface_residual",
    "jump_check",
    "helmholtz_fd_residual",
]

FD_STEP = 1e-4


def _sampler(obj) -> Callable:
    """Callable ``(x1, x2) -> field`` from a solution, a callable or a constant."""
    if hasattr(obj, "bases"):
        return lambda x1, x2: eval_total(obj, x1, x2)
    if callable(obj):
        return obj
    raise TypeError(f"cannot sample {obj!r}")


def relative_error(ref, num, S) -> float:
    """``max_S |ref - num| / max_S |ref|``.

    ``ref`` and ``num`` are solutions or callables ``(x1, x2) -> complex``;
    ``S`` is an ``(n, 2)`` array of points.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    a = np.atleast_1d(_sampler(ref)(S[:, 0], S[:, 1]))
    b = np.atleast_1d(_sampler(num)(S[:, 0], S[:, 1]))
    scale = np.max(np.abs(a))
    if not scale > 0:
        raise ValueError("reference field vanishes on the probe set")
    return float(np.max(np.abs(a - b)) / scale)


# ----------------------------------------------------------------------------
# radiation arcs


@dataclass
class ArcIntegralReport:
    """Per-radius arc integrals of ``|d_r v - ikv|^2`` and ``|v|^2``."""

    radii: np.ndarray
    rc: np.ndarray
    mass: np.ndarray
    arcs: list = field(default_factory=list)  # angular pieces used per radius


def _gauss_pieces(pieces, r, per_wavelength=24):
    """Gauss-Legendre nodes/weights in angle over the given pieces of ``S_r``."""
    ang, wts = [], []
    for a, b in pieces:
        length = r * (b - a)
        m = max(1, int(math.ceil(length)))
        n = per_wavelength
        x, w = np.polynomial.legendre.leggauss(n)
        edges = np.linspace(a, b, m + 1)
        for lo, hi in zip(edges, edges[1:]):
            ang.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
            wts.append(0.5 * (hi - lo) * w * r)
    return np.concatenate(ang), np.concatenate(wts)


def radiation_arc_integrals(sol, theta, h, radii, variant="v") -> ArcIntegralReport:
    """Sommerfeld-type arc integrals of the outgoing remainder ``v``.

    Only the portions of the upper half circle ``S_r`` below the PML are
    sampled.  ``d_r v`` is a central difference along rays with step 1e-4.
    """
    k = sol.inc.k
    L = sol.pml.L
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    rc, mass, arcs = [], [], []
    for r in radii:
        if not r > FD_STEP:
            raise ValueError(f"radius {r} must be positive")
        top = L - 2 * FD_STEP
        if r + FD_STEP < top:
            cut = [(0.0, math.pi)]
        else:
            a = math.asin(min(1.0, top / (r + FD_STEP)))
            cut = [(0.0, a), (math.pi - a, math.pi)]
        pieces = []
        for lo, hi in cut:
            # v is discontinuous across the ray at angle theta
            if lo < theta < hi:
                pieces += [(lo, theta), (theta, hi)]
            else:
                pieces.append((lo, hi))
        if sum(b - a for a, b in pieces) * r < 1e-3:
            raise ValueError(f"radius {r} leaves no arc inside the computable strip")
        ang, w = _gauss_pieces(pieces, r)
        c, s = np.cos(ang), np.sin(ang)
        v0 = eval_outgoing_v(sol, r * c, r * s, theta, h, variant)
        vp = eval_outgoing_v(sol, (r + FD_STEP) * c, (r + FD_STEP) * s, theta, h, variant)
        vm = eval_outgoing_v(sol, (r - FD_STEP) * c, (r - FD_STEP) * s, theta, h, variant)
        dv = (vp - vm) / (2 * FD_STEP)
        rc.append(float(np.sum(w * np.abs(dv - 1j * k * v0) ** 2)))
        mass.append(float(np.sum(w * np.abs(v0) ** 2)))
        arcs.append(pieces)
    return ArcIntegralReport(radii, np.array(rc), np.array(mass), arcs)


def w_arc_integrals(theta, h, radii, k=2 * math.pi, n=64) -> ArcIntegralReport:
    """Arc integrals of ``w = (c_h - 1) exp(i(alpha x1 + beta x2))`` over ``S_r^M``.

    ``w`` is the difference of the two outgoing remainders in the middle
    sector and is known in closed form, so no solver is involved.
    """
    if not 0 < theta < math.pi or theta == math.pi / 2:
        raise ValueError("theta must lie in (0, pi) and differ from pi/2")
    inc = PlaneWave(theta, k)
    amp = abs(inc.c_h(h) - 1.0)
    th = theta if theta < math.pi / 2 else math.pi - theta
    rc, mass, arcs = [], [], []
    for r in np.atleast_1d(np.asarray(radii, dtype=float)):
        q = h / (r * math.cos(th))
        if q > 1:
            raise ValueError(f"radius {r} too small for a middle-sector arc")
        # psi = phi - theta runs over [-asin(q), 0) inside the middle sector
        a = math.asin(q)
        x, wq = np.polynomial.legendre.leggauss(n)
        psi = 0.5 * a * (x - 1.0)
        wts = 0.5 * a * wq * r
        # |d_r w - ikw| = k |w| (1 - cos psi) since d_r w = ik cos(psi) w
        rc.append(float(np.sum(wts * (k * amp * (1.0 - np.cos(psi))) ** 2)))
        mass.append(float(np.sum(wts * amp**2)))
        arcs.append([(th - a, th)])
    return ArcIntegralReport(np.atleast_1d(np.asarray(radii, dtype=float)), np.array(rc), np.array(mass), arcs)


# ----------------------------------------------------------------------------
# angular spectrum


def asr_propagate(line, a, x1_line, probes, k):
    """Propagate line data on ``x2 = a`` upward through its angular spectrum."""
    x1_line = np.asarray(x1_line, dtype=float)
    dx = x1_line[1] - x1_line[0]
    n = len(x1_line)
    spec = np.fft.fft(line) * dx
    xi = 2 * math.pi * np.fft.fftfreq(n, d=dx)
    kz = sqrt_branch(k * k - xi * xi + 0j)
    probes = np.atleast_2d(probes)
    out = np.empty(len(probes), dtype=complex)
    dxi = 2 * math.pi / (n * dx)
    for i, (p1, p2) in enumerate(probes):
        phase = np.exp(1j * xi * (p1 - x1_line[0]) + 1j * kz * (p2 - a))
        out[i] = np.sum(spec * phase) * dxi / (2 * math.pi)
    return out


def asr_check(obj, a, probes, window=200.0, taper=50.0, dx=1.0 / 16, pad=16, k=None) -> float:
    """Max relative deviation between the angular-spectrum field and direct samples.

    ``obj`` is a solution (the field used is ``u_tot - u_in``) or a callable
    ``(x1, x2) -> complex``.  Line data on ``x2 = a`` over ``|x1| <= window/2``
    are multiplied by a cosine taper of width ``taper`` at each end and
    zero-padded ``pad``-fold, which refines the spectral step and keeps the
    periodic images of the line far from the probes.  The result
    approximates the infinite-line representation only.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if hasattr(obj, "bases"):
        sol = obj
        k = sol.inc.k
        if np.any(probes[:, 1] >= sol.pml.L) or a >= sol.pml.L:
            raise ValueError("probes and line must lie below the PML")
        if a <= max(r.layer_top for r in sol.regions):
            raise ValueError("line must lie above every ground and layer")
        f = lambda x1, x2: eval_total(sol, x1, x2) - sol.inc(x1, x2)
    else:
        f = obj
        k = 2 * math.pi if k is None else k
    if np.any(probes[:, 1] <= a):
        raise ValueError("probes must lie above the line x2 = a")
    n = int(round(window / dx))
    x1 = -0.5 * window + dx * np.arange(n)
    line = np.asarray(f(x1, np.full(n, a)), dtype=complex)
    if not np.any(line):
        return 0.0
    line = line * tukey(n, alpha=min(1.0, 2 * taper / window))
    lead = (n * (pad - 1)) // 2
    padded = np.zeros(n * pad, dtype=complex)
    padded[lead:lead + n] = line
    asr = asr_propagate(padded, a, x1[0] - lead * dx + dx * np.arange(n * pad), probes, k)
    direct = np.atleast_1d(f(probes[:, 0], probes[:, 1]))
    scale = np.max(np.abs(direct))
    if scale == 0:
        return float(np.max(np.abs(asr)))
    return float(np.max(np.abs(asr - direct)) / scale)


# ----------------------------------------------------------------------------
# appendix integrals


@dataclass
class AppendixIntegralReport:
    """Truncated oscillatory integrals at increasing upper limits."""

    y1: float
    theta: float
    s0: float
    limits: np.ndarray
    values: np.ndarray  # shape (len(limits), 3): I1, I2, I3
    differences: np.ndarray  # |I_j(l_{i+1}) - I_j(l_i)|, shape (len(limits) - 1, 3)


def _dist(s, y1, theta):
    return np.sqrt((s - y1 * math.cos(theta)) ** 2 + (y1 * math.sin(theta)) ** 2)


def _appendix_integrands(s, y1, theta, k):
    d = _dist(s, y1, theta)
    z = k * d
    h0 = hankel1(0, z)
    h1 = hankel1(1, z)
    h1p = h0 - h1 / z
    e = np.exp(1j * k * s)
    sn2 = math.sin(theta) ** 2
    i1 = k * s * y1 * sn2 / d**2 * h1p * e
    i2 = math.cos(theta) / d * h1 * e
    i3 = -s * y1 * sn2 / d**3 * h1 * e
    return np.stack([i1, i2, i3])


def _panel_sum(a, b, y1, theta, k, tol, depth=0):
    """Adaptive Gauss-Legendre on panels, comparing 10- and 20-point rules."""
    x10, w10 = np.polynomial.legendre.leggauss(10)
    x20, w20 = np.polynomial.legendre.leggauss(20)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    s10 = mid[:, None] + half[:, None] * x10
    s20 = mid[:, None] + half[:, None] * x20
    q10 = np.einsum("jpn,n->jp", _appendix_integrands(s10, y1, theta, k), w10) * half
    q20 = np.einsum("jpn,n->jp", _appendix_integrands(s20, y1, theta, k), w20) * half
    err = np.max(np.abs(q20 - q10), axis=0)
    bad = err > tol * np.maximum(1.0, np.max(np.abs(q20), axis=0))
    if np.any(bad) and depth < 30:
        aa, bb = a[bad], b[bad]
        mm = 0.5 * (aa + bb)
        sub = _panel_sum(np.concatenate([aa, mm]), np.concatenate([mm, bb]), y1, theta, k, tol, depth + 1)
        q20 = q20.copy()
        q20[:, bad] = 0.0
        return q20.sum(axis=1) + sub
    return q20.sum(axis=1)


def appendix_integrals(y1, theta, s0, l_list, k=2 * math.pi, tol=1e-10) -> AppendixIntegralReport:
    """``I_1``, ``I_2``, ``I_3`` truncated at each upper limit in ``l_list``.

    Panels are at most a quarter of a half-wavelength long (the integrands
    oscillate at about ``2k``) and are bisected until a 10- and a 20-point
    Gauss rule agree to ``tol``.
    """
    eps = 1e-3
    if not eps < theta < math.pi - eps:
        raise ValueError("theta must lie strictly inside (0, pi)")
    if not s0 > 0:
        raise ValueError("s0 must be positive")
    limits = np.sort(np.asarray(l_list, dtype=float))
    if limits[0] < s0:
        raise ValueError("upper limits must not be below s0")
    lam = 2 * math.pi / k
    vals = []
    total = np.zeros(3, dtype=complex)
    start = float(s0)
    for lim in limits:
        if lim > start:
            m = int(math.ceil((lim - start) / (lam / 8)))
            edges = np.linspace(start, lim, m + 1)
            total = total + _panel_sum(edges[:-1], edges[1:], float(y1), theta, k, tol)
        start = lim
        vals.append(total.copy())
    vals = np.array(vals)
    if y1 == 0:
        vals[:, 0] = 0.0
        vals[:, 2] = 0.0
    return AppendixIntegralReport(float(y1), float(theta), float(s0), limits, vals, np.abs(np.diff(vals, axis=0)))


# ----------------------------------------------------------------------------
# surface, jumps, reciprocity


def distance_to_surface(surface: SteppedSurface, x) -> float:
    """Euclidean distance from ``x`` to the stepped curve."""
    x1, x2 = float(x[0]), float(x[1])
    bp = (-math.inf,) + surface.breakpoints + (math.inf,)
    best = math.inf
    for r, g in enumerate(surface.ground_heights):
        lo, hi = bp[r], bp[r + 1]
        dx = 0.0 if lo <= x1 <= hi else min(abs(x1 - lo), abs(x1 - hi))
        best = min(best, math.hypot(dx, x2 - g))
    for b, bot, top in surface.walls():
        dy = 0.0 if bot <= x2 <= top else min(abs(x2 - bot), abs(x2 - top))
        best = min(best, math.hypot(x1 - b, dy))
    return best


def surface_probes(surface: SteppedSurface, n_probe_per_lambda=20, window=2.5):
    """Probe points on ``Gamma`` within ``|x1| <= window``.

    Probes sit at cell midpoints of a uniform ``1/n_probe_per_lambda`` spacing
    on every ground piece and wall, plus every wall mid-height.
    """
    step = 1.0 / n_probe_per_lambda
    pts = []
    bp = (-window,) + tuple(b for b in surface.breakpoints if -window < b < window) + (window,)
    for lo, hi in zip(bp, bp[1:]):
        m = max(1, int(math.ceil((hi - lo) / step)))
        xs = lo + (np.arange(m) + 0.5) * (hi - lo) / m
        g = surface.ground_heights[surface.region_index(0.5 * (lo + hi))]
        pts += [(x, g) for x in xs]
    for b, bot, top in surface.walls():
        if not -window <= b <= window or top == bot:
            continue
        m = max(1, int(math.ceil((top - bot) / step)))
        ys = bot + (np.arange(m) + 0.5) * (top - bot) / m
        pts += [(b, y) for y in ys]
        pts.append((b, 0.5 * (bot + top)))
    return np.array(pts)


def surface_residual(sol, n_probe_per_lambda=20, window=2.5) -> float:
    """Max ``|u_tot|`` over :func:`surface_probes`."""
    if sol.surface is None:
        raise ValueError("solution carries no surface")
    pts = surface_probes(sol.surface, n_probe_per_lambda, window)
    # on a wall line the evaluator already picks the lower region
    vals = eval_total(sol, pts[:, 0], pts[:, 1])
    return float(np.max(np.abs(vals)))


def jump_check(sol, theta, h, s_values, eps=1e-6, fd=1e-4):
    """Jumps of ``v`` and ``d_nu v`` across the ray at angle ``theta``.

    Returns ``(rel_value, rel_normal)``: max relative deviation of the
    computed jumps from ``(1 - c_h) e^{i(alpha x1 + beta x2)}`` and from its
    normal derivative (which is zero), the latter relative to ``k |1 - c_h|``.
    ``+`` is the side above the ray.
    """
    inc = sol.inc
    s = np.asarray(s_values, dtype=float)
    tau = np.array([math.cos(theta), math.sin(theta)])
    nu = np.array([-math.sin(theta), math.cos(theta)])  # points into the upper sector
    p = s[:, None] * tau
    if np.any(p[:, 1] + eps + fd >= sol.pml.L):
        raise ValueError("probe points must lie below the PML")

    def v_at(off):
        q = p + off * nu
        return eval_outgoing_v(sol, q[:, 0], q[:, 1], theta, h)

    vp, vm = v_at(eps), v_at(-eps)
    dvp = (v_at(eps + fd) - v_at(eps)) / fd
    dvm = (v_at(-eps) - v_at(-eps - fd)) / fd
    e = np.exp(1j * (inc.alpha * p[:, 0] + inc.beta * p[:, 1]))
    pref = 1.0 - inc.c_h(h)
    jump = pref * e
    djump = pref * 1j * (inc.alpha * nu[0] + inc.beta * nu[1]) * e
    rel_v = np.max(np.abs((vp - vm) - jump)) / np.max(np.abs(jump))
    # the phase gradient is parallel to the ray, so djump vanishes; scale by k |1 - c_h|
    rel_d = np.max(np.abs((dvp - dvm) - djump)) / (inc.k * abs(pref))
    return float(rel_v), float(rel_d)


def helmholtz_fd_residual(sol, x, step) -> complex:
    """Five-point ``(Delta_h + k^2) u_tot`` at ``x``, scaled by ``k^2 |u|``."""
    k = sol.inc.k
    x1, x2 = float(x[0]), float(x[1])
    pts1 = np.array([x1, x1 + step, x1 - step, x1, x1])
    pts2 = np.array([x2, x2, x2, x2 + step, x2 - step])
    u = eval_total(sol, pts1, pts2)
    lap = (u[1] + u[2] + u[3] + u[4] - 4 * u[0]) / step**2
    return complex((lap + k * k * u[0]) / (k * k * abs(u[0])))


def _solve_point(surface, z, pml, n_modes, m_extra, k):
    return solve(surface, PointSource(z, k), pml, n_modes, m_extra)


def reciprocity_check(surface, x, z, pml=None, n_modes=280, m_extra=140, k=2 * math.pi) -> float:
    """``|Phi(x; z) - Phi(z; x)| / max(|Phi(x; z)|, |Phi(z; x)|)`` from two solves."""
    pml = PmlParams(2.5, 1.0, 70.0) if pml is None else pml
    x = (float(x[0]), float(x[1]))
    z = (float(z[0]), float(z[1]))
    lam = 2 * math.pi / k
    if math.hypot(x[0] - z[0], x[1] - z[1]) < lam / 4:
        raise ValueError("points must be at least a quarter wavelength apart")
    for p in (x, z):
        if not surface.is_above(p) or distance_to_surface(surface, p) < lam / 4:
            raise ValueError(f"point {p} is closer than a quarter wavelength to the surface")
    a = eval_total(_solve_point(surface, z, pml, n_modes, m_extra, k), *x)
    b = eval_total(_solve_point(surface, x, pml, n_modes, m_extra, k), *z)
    return float(abs(a - b) / max(abs(a), abs(b)))


def f_limit_check(
    x,
    theta,
    h,
    R1_list: Sequence[float],
    pml=None,
    n_modes=200,
    m_extra=100,
    k=2 * math.pi,
    per_wavelength=64,
):
    """Truncated ray integrals defining ``f`` and their successive differences.

    One point-source solve with the source at ``x`` gives ``Phi(y; x)``;
    by symmetry its normal derivative along the ray replaces
    ``d_nu Phi(x; y)``.  Returns ``(values, differences)``.
    """
    if not 0 < theta < math.pi / 2:
        raise ValueError("the ray check is implemented for 0 < theta < pi/2")
    inc = PlaneWave(theta, k)
    pref = 1.0 - inc.c_h(h)
    if abs(pref) <= 64 * np.finfo(float).eps:
        # c_h == 1 up to rounding of exp(2 i beta h)
        pref = 0.0
    R1 = np.sort(np.asarray(R1_list, dtype=float))
    if pref == 0.0:
        vals = np.zeros(len(R1), dtype=complex)
        return vals, np.zeros(len(R1) - 1)
    pml = PmlParams(4.5, 1.0, 70.0) if pml is None else pml
    if R1[-1] * math.sin(theta) + FD_STEP >= pml.L:
        raise ValueError("R1 exceeds the computable strip below the PML")
    surface = SteppedSurface((0.0,), (0.0, -float(h)))
    if not surface.is_above(x):
        raise ValueError("x must lie above the surface")
    sol = solve(surface, PointSource((float(x[0]), float(x[1])), k), pml, n_modes, m_extra)
    tau = np.array([math.cos(theta), math.sin(theta)])
    nu = np.array([math.sin(theta), -math.cos(theta)])
    gx, gw = np.polynomial.legendre.leggauss(per_wavelength // 8)
    vals = []
    total = 0j
    start = 0.0
    for r in R1:
        m = max(1, int(math.ceil((r - start) * 8)))
        edges = np.linspace(start, r, m + 1)
        lo, hi = edges[:-1, None], edges[1:, None]
        s = (0.5 * (hi + lo) + 0.5 * (hi - lo) * gx).ravel()
        w = (0.5 * (hi - lo) * gw).ravel()
        y = s[:, None] * tau
        up = eval_total(sol, y[:, 0] + FD_STEP * nu[0], y[:, 1] + FD_STEP * nu[1])
        dn = eval_total(sol, y[:, 0] - FD_STEP * nu[0], y[:, 1] - FD_STEP * nu[1])
        dphi = (up - dn) / (2 * FD_STEP)
        total += np.sum(w * np.exp(1j * (inc.alpha * y[:, 0] + inc.beta * y[:, 1])) * dphi)
        vals.append(pref * total)
        start = r
    vals = np.array(vals)
    return vals, np.abs(np.diff(vals))
