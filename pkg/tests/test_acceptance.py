"""Acceptance criteria, each checked at its stated tolerance."""
import math
import time

import numpy as np
import pytest

from nmmscatter import (
    Inclusion,
    PlaneWave,
    PmlParams,
    PointSource,
    SteppedSurface,
    eval_total,
    sample_grid,
    solve,
    trapezoid,
)
from nmmscatter.cli import export
from nmmscatter.eigensolver import assemble_vertical_operator, cheb_grid, solve_modes
from nmmscatter.geometry import Region
from nmmscatter.verify import (
    appendix_integrals,
    helmholtz_fd_residual,
    jump_check,
    reciprocity_check,
    relative_error,
    surface_residual,
    w_arc_integrals,
)

K = 2 * math.pi
TH = math.pi / 6
EX1_PML = PmlParams(2.5, 1.0, 70.0)
S1 = np.array([[0.0, -1.0], [0.0, 0.0], [0.0, 2.5]])


def test_c1_flat_surface_exactness(acceptance):
    t0 = time.perf_counter()
    inc = PlaneWave(TH)
    sol = solve(trapezoid(0.0), inc, EX1_PML, 140, 0)
    x1, x2 = np.meshgrid(np.linspace(-2.5, 2.5, 50), np.linspace(0.0, 2.5, 50))
    exact = np.exp(1j * (inc.alpha * x1 - inc.beta * x2)) - np.exp(1j * (inc.alpha * x1 + inc.beta * x2))
    err = float(np.max(np.abs(eval_total(sol, x1, x2) - exact)))
    dt = time.perf_counter() - t0
    ok = err <= 1e-8 and dt <= 10
    assert acceptance("C1 flat exactness", ok, f"max error {err:.2e} (<= 1e-8), {dt:.2f} s (<= 10 s)")


def test_c2_eigen_oracle(acceptance):
    pml = PmlParams(2.5, 1.0, 0.0)
    reg = Region(0, -math.inf, math.inf, 0.0)
    exact = K**2 - (np.arange(1, 21) * math.pi / 3.5) ** 2
    worst = 0.0
    for n in (64, 96, 128):
        op = assemble_vertical_operator(reg, cheb_grid([n], [0.0, 3.5]), pml, K, top_bc="dirichlet")
        mu = solve_modes(op).mu[:20]
        # j = 7 has mu = 0 exactly; its error is measured relative to k^2
        worst = max(worst, float(np.max(np.abs(mu - exact) / np.maximum(np.abs(exact), K**2))))
    assert acceptance("C2 eigen oracle", worst <= 1e-8, f"max relative error {worst:.2e} at N in 64..128 (<= 1e-8)")


def test_c3_example1_reproduction(acceptance, ex1_plane, ex1_point):
    res = {tag: surface_residual(s, 20, 2.5) for tag, s in (("plane", ex1_plane), ("point", ex1_point))}
    ratios = []
    for sol in (ex1_plane, ex1_point):
        for x in ((-1.2, 0.9), (0.8, -0.4), (1.5, 1.5)):
            r = [abs(helmholtz_fd_residual(sol, x, h)) for h in (0.04, 0.02, 0.01)]
            ratios += [r[0] / r[1], r[1] / r[2]]
    order = [math.log2(q) for q in ratios]
    ok_res = all(v <= 1e-4 for v in res.values())
    ok_fd = all(1.8 <= p <= 2.2 for p in order)
    detail = (
        f"trace residual plane {res['plane']:.2e}, point {res['point']:.2e} (<= 1e-4); "
        f"FD observed order {min(order):.2f}..{max(order):.2f} (2 expected)"
    )
    assert acceptance("C3 Example 1 reproduction", ok_res and ok_fd, detail)


def _trend(values, errs):
    """Log-linear fit up to the plateau onset (first point within 10x of the sweep minimum)."""
    errs = np.asarray(errs)
    floor = errs.min()
    onset = int(np.argmax(errs <= 10 * floor))
    n = onset + 1
    if n < 3:
        return None, None, n
    x = np.asarray(values[:n])
    y = np.log(errs[:n])
    slope, icpt = np.polyfit(x, y, 1)
    pred = slope * x + icpt
    r2 = 1 - np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2)
    return float(slope), float(r2), n


def _sweep(inc, param, values):
    ref = solve(trapezoid(1.0), inc, EX1_PML, 140, 70)
    out = []
    for v in values:
        pml = PmlParams(2.5, v, 70.0) if param == "d" else PmlParams(2.5, 1.0, v)
        out.append(relative_error(ref, solve(trapezoid(1.0), inc, pml, 140, 70), S1))
    return out


def test_c4_pml_convergence_trend(acceptance):
    t0 = time.perf_counter()
    sweeps = {"d": [0.05, 0.1, 0.2, 0.4, 0.8], "sigma": [1.0, 5.0, 10.0, 20.0, 40.0]}
    oks, parts = [], []
    for inc, tag in ((PlaneWave(TH), "plane"), (PointSource((0.2, 0.2)), "point")):
        for param, vals in sweeps.items():
            errs = _sweep(inc, param, vals)
            slope, r2, n = _trend(vals, errs)
            ok = slope is not None and slope < 0 and r2 >= 0.9 and errs[-1] <= 1e-3
            oks.append(ok)
            fit = f"slope {slope:.2f}, R^2 {r2:.2f}" if slope is not None else f"only {n} point(s) before plateau"
            parts.append(f"{tag}/{param}: E_rel {errs[0]:.1e}->{errs[-1]:.1e}, {fit}")
    dt = time.perf_counter() - t0
    ok = all(oks) and dt <= 600
    assert acceptance("C4 PML convergence trend", ok, "; ".join(parts) + f"; {dt:.1f} s")


def test_c5_jump_identities(acceptance):
    sol = solve(trapezoid(0.5), PlaneWave(TH), EX1_PML, 280, 140)
    rv, rd = jump_check(sol, TH, 0.5, np.linspace(0.2, 4.5, 20))
    ok = rv <= 1e-3 and rd <= 1e-2
    assert acceptance("C5 jump identities", ok, f"value jump {rv:.2e} (<= 1e-3), normal-derivative jump {rd:.2e} (<= 1e-2)")


def test_c6_w_scalings(acceptance):
    t0 = time.perf_counter()
    r = 10.0
    rep = w_arc_integrals(TH, 0.5, [r, 2 * r, 4 * r])
    ratio = rep.rc[0] / rep.rc[1]
    bounded = np.ptp(rep.mass) <= 0.05 * rep.mass.mean()
    dt = time.perf_counter() - t0
    ok = abs(ratio - 4.0) <= 0.8 and bounded and dt <= 1.0
    detail = (
        f"first-integral ratio I(r)/I(2r) = {ratio:.2f} (4 +- 0.8), "
        f"second integral {rep.mass.min():.4f}..{rep.mass.max():.4f} (bounded), {dt * 1e3:.0f} ms"
    )
    assert acceptance("C6 closed-form w scalings", ok, detail)


def test_c7_reciprocity(acceptance):
    dev = reciprocity_check(trapezoid(1.0), (-1.0, 1.0), (1.5, 0.5), EX1_PML, 280, 140)
    assert acceptance("C7 reciprocity", dev <= 1e-4, f"relative deviation {dev:.2e} (<= 1e-4)")


def test_c8_appendix_integrals(acceptance):
    t0 = time.perf_counter()
    oks, parts = [], []
    for y1, th, s0 in ((0.0, math.pi / 4, 1.0), (5.0, math.pi / 4, 1.0), (5.0, math.pi / 6, 2.0)):
        rep = appendix_integrals(y1, th, s0, [1e2, 1e3, 1e4])
        vals = rep.values
        if y1 == 0:
            oks.append(bool(np.all(vals[:, 0] == 0) and np.all(vals[:, 2] == 0)))
            cols = [1]
        else:
            cols = [0, 1, 2]
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.abs(np.diff(vals, axis=0)) / np.abs(vals[1:])
        dec = all(rel[1, j] < rel[0, j] for j in cols)
        oks.append(dec and np.all(np.isfinite(vals)))
        parts.append(f"y1={y1:g}: max rel diff {rel[0, cols].max():.1e}->{rel[1, cols].max():.1e}")
    dt = time.perf_counter() - t0
    ok = all(oks) and dt <= 60
    assert acceptance("C8 limit integrals", ok, "; ".join(parts) + f"; I1=I3=0 at y1=0; {dt:.1f} s")


EX3_SURFACE = SteppedSurface((0.0, 2.0, 3.0, 5.0, 6.0), (0.0, -1.0, 0.0, -0.5, 0.0, -1.0))
EX3_INCLUSION = Inclusion(3.0, 5.0, -0.5, 0.0, 2.0)


def test_c9_examples_2_and_3(acceptance, tmp_path_factory):
    out = tmp_path_factory.mktemp("examples")
    parts, oks = [], []
    runs = [
        ("ex2", trapezoid(1.0), [Inclusion(0.0, 1.0, -1.0, 0.0, 2.0)], PlaneWave(TH), 280, 140, (-2.5, 2.5, -2.5, 2.5), 2.5),
        ("ex2", trapezoid(1.0), [Inclusion(0.0, 1.0, -1.0, 0.0, 2.0)], PointSource((0.2, 0.2)), 280, 140, (-2.5, 2.5, -2.5, 2.5), 2.5),
        ("ex3", EX3_SURFACE, [EX3_INCLUSION], PlaneWave(TH), 160, 80, (-2.5, 10.5, -2.5, 2.5), 10.5),
        ("ex3", EX3_SURFACE, [EX3_INCLUSION], PointSource((7.2, 1.2)), 160, 80, (-2.5, 10.5, -2.5, 2.5), 10.5),
    ]
    for name, surf, incl, inc, n, m, rect, win in runs:
        sol = solve(surf, inc, EX1_PML, n, m, incl)
        modes = sum(b.n_modes for b in sol.bases)
        res = surface_residual(sol, 20, win)
        tag = "plane" if isinstance(inc, PlaneWave) else "point"
        path = export(sample_grid(sol, rect, 66, 26), out / f"{name}_{tag}.txt")
        oks.append(res <= 1e-3 and path.exists() and (name != "ex3" or modes <= 1200))
        parts.append(f"{name}/{tag}: {modes} modes, trace residual {res:.1e}")
    assert acceptance("C9 Examples 2 and 3 smoke", all(oks), "; ".join(parts) + " (<= 1e-3; plots need visual check)")


def test_invariant_linear_residual(acceptance, ex1_plane, ex1_point):
    res = max(ex1_plane.residual, ex1_point.residual)
    assert acceptance("Invariant: matching residual on Example 1", res <= 1e-10, f"{res:.2e} (<= 1e-10)")
