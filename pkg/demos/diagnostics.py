"""Independent checks of a computed solution.

Runs the checks that do not rely on the solver's own residuals:

* reciprocity of the point-source response,
* continuity of the outgoing field across the shadow boundary,
* the Fourier (angular spectrum) continuation above the surface,
* far-field integrals of the closed-form corner correction,
* convergence of the limit integrals as the truncation grows.

    python demos/diagnostics.py
"""
import math

import numpy as np

from nmmscatter import PlaneWave, PmlParams, solve, trapezoid
from nmmscatter.verify import (
    appendix_integrals,
    asr_check,
    jump_check,
    reciprocity_check,
    w_arc_integrals,
)

theta = math.pi / 6
pml = PmlParams(2.5, 1.0, 70.0)

dev = reciprocity_check(trapezoid(1.0), (-1.0, 1.0), (1.5, 0.5), pml, 280, 140)
print(f"reciprocity deviation           {dev:.2e}")

sol = solve(trapezoid(0.5), PlaneWave(theta), pml, 280, 140)
rv, rd = jump_check(sol, theta, 0.5, np.linspace(0.2, 4.5, 20))
print(f"shadow-line jumps (value, d/dn) {rv:.2e}, {rd:.2e}")

sol1 = solve(trapezoid(1.0), PlaneWave(theta), pml, 280, 140)
probes = [(x1, 2.0) for x1 in (-1.0, 0.0, 1.0)]
print(f"angular spectrum continuation   {asr_check(sol1, 0.5, probes):.2e}")

# The first arc integral of the corner correction decays like r^-4, so
# doubling the radius divides it by about 16.
rep = w_arc_integrals(theta, 0.5, [10.0, 20.0, 40.0])
print(f"w arc integrals                 {rep.rc}, ratio {rep.rc[0] / rep.rc[1]:.2f}")

for y1, th, s0 in ((0.0, math.pi / 4, 1.0), (5.0, math.pi / 4, 1.0), (5.0, math.pi / 6, 2.0)):
    rep = appendix_integrals(y1, th, s0, [1e2, 1e3, 1e4])
    print(f"limit integrals y1={y1:g}, theta={th:.3f}, s0={s0:g}:")
    for l, row in zip(rep.limits, rep.values):
        print(f"  l = {l:8.0f}  " + "  ".join(f"{v.real:+.6e}{v.imag:+.6e}j" for v in row))
