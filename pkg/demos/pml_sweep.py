"""How the PML thickness and strength affect the computed field.

Each sweep compares solutions at a few probe points against the reference
PML (d = 1, sigma = 70). With sigma = 70 the layer already absorbs almost
everything for d >= 0.05, so the d-sweep sits on its accuracy floor; the
decay only shows for very thin layers. The sigma-sweep at d = 1 shows the
drop from weak to moderate absorption and then the floor.

    python demos/pml_sweep.py
"""
import math

from nmmscatter import PlaneWave, PmlParams, PointSource, solve, trapezoid
from nmmscatter.verify import relative_error

S = [(0.0, -1.0), (0.0, 0.0), (0.0, 2.5)]
surf = trapezoid(1.0)

for inc in (PlaneWave(math.pi / 6), PointSource((0.2, 0.2))):
    ref = solve(surf, inc, PmlParams(2.5, 1.0, 70.0), 140, 70)
    print(type(inc).__name__)
    for d in (0.001, 0.003, 0.01, 0.02, 0.05, 0.2, 0.8):
        err = relative_error(ref, solve(surf, inc, PmlParams(2.5, d, 70.0), 140, 70), S)
        print(f"  d = {d:<6g} E_rel = {err:.2e}")
    for sigma in (1.0, 5.0, 10.0, 20.0, 40.0):
        err = relative_error(ref, solve(surf, inc, PmlParams(2.5, 1.0, sigma), 140, 70), S)
        print(f"  sigma = {sigma:<5g} E_rel = {err:.2e}")
