"""Stepped surfaces with penetrable rectangular inclusions.

Example 2 places an inclusion of refractive index 2 in the corner of the
trapezoid. Example 3 is a longer surface with several steps and a buried
inclusion. Each run reports the number of unknowns and the trace residual
over the exported window, then writes field files and plot helpers.

    python demos/example2_3_inclusions.py [outdir]
"""
import sys
import time
from pathlib import Path

from nmmscatter.cli import run_solve
from nmmscatter.config import load_config

ROOT = Path(__file__).resolve().parents[1]
out = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "demos" / "output"

for name in ("example2", "example3"):
    cfg = load_config(ROOT / "configs" / f"{name}.json")
    t0 = time.perf_counter()
    summary = run_solve(cfg, out)
    for run in summary["runs"]:
        print(
            f"{name} {run['incidence']}: {run['unknowns']} unknowns, "
            f"trace residual {run['surface_residual']:.2e}"
        )
    print(f"{name}: {time.perf_counter() - t0:.1f} s")
