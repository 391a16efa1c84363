"""Command line front end: solve, sweep-pml, verify, export.

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 a diagnostic
exceeded its threshold.  ``NMMSCATTER_THREADS`` sets the number of
concurrent solves in a sweep.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, apply_overrides, load_config
from .evaluate import FieldGrid, _describe, geometry_hash, sample_grid
from .fields import PlaneWave
from .matching import SingularSystemError, solve
from .verify import (
    asr_check,
    jump_check,
    reciprocity_check,
    relative_error,
    surface_residual,
)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_DIAGNOSTIC = 0, 2, 3, 4
THREADS_ENV = "NMMSCATTER_THREADS"


class SolverError(RuntimeError):
    """A solve failed; the message carries the run context."""


class DiagnosticFailure(RuntimeError):
    pass


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}: expected an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV}: must be at least 1")
    return n


def _tag(inc) -> str:
    return "plane" if isinstance(inc, PlaneWave) else "point"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _solve(cfg: RunConfig, inc, pml=None, n=None, m=None):
    pml = cfg.pml_obj() if pml is None else pml
    n = cfg.modes["N"] if n is None else n
    m = cfg.modes["M"] if m is None else m
    try:
        return solve(
            cfg.surface_obj(),
            inc,
            pml,
            n,
            m,
            cfg.inclusion_objs(),
            cfg.modes.get("pml_min", 16),
        )
    except (SingularSystemError, NotImplementedError, ValueError, np.linalg.LinAlgError) as exc:
        raise SolverError(
            f"{cfg.name}: {_describe(inc)}, PML (L={pml.L}, d={pml.d}, sigma={pml.sigma}), N={n}, M={m}: {exc}"
        ) from exc


# ----------------------------------------------------------------------------
# export


def format_grid(grid: FieldGrid) -> str:
    """Text form of a sampled field; identical inputs give identical bytes."""
    x1a, x1b, x2a, x2b = grid.rect
    head = [
        "# nmmscatter field export",
        f"# field = {grid.which}",
        f"# k = {_fmt(grid.meta.get('k', math.nan))}",
        f"# incidence = {grid.meta.get('incidence', '')}",
        f"# rect = {_fmt(x1a)},{_fmt(x1b)},{_fmt(x2a)},{_fmt(x2b)}",
        f"# resolution = {grid.n1},{grid.n2}",
        f"# geometry_hash = {grid.meta.get('geometry_hash', '')}",
        "# rows run over x1 fastest; mask = 1 marks substrate points (values nan)",
        "x1,x2,re,im,mask",
    ]
    rows = []
    x1, x2 = grid.x1, grid.x2
    for j in range(grid.n2):
        for i in range(grid.n1):
            v = grid.values[j, i]
            masked = bool(grid.mask[j, i])
            re = "nan" if masked else _fmt(v.real)
            im = "nan" if masked else _fmt(v.imag)
            rows.append(f"{_fmt(x1[i])},{_fmt(x2[j])},{re},{im},{int(masked)}")
    return "\n".join(head + rows) + "\n"


PLOT_HELPER = '''"""Plot helper emitted next to {data}; needs numpy and matplotlib."""
import sys
from pathlib import Path

import numpy as np
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
# header: comment lines then the column-name line
with open(here / "{data}") as fh:
    skip = next(i for i, line in enumerate(fh) if not line.startswith("#")) + 1
n1, n2 = {n1}, {n2}
re = np.loadtxt(here / "{data}", delimiter=",", skiprows=skip, usecols=2).reshape(n2, n1)
fig, ax = plt.subplots(figsize=(5, 5 * max(n2, 2) / max(n1, 2)))
# clip at the 99th percentile so a source singularity does not swamp the scale
vmax = np.nanpercentile(np.abs(re), 99) or 1.0
im = ax.imshow(re, origin="lower", vmin=-vmax, vmax=vmax, extent={extent}, cmap="RdBu_r")
ax.set_xlabel("x1 [wavelengths]")
ax.set_ylabel("x2 [wavelengths]")
ax.set_title("Re {which} field")
fig.colorbar(im, ax=ax)
out = here / "{stem}.png"
fig.savefig(out, dpi=150, bbox_inches="tight")
print(out, file=sys.stderr)
'''


def export(grid: FieldGrid, path) -> Path:
    """Write ``grid`` to ``path`` and a plot-helper script beside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_grid(grid))
    helper = path.with_suffix(".plot.py")
    with open(helper, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            PLOT_HELPER.format(
                data=path.name,
                n1=grid.n1,
                n2=grid.n2,
                extent=list(grid.rect),
                which=grid.which,
                stem=path.stem,
            )
        )
    return path


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ----------------------------------------------------------------------------
# runs


def run_solve(cfg: RunConfig, outdir) -> dict:
    """Solve for every incidence, export fields, write summary and timings.

    ``<name>_summary.json`` holds inputs, version and diagnostics and is
    byte-stable; wall-clock timings go to ``<name>_timings.json``.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    e = cfg.export
    summary = {"config": cfg.to_dict(), "version": __version__, "runs": []}
    timings = {}
    for inc in cfg.incidence_objs():
        tag = _tag(inc)
        t0 = time.perf_counter()
        sol = _solve(cfg, inc)
        t1 = time.perf_counter()
        files = []
        for which in e.get("fields", ["total"]):
            if which == "v" and not isinstance(inc, PlaneWave):
                continue
            grid = sample_grid(sol, e["rect"], e["n1"], e["n2"], which)
            name = f"{cfg.name}_{tag}_{which}.txt"
            export(grid, outdir / name)
            files.append(name)
        t2 = time.perf_counter()
        res = surface_residual(sol, cfg.verify.get("probe_density", 20), cfg.verify.get("window", 2.5))
        summary["runs"].append(
            {
                "incidence": _describe(inc),
                "unknowns": sol.size,
                "residual": float(sol.residual),
                "condition_estimate": float(sol.cond),
                "surface_residual": res,
                "geometry_hash": geometry_hash(sol),
                "files": files,
            }
        )
        timings[tag] = {"solve_s": t1 - t0, "export_s": t2 - t1}
    _dump_json(summary, outdir / f"{cfg.name}_summary.json")
    _dump_json(timings, outdir / f"{cfg.name}_timings.json")
    return summary


def run_pml_sweep(cfg: RunConfig, outdir=None, threads=None) -> list:
    """E_rel on the probe set for each PML value, against the configured PML.

    Both the reference and the swept solves use the sweep's mode counts.
    Returns rows ``(parameter, value, incidence tag, E_rel)``.
    """
    s = cfg.sweep
    if not s:
        raise ConfigError("sweep: missing")
    param = s["parameter"]
    n, m = s["N"], s["M"]
    incs = cfg.incidence_objs()
    jobs = [(inc, None) for inc in incs] + [(inc, v) for inc in incs for v in s["values"]]

    def work(job):
        inc, v = job
        pml = cfg.pml_obj() if v is None else cfg.pml_obj(**{param: v})
        return _solve(cfg, inc, pml, n, m)

    threads = _threads() if threads is None else threads
    with ThreadPoolExecutor(max_workers=threads) as pool:
        sols = list(pool.map(work, jobs))
    refs = {id(inc): sol for (inc, v), sol in zip(jobs, sols) if v is None}
    rows = []
    S = np.array(cfg.probes, dtype=float)
    for (inc, v), sol in zip(jobs, sols):
        if v is None:
            continue
        rows.append((param, float(v), _tag(inc), relative_error(refs[id(inc)], sol, S)))
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        lines = ["parameter,value,incidence,E_rel"]
        lines += [f"{p},{_fmt(v)},{t},{_fmt(e)}" for p, v, t, e in rows]
        with open(outdir / f"{cfg.name}_sweep_{param}.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    return rows


def run_verify(cfg: RunConfig, outdir=None) -> dict:
    """Diagnostics suite; raises :class:`DiagnosticFailure` past a threshold."""
    v = cfg.verify
    report = {"checks": []}
    failed = []

    def record(name, value, tol):
        ok = bool(value <= tol)
        report["checks"].append({"name": name, "value": float(value), "threshold": float(tol), "pass": ok})
        if not ok:
            failed.append(name)

    for inc in cfg.incidence_objs():
        sol = _solve(cfg, inc)
        tag = _tag(inc)
        res = surface_residual(sol, v.get("probe_density", 20), v.get("window", 2.5))
        record(f"surface_residual[{tag}]", res, v.get("surface_residual", 1e-4))
        record(f"linear_residual[{tag}]", sol.residual, v.get("linear_residual", 1e-10))
        if isinstance(inc, PlaneWave) and "jump" in v:
            j = v["jump"]
            h = -min(cfg.surface["ground_heights"])
            rv, rd = jump_check(sol, inc.theta, h, np.linspace(*j.get("s_range", [0.2, 2.0]), 20))
            record(f"jump_value[{tag}]", rv, j.get("value_tol", 1e-3))
            record(f"jump_normal[{tag}]", rd, j.get("normal_tol", 1e-2))
        if not isinstance(inc, PlaneWave) and "asr" in v:
            a = v["asr"]
            dev = asr_check(sol, a["a"], a["probes"], a.get("window", 200.0), a.get("taper", 50.0))
            record(f"asr[{tag}]", dev, a.get("tol", 1e-2))
    if "reciprocity" in v:
        r = v["reciprocity"]
        dev = reciprocity_check(
            cfg.surface_obj(), r["x"], r["z"], cfg.pml_obj(), cfg.modes["N"], cfg.modes["M"], cfg.k
        )
        record("reciprocity", dev, r.get("tol", 1e-4))
    report["pass"] = not failed
    if outdir is not None:
        Path(outdir).mkdir(parents=True, exist_ok=True)
        _dump_json(report, Path(outdir) / f"{cfg.name}_verify.json")
    if failed:
        raise DiagnosticFailure(f"thresholds exceeded: {', '.join(failed)}")
    return report


# ----------------------------------------------------------------------------
# argument handling


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nmmscatter", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="JSON run configuration")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. pml.sigma=40 (repeatable)")
        sp.add_argument("-N", type=int, help="modes above the highest ground")
        sp.add_argument("-M", type=int, help="extra modes below it")
        sp.add_argument("--sigma", type=float, help="PML strength")
        sp.add_argument("--d", type=float, help="PML thickness")
        sp.add_argument("--L", type=float, help="PML start height")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("solve", help="solve and export fields"))
    sp = sub.add_parser("sweep-pml", help="E_rel against PML thickness or strength")
    common(sp)
    sp.add_argument("--parameter", choices=("d", "sigma"))
    sp.add_argument("--values", type=float, nargs="+")
    common(sub.add_parser("verify", help="run the diagnostics suite"))
    sp = sub.add_parser("export", help="solve and write one field file")
    common(sp)
    sp.add_argument("--field", choices=("total", "scattered", "v"), default="total")
    sp.add_argument("--path", help="output file (default: <out>/<name>_<field>.txt)")
    sp.add_argument("--incidence", type=int, default=0, help="index into config incidences")
    return p


def _configure(args) -> RunConfig:
    cfg = load_config(args.config)
    sets = list(args.set)
    for flag, key in (("N", "modes.N"), ("M", "modes.M"), ("sigma", "pml.sigma"), ("d", "pml.d"), ("L", "pml.L")):
        val = getattr(args, flag)
        if val is not None:
            sets.append(f"{key}={json.dumps(val)}")
    if getattr(args, "parameter", None):
        sets.append(f"sweep.parameter={json.dumps(args.parameter)}")
    if getattr(args, "values", None):
        sets.append(f"sweep.values={json.dumps(args.values)}")
    return apply_overrides(cfg, sets) if sets else cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _configure(args)
        if args.command == "solve":
            summary = run_solve(cfg, args.out)
            for r in summary["runs"]:
                print(f"{r['incidence']}: {r['unknowns']} unknowns, residual {r['residual']:.2e}, "
                      f"trace residual {r['surface_residual']:.2e}")
        elif args.command == "sweep-pml":
            for p, v, t, e in run_pml_sweep(cfg, args.out):
                print(f"{p}={v:g} {t}: E_rel={e:.3e}")
        elif args.command == "verify":
            report = run_verify(cfg, args.out)
            for c in report["checks"]:
                print(f"{'PASS' if c['pass'] else 'FAIL'} {c['name']}: {c['value']:.3e} (<= {c['threshold']:.1e})")
        elif args.command == "export":
            incs = cfg.incidence_objs()
            if not 0 <= args.incidence < len(incs):
                raise ConfigError(f"--incidence: index {args.incidence} out of range")
            if args.field == "v" and not isinstance(incs[args.incidence], PlaneWave):
                raise ConfigError("--field v: the outgoing remainder needs plane-wave incidence")
            sol = _solve(cfg, incs[args.incidence])
            e = cfg.export
            grid = sample_grid(sol, e["rect"], e["n1"], e["n2"], args.field)
            path = args.path or Path(args.out) / f"{cfg.name}_{args.field}.txt"
            print(export(grid, path))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except DiagnosticFailure as exc:
        print(f"diagnostic failure: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
