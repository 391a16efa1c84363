"""Run configuration: a JSON document with lengths in units of the wavelength."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field

from .eigensolver import PmlParams
from .fields import PlaneWave, PointSource
from .geometry import Inclusion, SteppedSurface

__all__ = ["ConfigError", "RunConfig", "load_config", "apply_overrides"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _num(d, key, where, positive=False, nonneg=False):
    if key not in d:
        raise ConfigError(f"{where}.{key}: missing")
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key}: expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key}: must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(f"{where}.{key}: must be non-negative, got {v!r}")
    return float(v)


def _int(d, key, where, minimum=0):
    v = d.get(key)
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{where}.{key}: expected an integer >= {minimum}, got {v!r}")
    return v


@dataclass
class RunConfig:
    """Everything a run needs.

    All lengths (surface, PML, rectangles, points) are measured in the same
    unit as ``wavelength``; the wavenumber is ``2 pi / wavelength``.

    Defaults reproduce the canonical trapezoid with ``h = 1``, a plane wave at
    ``pi/6``, ``sigma = 70``, ``d = 1``, ``L = 2.5`` and ``N = 280``, ``M = 140``.
    """

    name: str = "run"
    wavelength: float = 1.0
    surface: dict = field(default_factory=lambda: {"breakpoints": [0.0], "ground_heights": [0.0, -1.0]})
    inclusions: list = field(default_factory=list)
    incidences: list = field(default_factory=lambda: [{"type": "plane", "theta": math.pi / 6}])
    pml: dict = field(default_factory=lambda: {"L": 2.5, "d": 1.0, "sigma": 70.0})
    modes: dict = field(default_factory=lambda: {"N": 280, "M": 140, "pml_min": 16})
    export: dict = field(
        default_factory=lambda: {"rect": [-2.5, 2.5, -2.5, 2.5], "n1": 101, "n2": 101, "fields": ["total"]}
    )
    probes: list = field(default_factory=lambda: [[0.0, -1.0], [0.0, 0.0], [0.0, 2.5]])
    sweep: dict = field(
        default_factory=lambda: {
            "parameter": "d",
            "values": [0.05, 0.1, 0.2, 0.4, 0.8],
            "N": 140,
            "M": 70,
        }
    )
    verify: dict = field(default_factory=lambda: {"surface_residual": 1e-4, "probe_density": 20, "window": 2.5})

    def __post_init__(self):
        self.validate()

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength

    # -- validation ---------------------------------------------------------
    def validate(self) -> None:
        if not isinstance(self.name, str) or not self.name or any(c in self.name for c in "/\\"):
            raise ConfigError(f"name: expected a plain non-empty string, got {self.name!r}")
        _num({"wavelength": self.wavelength}, "wavelength", "config", positive=True)
        self.surface_obj()
        self.inclusion_objs()
        self.incidence_objs()
        self.pml_obj()
        m = self.modes
        _int(m, "N", "modes", 1)
        _int(m, "M", "modes", 0)
        if "pml_min" in m:
            _int(m, "pml_min", "modes", 2)
        e = self.export
        rect = e.get("rect")
        if not (isinstance(rect, list) and len(rect) == 4):
            raise ConfigError(f"export.rect: expected [x1a, x1b, x2a, x2b], got {rect!r}")
        r = {f"rect[{i}]": v for i, v in enumerate(rect)}
        for key in r:
            _num(r, key, "export")
        if not (rect[1] >= rect[0] and rect[3] >= rect[2]):
            raise ConfigError("export.rect: bounds must be ordered")
        if rect[3] > self.pml["L"] + self.pml["d"]:
            raise ConfigError("export.rect: extends above the PML termination")
        _int(e, "n1", "export", 1)
        _int(e, "n2", "export", 1)
        for f in e.get("fields", ["total"]):
            if f not in ("total", "scattered", "v"):
                raise ConfigError(f"export.fields: unknown field {f!r}")
        for i, p in enumerate(self.probes):
            if not (isinstance(p, list) and len(p) == 2):
                raise ConfigError(f"probes[{i}]: expected [x1, x2]")
            _num({"x1": p[0], "x2": p[1]}, "x1", f"probes[{i}]")
            _num({"x1": p[0], "x2": p[1]}, "x2", f"probes[{i}]")
        s = self.sweep
        if s:
            if s.get("parameter") not in ("d", "sigma"):
                raise ConfigError(f"sweep.parameter: expected 'd' or 'sigma', got {s.get('parameter')!r}")
            vals = s.get("values")
            if not isinstance(vals, list) or not vals:
                raise ConfigError("sweep.values: expected a non-empty list")
            for i, v in enumerate(vals):
                _num({"v": v}, "v", f"sweep.values[{i}]", positive=True)
            _int(s, "N", "sweep", 1)
            _int(s, "M", "sweep", 0)
        v = self.verify
        for key in ("surface_residual",):
            if key in v:
                _num(v, key, "verify", positive=True)
        if "probe_density" in v:
            _int(v, "probe_density", "verify", 1)
        if "window" in v:
            _num(v, "window", "verify", positive=True)

    # -- typed views ---------------------------------------------------------
    def surface_obj(self) -> SteppedSurface:
        try:
            return SteppedSurface(tuple(self.surface["breakpoints"]), tuple(self.surface["ground_heights"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"surface: {exc}") from None

    def inclusion_objs(self) -> list[Inclusion]:
        out = []
        for i, d in enumerate(self.inclusions):
            try:
                out.append(Inclusion(**{k: float(d[k]) for k in ("x1a", "x1b", "x2a", "x2b", "n")}))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"inclusions[{i}]: {exc}") from None
        return out

    def incidence_objs(self) -> list:
        if not isinstance(self.incidences, list) or not self.incidences:
            raise ConfigError("incidences: expected a non-empty list")
        out = []
        for i, d in enumerate(self.incidences):
            where = f"incidences[{i}]"
            kind = d.get("type")
            try:
                if kind == "plane":
                    out.append(PlaneWave(_num(d, "theta", where), self.k))
                elif kind == "point":
                    z = d.get("z")
                    if not (isinstance(z, list) and len(z) == 2):
                        raise ConfigError(f"{where}.z: expected [z1, z2]")
                    p = PointSource((float(z[0]), float(z[1])), self.k)
                    if not self.surface_obj().is_above(p.z):
                        raise ConfigError(f"{where}.z: source must lie above the surface")
                    out.append(p)
                else:
                    raise ConfigError(f"{where}.type: expected 'plane' or 'point', got {kind!r}")
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{where}: {exc}") from None
        return out

    def pml_obj(self, **changes) -> PmlParams:
        p = dict(self.pml)
        p.update(changes)
        for key in ("L", "d", "sigma"):
            _num(p, key, "pml", positive=key != "sigma", nonneg=True)
        try:
            return PmlParams(float(p["L"]), float(p["d"]), float(p["sigma"]))
        except ValueError as exc:
            raise ConfigError(f"pml: {exc}") from None

    # -- serialisation -------------------------------------------------------
    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: expected a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"config: unknown keys {sorted(extra)}")
        return cls(**copy.deepcopy(d))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc})") from None
        return cls.from_dict(d)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return RunConfig.loads(fh.read())


def apply_overrides(cfg: RunConfig, assignments) -> RunConfig:
    """Return a copy with ``dotted.key=json_value`` assignments applied."""
    d = cfg.to_dict()
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = d
        for p in parts[:-1]:
            if isinstance(node, list):
                node = node[int(p)]
            elif p in node:
                node = node[p]
            else:
                raise ConfigError(f"override {key!r}: unknown key {p!r}")
        last = parts[-1]
        if isinstance(node, list):
            node[int(last)] = value
        else:
            if last not in node and node is d:
                raise ConfigError(f"override {key!r}: unknown key {last!r}")
            node[last] = value
    return RunConfig.from_dict(d)
