"""Stepped sound-soft surfaces, x-uniform regions and sector classification.

Lengths are measured in free-space wavelengths throughout the package.

A stepped surface is a staircase made of horizontal ground lines joined by
vertical walls.  Region ``r`` spans ``(breakpoints[r-1], breakpoints[r])`` with
ground ``ground_heights[r]``; the first and last regions are semi-infinite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "SteppedSurface",
    "Inclusion",
    "Region",
    "SectorLabel",
    "classify_point",
    "build_regions",
    "locate_region",
    "trapezoid",
]

SectorLabel = str  # one of "L", "M", "R"


@dataclass(frozen=True)
class SteppedSurface:
    """Piecewise-horizontal sound-soft boundary.

    Parameters
    ----------
    breakpoints : sequence of float
        Strictly increasing abscissae of the vertical walls (length ``R-1``).
    ground_heights : sequence of float
        Ground level of each of the ``R`` regions, left to right.
    """

    breakpoints: tuple[float, ...]
    ground_heights: tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        gh = tuple(float(g) for g in self.ground_heights)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "ground_heights", gh)
        if len(gh) != len(bp) + 1:
            raise ValueError(
                f"need len(ground_heights) == len(breakpoints) + 1, got {len(gh)} and {len(bp)}"
            )
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if not all(math.isfinite(v) for v in bp + gh):
            raise ValueError("surface coordinates must be finite")

    @property
    def n_regions(self) -> int:
        return len(self.ground_heights)

    def region_index(self, x1: float) -> int:
        """Index of the surface piece containing ``x1`` (left piece on a wall)."""
        return int(np.searchsorted(self.breakpoints, x1, side="left"))

    def ground_at(self, x1: float) -> float:
        """Height of Gamma at ``x1``; on a wall the top of the wall is returned."""
        idx = np.searchsorted(self.breakpoints, x1, side="left")
        if idx < len(self.breakpoints) and self.breakpoints[idx] == x1:
            return max(self.ground_heights[idx], self.ground_heights[idx + 1])
        return self.ground_heights[idx]

    def walls(self) -> list[tuple[float, float, float]]:
        """Vertical segments as ``(x1, bottom, top)``; zero-height ones included."""
        out = []
        for r, b in enumerate(self.breakpoints):
            g0, g1 = self.ground_heights[r], self.ground_heights[r + 1]
            out.append((b, min(g0, g1), max(g0, g1)))
        return out

    def is_above(self, x: Sequence[float]) -> bool:
        """True if ``x`` lies strictly above Gamma."""
        return x[1] > self.ground_at(x[0])


def trapezoid(h: float) -> SteppedSurface:
    """The canonical surface: ground 0 for ``x1 < 0`` and ``-h`` for ``x1 > 0``."""
    if h < 0:
        raise ValueError("step height must be non-negative")
    return SteppedSurface((0.0,), (0.0, -float(h)))


@dataclass(frozen=True)
class Inclusion:
    """Axis-aligned penetrable rectangle ``[x1a, x1b] x [x2a, x2b]`` of index ``n``."""

    x1a: float
    x1b: float
    x2a: float
    x2b: float
    n: float

    def __post_init__(self):
        if not (self.x1b > self.x1a and self.x2b > self.x2a):
            raise ValueError(f"degenerate inclusion rectangle {self}")
        if not self.n > 0:
            raise ValueError("refractive index must be positive")


@dataclass(frozen=True)
class Region:
    """An x-uniform strip above a flat piece of ground.

    ``layers`` holds ``(x2a, x2b, n)`` triples sorted bottom to top; the
    index is 1 wherever no layer is listed.
    """

    index: int
    x_left: float
    x_right: float
    ground: float
    layers: tuple[tuple[float, float, float], ...] = field(default_factory=tuple)

    @property
    def is_left_infinite(self) -> bool:
        return self.x_left == -math.inf

    @property
    def is_right_infinite(self) -> bool:
        return self.x_right == math.inf

    @property
    def layer_top(self) -> float:
        """Height above which the medium is the homogeneous background."""
        return max([self.ground] + [top for _, top, _ in self.layers])

    @property
    def is_homogeneous(self) -> bool:
        return all(n == 1.0 for _, _, n in self.layers)

    def index_at(self, x2):
        """Refractive index profile evaluated at height(s) ``x2``."""
        x2 = np.asarray(x2, dtype=float)
        out = np.ones_like(x2)
        for a, b, n in self.layers:
            out = np.where((x2 >= a) & (x2 < b), n, out)
        return out

    def interfaces(self) -> list[float]:
        """Heights where the index may jump."""
        hs = set()
        for a, b, _ in self.layers:
            hs.update((a, b))
        return sorted(h for h in hs if h > self.ground)

    def contains_x1(self, x1: float) -> bool:
        return self.x_left <= x1 <= self.x_right


def classify_point(x, theta: float, h: float, anchor=(0.0, 0.0)) -> SectorLabel:
    """Sector of ``x`` with respect to the rays L and L'.

    L leaves ``anchor`` in direction ``(cos theta, sin theta)``; L' is L shifted
    down by ``h / cos(theta)**2``.  Points exactly on a ray get the label of
    the sector to the left of that ray.  For ``theta > pi/2`` the point is
    mirrored through ``x1 -> -x1`` and the labels L and R are exchanged, so
    ``"L"`` always marks the sector governed by the upper ground.
    """
    if not 0.0 < theta < math.pi:
        raise ValueError(f"incident angle must lie in (0, pi), got {theta}")
    if h < 0:
        raise ValueError("step height must be non-negative")
    if theta == math.pi / 2:
        raise ValueError("normal incidence has no sector structure")
    x1 = float(x[0]) - anchor[0]
    x2 = float(x[1]) - anchor[1]
    if theta > math.pi / 2:
        label = classify_point((-x1, x2), math.pi - theta, h)
        return {"L": "R", "R": "L", "M": "M"}[label]
    t = math.tan(theta)
    if x2 >= x1 * t:
        return "L"
    if x2 >= x1 * t - h / math.cos(theta) ** 2:
        return "M"
    return "R"


def build_regions(surface: SteppedSurface, inclusions: Sequence[Inclusion] = ()) -> list[Region]:
    """Split the half-plane above ``surface`` into x-uniform regions.

    Inclusion edges become additional breakpoints, so every returned region
    has a single ground level and an x-independent index profile.
    """
    inclusions = list(inclusions)
    for i, a in enumerate(inclusions):
        for b in inclusions[i + 1:]:
            if a.x1a < b.x1b and b.x1a < a.x1b and a.x2a < b.x2b and b.x2a < a.x2b:
                raise ValueError(f"overlapping inclusions {a} and {b}")

    cuts = set(surface.breakpoints)
    for inc in inclusions:
        cuts.update((inc.x1a, inc.x1b))
    cuts = sorted(cuts)
    edges = [-math.inf] + cuts + [math.inf]

    regions = []
    for r in range(len(edges) - 1):
        xl, xr = edges[r], edges[r + 1]
        if math.isinf(xl):
            probe = xr - 1.0
        elif math.isinf(xr):
            probe = xl + 1.0
        else:
            probe = 0.5 * (xl + xr)
        ground = surface.ground_heights[surface.region_index(probe)]
        layers = []
        for inc in inclusions:
            if inc.x1a <= probe <= inc.x1b:
                if inc.x2a < ground - 1e-12:
                    raise ValueError(f"inclusion {inc} reaches below the ground")
                layers.append((max(inc.x2a, ground), inc.x2b, float(inc.n)))
        layers.sort()
        regions.append(Region(r, xl, xr, ground, tuple(layers)))
    return regions


def locate_region(regions: Sequence[Region], x) -> Region:
    """Region that owns point ``x``.

    On a shared vertical line the left region is preferred when the point is
    above its ground, otherwise the right one.
    """
    x1, x2 = float(x[0]), float(x[1])
    for i, reg in enumerate(regions):
        if reg.x_left < x1 < reg.x_right:
            return reg
        if x1 == reg.x_right:
            nxt = regions[i + 1]
            return reg if x2 >= reg.ground else nxt
    raise ValueError(f"no region contains x1={x1}")
