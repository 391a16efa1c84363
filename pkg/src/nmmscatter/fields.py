"""Special functions, incident waves and per-region reference fields.

A reference field ``W`` is the exact total field of the incident wave over a
flat sound-soft ground at the region's own ground level (including any
horizontal layering of the region).  The mode-matching unknown in a region is
``u_tot - W``.  Reference fields accept complex heights so they can be
evaluated at PML-stretched coordinates.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .geometry import Region

__all__ = [
    "hankel1",
    "green",
    "green_field",
    "PlaneWave",
    "PointSource",
    "ReferenceField",
    "reference_field",
    "interface_jump_data",
]

TWO_PI = 2.0 * math.pi


def hankel1(order: int, x):
    """Hankel function of the first kind ``H_order^(1)(x)`` for real ``x > 0``.

    Only orders 0 and 1 are supported.
    """
    if order not in (0, 1):
        raise ValueError("only orders 0 and 1 are supported")
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise ValueError("hankel1 is singular at x <= 0")
    out = special.hankel1(order, xa)
    return out if out.ndim else complex(out)


def _g(k, dx1, dx2):
    """Free-space Green's function and its x-gradient for (possibly complex) offsets."""
    r = np.sqrt(dx1 * dx1 + dx2 * dx2)
    kr = k * r
    val = 0.25j * special.hankel1(0, kr)
    dr = -0.25j * k * special.hankel1(1, kr)
    return val, dr * dx1 / r, dr * dx2 / r


def green(k: float, x, z):
    """``G(x, z) = (i/4) H_0^(1)(k |x - z|)`` and its gradient with respect to ``x``."""
    dx1 = float(x[0]) - float(z[0])
    dx2 = float(x[1]) - float(z[1])
    if dx1 == 0.0 and dx2 == 0.0:
        raise ValueError("Green's function is singular at x == z")
    val, g1, g2 = _g(k, dx1, dx2)
    return complex(val), np.array([complex(g1), complex(g2)])


def green_field(k, x1, x2, z):
    """Vectorised ``G`` and ``dG/dx1``; ``x2`` may be complex (stretched)."""
    val, g1, _ = _g(k, np.asarray(x1) - z[0], np.asarray(x2) - z[1])
    return val, g1


@dataclass(frozen=True)
class PlaneWave:
    """``u_in = exp(i(alpha x1 - beta x2))`` arriving at angle ``theta`` from the x1-axis."""

    theta: float
    k: float = TWO_PI

    def __post_init__(self):
        if not 0.0 < self.theta < math.pi:
            raise ValueError("incident angle must lie in (0, pi)")
        if not self.k > 0:
            raise ValueError("wavenumber must be positive")

    @property
    def alpha(self) -> float:
        return self.k * math.cos(self.theta)

    @property
    def beta(self) -> float:
        return self.k * math.sin(self.theta)

    def c_h(self, h: float) -> complex:
        return cmath.exp(2j * self.beta * h)

    def __call__(self, x1, x2):
        return np.exp(1j * (self.alpha * np.asarray(x1) - self.beta * np.asarray(x2)))


@dataclass(frozen=True)
class PointSource:
    """Cylindrical wave ``G(x, z)`` emitted from ``z``."""

    z: tuple[float, float]
    k: float = TWO_PI

    def __post_init__(self):
        object.__setattr__(self, "z", (float(self.z[0]), float(self.z[1])))
        if not self.k > 0:
            raise ValueError("wavenumber must be positive")

    def __call__(self, x1, x2):
        return green_field(self.k, x1, x2, self.z)[0]


class ReferenceField:
    """Total field of the incident wave over a flat, horizontally layered ground.

    ``value`` and ``dx1`` evaluate ``W`` and ``dW/dx1``.  ``reflected`` returns
    ``W`` minus the incident wave and is only meaningful where both are
    defined (above the layers).
    """

    def __init__(self, region: Region, inc):
        self.region = region
        self.inc = inc
        self.ground = region.ground
        if isinstance(inc, PlaneWave):
            self._setup_plane()
        elif isinstance(inc, PointSource):
            if not region.is_homogeneous:
                if region.x_left < inc.z[0] < region.x_right:
                    raise NotImplementedError(
                        "layered source regions need a modal reference field"
                    )
            if abs(inc.z[1] - region.ground) == 0.0:
                raise ValueError("point source lies on the ground line")
        else:
            raise TypeError(f"unknown incidence {inc!r}")

    # plane wave over layers: y'' + (k^2 n^2 - alpha^2) y = 0, y(g) = 0
    def _setup_plane(self):
        inc, reg = self.inc, self.region
        k, alpha, beta = inc.k, inc.alpha, inc.beta
        heights = [reg.ground] + reg.interfaces()
        top = reg.layer_top
        heights = sorted(set(h for h in heights if h <= top))
        if heights[-1] != top:
            heights.append(top)
        segs = []
        y, dy = 0.0 + 0j, 1.0 + 0j
        for a, b in zip(heights, heights[1:]):
            n = float(reg.index_at(0.5 * (a + b)))
            kap = cmath.sqrt(k * k * n * n - alpha * alpha)
            segs.append((a, b, kap, y, dy))
            y, dy = _propagate(kap, b - a, y, dy)
        self._segs = segs
        self._top = top
        # above the layers: W = C (e^{-i beta x2} + R e^{i beta x2}) e^{i alpha x1}
        p = cmath.exp(1j * beta * top) * (1j * beta * y - dy) / (2j * beta)
        q = cmath.exp(-1j * beta * top) * (1j * beta * y + dy) / (2j * beta)
        self._p = p
        self.reflection = q / p

    def _profile(self, x2):
        x2 = np.asarray(x2)
        shape = x2.shape
        x2 = np.atleast_1d(x2)
        inc = self.inc
        out = np.exp(-1j * inc.beta * x2) + self.reflection * np.exp(1j * inc.beta * x2)
        xr = np.real(x2)
        for a, b, kap, y0, dy0 in self._segs:
            mask = (xr >= a) & (xr <= b)
            if np.any(mask):
                yy, _ = _propagate(kap, x2[mask] - a, y0, dy0)
                out[mask] = yy / self._p
        return out.reshape(shape)

    def value(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2)
        if isinstance(self.inc, PlaneWave):
            x1, x2 = np.broadcast_arrays(x1, x2)
            return np.exp(1j * self.inc.alpha * x1) * self._profile(x2)
        if not self.region.is_homogeneous:
            return np.zeros(np.broadcast(x1, x2).shape, dtype=complex)
        z = self.inc.z
        zi = (z[0], 2.0 * self.ground - z[1])
        return green_field(self.inc.k, x1, x2, z)[0] - green_field(self.inc.k, x1, x2, zi)[0]

    def dx1(self, x1, x2):
        if isinstance(self.inc, PlaneWave):
            return 1j * self.inc.alpha * self.value(x1, x2)
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2)
        if not self.region.is_homogeneous:
            return np.zeros(np.broadcast(x1, x2).shape, dtype=complex)
        z = self.inc.z
        zi = (z[0], 2.0 * self.ground - z[1])
        return green_field(self.inc.k, x1, x2, z)[1] - green_field(self.inc.k, x1, x2, zi)[1]

    def reflected(self, x1, x2):
        """``W - u_in`` with the incident term cancelled analytically."""
        if isinstance(self.inc, PlaneWave):
            x1 = np.asarray(x1, dtype=float)
            x2 = np.asarray(x2)
            return self.reflection * np.exp(1j * (self.inc.alpha * x1 + self.inc.beta * x2))
        return self.value(x1, x2) - self.inc(x1, x2)

    def reflected_dx1(self, x1, x2):
        if isinstance(self.inc, PlaneWave):
            return 1j * self.inc.alpha * self.reflected(x1, x2)
        return self.dx1(x1, x2) - green_field(self.inc.k, x1, x2, self.inc.z)[1]

    @property
    def top(self) -> float:
        """Height above which ``reflected`` is valid."""
        return self.region.layer_top


def _propagate(kap, t, y0, dy0):
    """Advance ``y'' + kap^2 y = 0`` by ``t`` from ``(y0, y0')``."""
    c = np.cos(kap * t)
    s = np.sin(kap * t)
    # sin(kap t)/kap, regular at kap == 0
    s_over = t * np.sinc(kap * t / math.pi) if kap != 0 else t
    return y0 * c + dy0 * s_over, -y0 * kap * s + dy0 * c


def reference_field(region: Region, inc) -> ReferenceField:
    """Reference field ``W`` of ``region`` for incidence ``inc``."""
    return ReferenceField(region, inc)


def interface_jump_data(left, right, inc=None, x2=None, b=None):
    """Jumps ``(W_right - W_left, d/dx1 (W_right - W_left))`` on the line ``x1 = b``.

    ``left`` and ``right`` are regions (or prebuilt reference fields); ``b``
    defaults to their shared abscissa.  Heights may be arrays and may be
    complex inside the PML, where the incident terms cancel analytically.
    """
    wl = left if hasattr(left, "reflected") else reference_field(left, inc)
    wr = right if hasattr(right, "reflected") else reference_field(right, inc)
    if b is None:
        b = wl.region.x_right
    x2 = np.asarray(x2)
    xr = np.real(x2)
    if np.any(xr < max(wl.ground, wr.ground) - 1e-12):
        raise ValueError("jump data requested below a ground line")
    top = max(wl.top, wr.top)
    du = np.empty(x2.shape, dtype=complex)
    ddu = np.empty(x2.shape, dtype=complex)
    hi = xr >= top
    lo = ~hi
    if np.any(hi):
        du[hi] = wr.reflected(b, x2[hi]) - wl.reflected(b, x2[hi])
        ddu[hi] = wr.reflected_dx1(b, x2[hi]) - wl.reflected_dx1(b, x2[hi])
    if np.any(lo):
        du[lo] = wr.value(b, x2[lo]) - wl.value(b, x2[lo])
        ddu[lo] = wr.dx1(b, x2[lo]) - wl.dx1(b, x2[lo])
    if du.ndim == 0:
        return complex(du), complex(ddu)
    return du, ddu
