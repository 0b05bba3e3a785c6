"""Radial interaction potentials and their Fourier transforms.

Potentials are nonnegative, spherically symmetric and compactly supported.
The transform convention carries no prefactor,

    V^(k) = integral V(x) e^{-ik.x} dx = (4*pi/k) * integral_0^R r V(r) sin(kr) dr,

so V^(0) = integral V.  The soft sphere has the closed form
V^(k) = 4*pi*V0 (sin kR - kR cos kR) / k^3; tabulated potentials are taken as
piecewise-linear in r, whose radial transform integrates in closed form per
segment (exact for the interpolant, well below the 1e-12 budget).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate


def _soft_sphere_shape(x: np.ndarray) -> np.ndarray:
    """(sin x - x cos x)/x^3, stable at small argument."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-3
    xs = x[small]
    # Taylor: 1/3 - x^2/30 + x^4/840
    out[small] = 1.0 / 3.0 - xs**2 / 30.0 + xs**4 / 840.0
    xl = x[~small]
    out[~small] = (np.sin(xl) - xl * np.cos(xl)) / xl**3
    return out


@dataclass(frozen=True)
class RadialPotential:
    """Repulsive radial potential with compact support.

    kind 'soft_sphere': V(r) = v0 on [0, radius].
    kind 'tabulated':   piecewise-linear through (grid, values), zero beyond
    the last grid point; the grid must be strictly increasing and the values
    nonnegative.
    """

    kind: str
    v0: float = 0.0
    radius: float = 0.0
    grid: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "soft_sphere":
            if self.v0 < 0 or self.radius <= 0:
                raise ValueError("soft sphere needs v0 >= 0 and radius > 0")
        elif self.kind == "tabulated":
            g = np.asarray(self.grid, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if g.ndim != 1 or v.shape != g.shape or len(g) < 2:
                raise ValueError("tabulated potential needs matching 1-d grid and values")
            if not np.all(np.diff(g) > 0):
                raise ValueError("tabulated grid must be strictly increasing")
            if g[0] < 0:
                raise ValueError("tabulated grid must start at r >= 0")
            if np.any(v < 0):
                raise ValueError("potential values must be nonnegative")
            object.__setattr__(self, "grid", g)
            object.__setattr__(self, "values", v)
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    # -- real space -------------------------------------------------------

    @property
    def support_radius(self) -> float:
        if self.kind == "soft_sphere":
            return self.radius
        return float(self.grid[-1])

    def __call__(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        if self.kind == "soft_sphere":
            return np.where(r <= self.radius, self.v0, 0.0)
        out = np.interp(r, self.grid, self.values, left=self.values[0], right=0.0)
        return np.where(r <= self.grid[-1], out, 0.0)

    # -- Fourier space ----------------------------------------------------

    def fourier(self, k) -> np.ndarray:
        """V^(k) for scalar or array k (even in k)."""
        k = np.abs(np.asarray(k, dtype=float))
        scalar = k.ndim == 0
        k = np.atleast_1d(k)
        if self.kind == "soft_sphere":
            out = 4.0 * np.pi * self.v0 * self.radius**3 * _soft_sphere_shape(k * self.radius)
        else:
            out = _tabulated_fourier(self.grid, self.values, k)
        return float(out[0]) if scalar else out

    def fourier_quadrature(self, k: float, epsabs: float = 1e-12) -> float:
        """Adaptive-quadrature transform; slow oracle for the fast path."""
        k = abs(float(k))
        R = self.support_radius
        if k * R < 1e-8:
            val, _ = integrate.quad(lambda r: r * r * self(r), 0.0, R,
                                    epsabs=epsabs, epsrel=1e-13, limit=400)
            return 4.0 * np.pi * val
        # sin-weighted adaptive rule handles large kR without breakpoint lists
        val, _ = integrate.quad(lambda r: r * self(r), 0.0, R, weight="sin", wvar=k,
                                epsabs=epsabs, epsrel=1e-13, limit=max(200, int(10 * k * R)))
        return 4.0 * np.pi * val / k

    def integral(self) -> float:
        """integral V(x) dx = V^(0)."""
        return float(self.fourier(0.0))


def _tabulated_fourier(grid: np.ndarray, values: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Exact radial transform of the piecewise-linear interpolant.

    On each segment V(r) = a + b r, so r V(r) sin(kr) integrates in closed
    form; the small-k branch switches to the series in (kr) to avoid
    cancellation.
    """
    r0, r1 = grid[:-1], grid[1:]
    a = values[:-1] - (values[1:] - values[:-1]) / (r1 - r0) * r0
    b = (values[1:] - values[:-1]) / (r1 - r0)

    k = k.astype(float)
    out = np.zeros_like(k)
    small = k * grid[-1] < 1e-3

    if np.any(~small):
        kk = k[~small][:, None]
        # I1 = int r sin(kr) dr, I2 = int r^2 sin(kr) dr on [r0, r1]
        def I1(r):
            return (np.sin(kk * r) - kk * r * np.cos(kk * r)) / kk**2

        def I2(r):
            return (2 * kk * r * np.sin(kk * r) + (2 - kk**2 * r**2) * np.cos(kk * r)) / kk**3

        seg = a[None, :] * (I1(r1[None, :]) - I1(r0[None, :])) \
            + b[None, :] * (I2(r1[None, :]) - I2(r0[None, :]))
        out[~small] = 4.0 * np.pi * seg.sum(axis=1) / k[~small]

    if np.any(small):
        ks = k[small][:, None]
        # int r^2 V (1 - (kr)^2/6 + (kr)^4/120) dr, per-segment moments of r^n V
        def mom(n):
            # int_{r0}^{r1} r^n (a + b r) dr
            return (a[None, :] * (r1**(n + 1) - r0**(n + 1)) / (n + 1)
                    + b[None, :] * (r1**(n + 2) - r0**(n + 2)) / (n + 2))

        m2, m4, m6 = mom(2), mom(4), mom(6)
        out[small] = 4.0 * np.pi * (
            m2.sum(axis=1) - ks[:, 0]**2 * m4.sum(axis=1) / 6.0
            + ks[:, 0]**4 * m6.sum(axis=1) / 120.0
        )
    return out


def soft_sphere(v0: float, radius: float) -> RadialPotential:
    return RadialPotential(kind="soft_sphere", v0=float(v0), radius=float(radius))


def tabulated(grid, values) -> RadialPotential:
    return RadialPotential(kind="tabulated", grid=np.asarray(grid, float),
                           values=np.asarray(values, float))


def potential_fourier(potential: RadialPotential, k):
    """Module-level alias for RadialPotential.fourier."""
    return potential.fourier(k)
