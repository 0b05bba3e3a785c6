"""Low-energy scattering of the rescaled interaction.

Three routes to the scattering length of kappa/2 * V:

* ``scattering_length_ode``: integrate the radial zero-energy equation
  u'' = (kappa/2) V u outward and read a = R - u(R)/u'(R) at the support
  edge; the profile f = u/r then satisfies the sum rule
  8*pi*a = kappa * integral V f.
* ``born_series``: the perturbative expansion in kappa, evaluated in position
  space through the radial Green's function of -Laplace.
* the finite-ball Neumann problem ``solve_neumann``: lowest eigenpair of
  -u'' + (kappa/2) V u = lam u on (0, L] with u(0) = 0 and the Neumann
  condition f'(L) = 0 for f = u/r, normalized to f(L) = 1.  Its eigenvalue
  obeys lam ~ 3a/L^3 and its deficit w = 1 - f generates the pair
  correlations used everywhere downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from bogoscope.potentials import RadialPotential


# ----------------------------------------------------------------------
# zero-energy ODE route
# ----------------------------------------------------------------------

@dataclass
class ZeroEnergySolution:
    """Outward zero-energy radial solution and the extracted length."""

    potential: RadialPotential
    kappa: float
    scattering_length: float
    r: np.ndarray          # RK4 grid on [0, support_radius]
    u: np.ndarray          # u(r) with u(0)=0, u'(0)=1
    du_end: float          # u'(support_radius)
    sum_rule_residual: float  # |kappa*int(Vf) - 8*pi*a| / (8*pi*max(|a|,eps))

    def f(self, r) -> np.ndarray:
        """Normalized profile f(r) -> 1 - a/r outside the support."""
        r = np.asarray(r, dtype=float)
        R = self.r[-1]
        inside = np.interp(r, self.r[1:], self.u[1:] / self.r[1:]) / self.du_end
        outside = 1.0 - self.scattering_length / np.maximum(r, 1e-300)
        return np.where(r <= R, inside, outside)


def _rk4_radial(potential: RadialPotential, kappa: float, n_steps: int):
    """Fixed-step RK4 for u'' = (kappa/2) V(r) u, u(0)=0, u'(0)=1."""
    R = potential.support_radius
    h = R / n_steps
    r = np.linspace(0.0, R, n_steps + 1)
    u = np.empty(n_steps + 1)
    u[0] = 0.0
    y = np.array([0.0, 1.0])  # (u, u')

    def rhs(ri, yi):
        return np.array([yi[1], 0.5 * kappa * float(potential(ri)) * yi[0]])

    # stage abscissae come from the grid nodes themselves so the last stage
    # sits exactly on R; forming ri + h can overshoot by an ulp and sample
    # the potential on the wrong side of its support edge
    for i in range(n_steps):
        ri, rn = r[i], r[i + 1]
        rm = 0.5 * (ri + rn)
        k1 = rhs(ri, y)
        k2 = rhs(rm, y + 0.5 * h * k1)
        k3 = rhs(rm, y + 0.5 * h * k2)
        k4 = rhs(rn, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        u[i + 1] = y[0]
    return r, u, y[1]


def _simpson(values: np.ndarray, x: np.ndarray) -> float:
    from scipy.integrate import simpson

    return float(simpson(values, x=x))


def scattering_length_ode(potential: RadialPotential, kappa: float,
                          n_steps: int = 20000) -> ZeroEnergySolution:
    """Scattering length of (kappa/2)V from the zero-energy radial equation.

    n_steps fixes the RK4 grid on [0, support_radius]; halving the step
    changes the result at the ~h^4 level.  kappa = 0 gives length 0 exactly.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if n_steps < 16 or n_steps % 2:
        raise ValueError("n_steps must be an even integer >= 16")
    R = potential.support_radius
    if kappa == 0.0:
        r = np.linspace(0.0, R, n_steps + 1)
        return ZeroEnergySolution(potential, 0.0, 0.0, r, r.copy(), 1.0, 0.0)

    r, u, du = _rk4_radial(potential, kappa, n_steps)
    a = R - u[-1] / du
    # sum rule: kappa * int V f dx = 8*pi*a with f = u/(r u'(R))
    integrand = kappa * 4.0 * np.pi * potential(r) * u * r / du
    lhs = _simpson(integrand, r)
    res = abs(lhs - 8.0 * np.pi * a) / (8.0 * np.pi * max(abs(a), 1e-300))
    return ZeroEnergySolution(potential, kappa, a, r, u, du, res)


def soft_sphere_length(v0: float, radius: float, kappa: float) -> float:
    """Closed form for the soft sphere: R(1 - tanh(k0 R)/(k0 R)), k0=sqrt(kappa v0/2)."""
    if kappa * v0 == 0.0:
        return 0.0
    k0 = np.sqrt(kappa * v0 / 2.0)
    x = k0 * radius
    if x < 0.05:  # 1 - tanh(x)/x cancels to x^2/3; use its series instead
        x2 = x * x
        s = x2 * (1.0 / 3.0 + x2 * (-2.0 / 15.0 + x2 * (17.0 / 315.0
                                                        - x2 * 62.0 / 2835.0)))
        return radius * s
    return radius * (1.0 - np.tanh(x) / x)


# ----------------------------------------------------------------------
# Born series (position-space radial evaluation)
# ----------------------------------------------------------------------

@dataclass
class BornSeries:
    """Perturbative scattering length: value = sum of terms, term j ~ kappa^(j+1)."""

    kappa: float
    terms: np.ndarray       # contributions to the length, orders kappa^1..kappa^k_max
    value: float
    chain_integrals: np.ndarray  # I_k = int V [(-Lap)^{-1} V]^k 1, k = 0..k_max-1


def _greens_apply(r: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """phi = (-Laplace)^{-1} rho for radial rho supported on the grid.

    phi(r) = (1/r) int_0^r s^2 rho ds + int_r^R s rho ds, cumulative Simpson.
    """
    from scipy.integrate import cumulative_simpson

    s2 = np.concatenate([[0.0], cumulative_simpson(r * r * rho, x=r)])
    s1 = np.concatenate([[0.0], cumulative_simpson(r * rho, x=r)])
    inner = np.empty_like(r)
    inner[0] = 0.0
    inner[1:] = s2[1:] / r[1:]
    outer = s1[-1] - s1
    phi = inner + outer
    phi[0] = s1[-1]  # limit r->0: int_0^R s rho ds
    return phi


def born_series(potential: RadialPotential, kappa: float, k_max: int,
                n_grid: int = 6000) -> BornSeries:
    """First k_max orders in kappa of the scattering length of (kappa/2)V.

    8*pi*a = sum_{k>=0} kappa(-kappa/2)^k I_k with
    I_k = int V [(-Laplace)^{-1} V]^k 1; k_max = 1 is the first Born
    approximation kappa*V^(0)/(8*pi).  Supports k_max <= 3.
    """
    if not 1 <= k_max <= 3:
        raise ValueError("k_max must be 1, 2 or 3")
    R = potential.support_radius
    r = np.linspace(0.0, R, n_grid + 1)
    v = potential(r)
    chain = np.empty(k_max)
    terms = np.empty(k_max)
    g = np.ones_like(r)  # [(-Lap)^{-1} V]^k 1
    for k in range(k_max):
        chain[k] = 4.0 * np.pi * _simpson(r * r * v * g, r)
        terms[k] = kappa * (-0.5 * kappa) ** k * chain[k] / (8.0 * np.pi)
        if k + 1 < k_max:
            g = _greens_apply(r, v * g)
    return BornSeries(kappa, terms, float(terms.sum()), chain)


# ----------------------------------------------------------------------
# Neumann problem on the ball of radius L
# ----------------------------------------------------------------------

@dataclass
class NeumannSolution:
    """Lowest Neumann eigenpair on the ball, plus deficit-profile transforms.

    The radial unknown is u = r*f with f(L) = 1; the deficit is
    w = 1 - f, stored through g = r*w = r - u (so g(0) = g(L) = 0 and
    g' (L) = 0).  Radial transforms use the plain convention
    h^(z) = (4*pi/z) * int h(r) r sin(zr) dr.
    """

    potential: RadialPotential
    kappa: float
    ball_radius: float
    eigenvalue: float
    r: np.ndarray            # graded grid including r=0 and r=L
    u: np.ndarray            # normalized so u(L) = L
    _wts: np.ndarray = field(repr=False)       # composite weights on the full grid
    _wts_v: np.ndarray = field(repr=False)     # weights restricted to the potential support

    # -- derived profiles ---------------------------------------------

    @property
    def g(self) -> np.ndarray:
        """g(r) = r * w(r) = r - u(r)."""
        return self.r - self.u

    def w(self, r) -> np.ndarray:
        """Deficit w = 1 - u/r (w -> 1 - u'(0) at the origin)."""
        r = np.asarray(r, dtype=float)
        gi = np.interp(r, self.r, self.g)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r > 0, gi / np.maximum(r, 1e-300),
                           1.0 - (self.u[1] / self.r[1]))
        return np.where(r > self.ball_radius, 0.0, out)

    # -- radial sine transforms ----------------------------------------

    def sine_integral(self, z, values: np.ndarray, support_only: bool = False) -> np.ndarray:
        """S(z) = int values(r) sin(z r) dr on the solver grid, batched in z."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        wv = (self._wts_v if support_only else self._wts) * values
        out = np.empty_like(z)
        chunk = max(1, int(4e6 / len(self.r)))
        for i in range(0, len(z), chunk):
            zz = z[i:i + chunk]
            out[i:i + chunk] = np.sin(np.outer(zz, self.r)) @ wv
        return out

    def _radial_hat(self, z, values: np.ndarray, support_only: bool = False) -> np.ndarray:
        """(4*pi/z) int values(r) sin(zr) dr with the z->0 limit 4*pi*int values*r."""
        z = np.asarray(z, dtype=float)
        scalar = z.ndim == 0
        z = np.atleast_1d(np.abs(z))
        wts = self._wts_v if support_only else self._wts
        out = np.empty_like(z)
        small = z * self.ball_radius < 1e-6
        if np.any(small):
            m1 = wts @ (values * self.r)
            m3 = wts @ (values * self.r**3)
            out[small] = 4.0 * np.pi * (m1 - z[small] ** 2 * m3 / 6.0)
        if np.any(~small):
            zz = z[~small]
            out[~small] = 4.0 * np.pi * self.sine_integral(zz, values, support_only) / zz
        return float(out[0]) if scalar else out

    def w_hat(self, z):
        """Transform of the deficit w (plain convention, compact support)."""
        return self._radial_hat(z, self.g)

    def vf_hat(self, z):
        """Transform of V*f; vf_hat(0) = int V f -> 8*pi*a up to O(a/L)."""
        return self._radial_hat(z, self.potential(self.r) * self.u, support_only=True)

    def vw_hat(self, z):
        """Transform of V*w."""
        return self._radial_hat(z, self.potential(self.r) * self.g, support_only=True)

    # -- exact radial integrals (Parseval inputs) -----------------------

    def vf_integral(self) -> float:
        return float(self.vf_hat(0.0))

    def g_norm2(self) -> float:
        """int g^2 dr = ||w||_{L2(R^3)}^2 / (4*pi)."""
        return float(self._wts @ self.g**2)

    def gprime_norm2(self) -> float:
        """int g'^2 dr = ||grad w||_{L2(R^3)}^2 / (4*pi)."""
        gp = np.gradient(self.g, self.r)
        return float(self._wts @ gp**2)

    def vw2_integral(self) -> float:
        """int V w^2 dx = 4*pi int V(r) g(r)^2 dr (g = r*w)."""
        vals = self.potential(self.r) * self.g**2
        return 4.0 * np.pi * float(self._wts_v @ vals)

    def vw_integral(self) -> float:
        """int V w dx."""
        vals = self.potential(self.r) * self.g * self.r
        return 4.0 * np.pi * float(self._wts_v @ vals)


def _simpson_weights(r: np.ndarray, blocks: list[tuple[int, int]]) -> np.ndarray:
    """Composite Simpson weights; each block [i0, i1] has uniform spacing and even length."""
    w = np.zeros_like(r)
    for i0, i1 in blocks:
        n = i1 - i0
        h = (r[i1] - r[i0]) / n
        pat = np.ones(n + 1)
        pat[1:-1:2] = 4.0
        pat[2:-1:2] = 2.0
        w[i0:i1 + 1] += pat * h / 3.0
    return w


def solve_neumann(potential: RadialPotential, kappa: float, ball_radius: float,
                  fine_points: int = 2500, coarse_points: int | None = None,
                  tol: float = 1e-10, max_iter: int = 200) -> NeumannSolution:
    """Lowest eigenpair of -u'' + (kappa/2)Vu = lam*u, u(0)=0, f'(L)=0, f=u/r.

    Linear finite elements in f on a graded grid (fine inside the potential
    support, coarse outside) and inverse iteration with a sparse LU
    factorization; iteration stops when the Rayleigh quotient is stable to
    `tol` relatively.  The profile is normalized to f(L) = 1.
    """
    L = float(ball_radius)
    Rs = potential.support_radius
    if L <= Rs:
        raise ValueError(f"ball radius {L} must exceed the potential support {Rs}")
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if coarse_points is None:
        coarse_points = int(min(120000, max(4000, 24.0 * L)))
    fine_points += fine_points % 2
    coarse_points += coarse_points % 2

    r_fine = np.linspace(0.0, Rs, fine_points + 1)
    hf = Rs / fine_points
    hc = (L - Rs) / coarse_points
    # geometric ramp between the two spacings keeps the 3-point stencil
    # second-order accurate (spacing varies by <= 4% per step)
    ramp = [Rs]
    hh = hf
    while hh * 1.04 < hc and ramp[-1] + hh * 1.04 < Rs + 0.2 * (L - Rs):
        hh *= 1.04
        ramp.append(ramp[-1] + hh)
    n_left = int(np.ceil((L - ramp[-1]) / hc))
    r_coarse = np.linspace(ramp[-1], L, max(n_left, 2) + 1)
    r = np.concatenate([r_fine, np.array(ramp[1:]), r_coarse[1:]])
    n = len(r)
    # Simpson weights need uniform even blocks; build trapezoid weights on the
    # ramp (its contribution is tiny) and Simpson on the uniform blocks
    nc = len(r_coarse) - 1
    blocks = [(0, fine_points)]
    if nc % 2:
        r = np.concatenate([r[:-1], [r[-2] + (L - r[-2]) / 2.0, L]])
        n = len(r)
        nc += 1
    blocks.append((n - 1 - nc, n - 1))
    wts = _simpson_weights(r, blocks)
    wts_v = _simpson_weights(r, [(0, fine_points)])
    i0, i1 = fine_points, n - 1 - nc
    if i1 > i0:  # trapezoid on the geometric ramp
        hseg = np.diff(r[i0:i1 + 1])
        tr = np.zeros(i1 - i0 + 1)
        tr[:-1] += 0.5 * hseg
        tr[1:] += 0.5 * hseg
        wts[i0:i1 + 1] += tr

    # P1 finite elements in the profile f = u/r with weight r^2:
    # int r^2 f'g' + (kappa/2) int V r^2 fg = lam int r^2 fg.  In this
    # variable the Neumann condition f'(L) = 0 is natural, the quadratic
    # form has no boundary cancellation (every term is nonnegative), and
    # constants are an exact floating-point null vector of the stiffness,
    # so eigenvalues of order 1e-7 stay resolvable.  A formulation in u
    # itself needs a Robin term -u(L)^2/L that cancels the stiffness to
    # ~1e-11 absolute and buries the eigenvalue in entry roundoff.
    h = np.diff(r)
    # stiffness: f' is constant per element, int_e r^2 = (rb^3 - ra^3)/3
    se = (r[1:] ** 3 - r[:-1] ** 3) / (3.0 * h * h)
    diag_a = np.zeros(n)
    diag_a[:-1] += se
    diag_a[1:] += se
    off_a = -se.copy()
    # mass and potential terms via 3-point Gauss per element (exact for
    # r^2 phi phi and, with V linear on the element, for V r^2 phi phi;
    # Gauss nodes are interior so nodal jumps of V are never sampled)
    gpts = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
    gwts = np.array([5.0, 8.0, 5.0]) / 18.0
    diag_m = np.zeros(n)
    off_m = np.zeros(n - 1)
    diag_p = np.zeros(n)
    off_p = np.zeros(n - 1)
    for t, wg in zip(gpts, gwts):
        rg = r[:-1] + t * h
        base = wg * h * rg * rg
        pot = 0.5 * kappa * potential(rg) * base
        diag_m[:-1] += base * (1.0 - t) ** 2
        diag_m[1:] += base * t**2
        off_m += base * t * (1.0 - t)
        diag_p[:-1] += pot * (1.0 - t) ** 2
        diag_p[1:] += pot * t**2
        off_p += pot * t * (1.0 - t)
    A = sparse.diags([off_a + off_p, diag_a + diag_p, off_a + off_p],
                     [-1, 0, 1], format="csc")
    M = sparse.diags([off_m, diag_m, off_m], [-1, 0, 1], format="csr")

    # without a potential term the stiffness keeps its constant null vector
    # and the profile is exactly free: f = 1, lam = 0
    if kappa == 0.0 or not (diag_p.any() or off_p.any()):
        u = r.copy()
        lam = 0.0
    else:
        lu = splu(A)
        x = np.ones(n)
        lam_old = np.inf
        lam = np.nan
        for _ in range(max_iter):
            x_prev = x
            x = lu.solve(M @ x)
            x /= np.sqrt(x @ (M @ x))
            lam = float(x @ (A @ x))
            if abs(lam - lam_old) <= tol * max(abs(lam), 1e-300):
                break
            # at box-scale radii lam ~ 3a/L^3 sinks below the Rayleigh
            # roundoff floor while the iterate still contracts by lam1/lam2
            # per step; vector stagnation is the stop that remains meaningful
            if np.max(np.abs(x - x_prev)) <= 1e-13 * np.max(np.abs(x)):
                break
            lam_old = lam
        else:
            raise RuntimeError("inverse iteration did not converge")
        u = r * x
        u *= L / u[-1]

    return NeumannSolution(potential, kappa, L, lam, r, u, wts, wts_v)


# ----------------------------------------------------------------------
# box-scale solution: ball radius N*ell, with the infinite-volume length
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ScatteringSolution:
    """Neumann profile at the box scale plus the infinite-volume length.

    The ball radius is n_particles * ell with ell < 1/2, so the profile and
    its deficit live inside half the rescaled box.  `a0` is the scattering
    length of kappa*V on all of space (ODE route); the eigenvalue satisfies
    lam ~ 3*a0/(n_particles*ell)^3 up to O(a0/(N*ell)) corrections.
    """

    potential: RadialPotential
    kappa: float
    n_particles: int
    ell: float
    a0: float
    neumann: NeumannSolution = field(repr=False)

    @property
    def ball_radius(self) -> float:
        return self.neumann.ball_radius

    @property
    def eigenvalue(self) -> float:
        return self.neumann.eigenvalue

    @property
    def r(self) -> np.ndarray:
        return self.neumann.r

    @property
    def f_values(self) -> np.ndarray:
        """f = u/r on the grid, with the r->0 limit at the first node."""
        neu = self.neumann
        out = np.empty_like(neu.u)
        out[1:] = neu.u[1:] / neu.r[1:]
        out[0] = neu.u[1] / neu.r[1]
        return out

    @property
    def w_values(self) -> np.ndarray:
        """Deficit w = 1 - f on the grid."""
        return 1.0 - self.f_values

    def f(self, r) -> np.ndarray:
        """Profile evaluated anywhere; extended by 1 outside the ball."""
        r = np.asarray(r, dtype=float)
        return 1.0 - self.neumann.w(r)

    def w(self, r) -> np.ndarray:
        """Deficit evaluated anywhere; extended by 0 outside the ball."""
        return self.neumann.w(r)

    def w_hat(self, z):
        """Radial transform of the deficit (plain convention)."""
        return self.neumann.w_hat(z)


def solve_scattering(potential: RadialPotential, kappa: float, n_particles: int,
                     ell: float, fine_points: int = 2500,
                     coarse_points: int | None = None,
                     ode_steps: int = 20000) -> ScatteringSolution:
    """Neumann problem on the ball of radius n_particles*ell, plus a0.

    Thin wrapper over ``solve_neumann`` at ball_radius = n_particles * ell
    with the infinite-volume scattering length attached (ODE route), which
    downstream consumers use for eigenvalue and correlation asymptotics.
    """
    n_particles = int(n_particles)
    if n_particles < 1:
        raise ValueError("n_particles must be a positive integer")
    if not 0.0 < ell < 0.5:
        raise ValueError("ell must lie in (0, 1/2)")
    neu = solve_neumann(potential, kappa, n_particles * ell,
                        fine_points=fine_points, coarse_points=coarse_points)
    a0 = scattering_length_ode(potential, kappa, n_steps=ode_steps).scattering_length
    return ScatteringSolution(potential, kappa, n_particles, ell, a0, neu)
