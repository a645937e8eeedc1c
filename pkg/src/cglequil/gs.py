"""
Axisymmetric (Grad-Shafranov) and helical (JFKO) equilibria.

Grad-Shafranov, for Psi(r, z)::

    Psi_rr - Psi_r / r + Psi_zz + I(Psi) I'(Psi) + r^2 P'(Psi) = 0
    B = (Psi_z / r) e_r + (I(Psi) / r) e_phi - (Psi_r / r) e_z

JFKO, for Psi(r, u) with helical coordinate u = z - gamma phi::

    Psi_uu / r^2 + (1/r) [r / (r^2 + gamma^2) Psi_r]_r + I I' / (r^2 + gamma^2)
        + 2 gamma I / (r^2 + gamma^2)^2 + mu P'(Psi) = 0
    B = (Psi_u / r) e_r + B_phi e_phi + B_z e_z
    B_phi = (r I + gamma Psi_r) / (r^2 + gamma^2)
    B_z   = (gamma I - r Psi_r) / (r^2 + gamma^2)

``mu`` is kept as a parameter (default 1, which reduces JFKO to GS at
gamma = 0 after multiplying through by r^2).

Grids are uniform, exclude the axis (r_min > 0) and store Psi with shape
(n_r, n_z).  The solver is red-black SOR on the 5-point stencil.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.special import i0, i1

from .errors import DivergenceError, SingularAxisError
from .fields import CylindricalShell, MhdState, ScalarField, VectorField, cylindrical_basis

Func = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------


@dataclass
class FluxGrid:
    """Psi on a uniform (r, z) or (r, u) grid."""

    r: np.ndarray
    z: np.ndarray
    psi: np.ndarray
    coord: str = "z"
    iterations: int = 0
    residual_norm: float = float("nan")
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.r = np.asarray(self.r, float)
        self.z = np.asarray(self.z, float)
        self.psi = np.asarray(self.psi, float)
        if self.psi.shape != (self.r.size, self.z.size):
            raise ValueError(f"psi shape {self.psi.shape} does not match grid ({self.r.size}, {self.z.size})")
        if np.any(self.r <= 0):
            raise SingularAxisError("flux grids must exclude the axis (r > 0)")
        for name, a in (("r", self.r), ("z", self.z)):
            if a.size >= 2:
                d = np.diff(a)
                if not np.allclose(d, d[0], rtol=1e-9, atol=0):
                    raise ValueError(f"{name} spacing must be uniform")

    @classmethod
    def uniform(cls, r_range, z_range, n_r, n_z, psi=None, coord="z") -> "FluxGrid":
        r = np.linspace(*r_range, n_r)
        z = np.linspace(*z_range, n_z)
        psi = np.zeros((n_r, n_z)) if psi is None else psi
        if callable(psi):
            R, Z = np.meshgrid(r, z, indexing="ij")
            psi = psi(R, Z)
        return cls(r, z, psi, coord)

    @property
    def dr(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0])

    def mesh(self):
        return np.meshgrid(self.r, self.z, indexing="ij")

    def flux_function(self) -> "FluxFunction":
        """Bicubic spline interpolant of Psi with its exact derivatives."""
        spl = RectBivariateSpline(self.r, self.z, self.psi, kx=3, ky=3, s=0)
        return FluxFunction(
            lambda r, z: spl.ev(r, z),
            lambda r, z: spl.ev(r, z, dx=1),
            lambda r, z: spl.ev(r, z, dy=1),
        )


@dataclass(frozen=True)
class FluxFunction:
    """Psi(r, z) (or Psi(r, u)) with first derivatives, all vectorised."""

    psi: Callable
    psi_r: Callable
    psi_z: Callable


@dataclass(frozen=True)
class ProfilePair:
    """I(Psi), P(Psi) and their derivatives."""

    I: Func
    dI: Func
    P: Func
    dP: Func

    def II(self, psi):
        return self.I(psi) * self.dI(psi)

    @classmethod
    def linear(cls, I0: float = 0.0, I1: float = 0.0, P0: float = 0.0, P1: float = 0.0) -> "ProfilePair":
        """I = I0 + I1 Psi, P = P0 + P1 Psi (so I I' and P' are affine)."""
        return cls(
            lambda s: I0 + I1 * np.asarray(s, float),
            lambda s: np.full(np.shape(s), float(I1)),
            lambda s: P0 + P1 * np.asarray(s, float),
            lambda s: np.full(np.shape(s), float(P1)),
        )

    def affine_coefficients(self, probe=(-1.0, 0.0, 1.0)):
        """(a0, a1, b0, b1) with I I' = a0 + a1 Psi and P' = b0 + b1 Psi.

        Raises ``ValueError`` when the profiles are not affine in that sense.
        """
        s = np.asarray(probe, float)
        ii, dp = self.II(s), self.dP(s)
        a1 = (ii[2] - ii[0]) / (s[2] - s[0])
        b1 = (dp[2] - dp[0]) / (s[2] - s[0])
        a0, b0 = ii[1] - a1 * s[1], dp[1] - b1 * s[1]
        if not (np.allclose(ii, a0 + a1 * s) and np.allclose(dp, b0 + b1 * s)):
            raise ValueError("profiles are not affine in Psi; use solve_gs_picard")
        return a0, a1, b0, b1


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 20000
    tolerance: float = 1e-12
    omega: Optional[float] = None  # None: optimal value for the Laplacian on this grid

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.omega is not None and not 0 < self.omega < 2:
            raise ValueError("relaxation factor must lie in (0, 2)")


# ---------------------------------------------------------------------------
# Discrete operators
# ---------------------------------------------------------------------------


def _derivs(grid: FluxGrid):
    """Central first and second differences on interior nodes."""
    p, dr, dz = grid.psi, grid.dr, grid.dz
    c = p[1:-1, 1:-1]
    p_r = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2 * dr)
    p_rr = (p[2:, 1:-1] - 2 * c + p[:-2, 1:-1]) / dr**2
    p_zz = (p[1:-1, 2:] - 2 * c + p[1:-1, :-2]) / dz**2
    return c, p_r, p_rr, p_zz


def _check_grid(grid: FluxGrid):
    if grid.psi.shape[0] < 3 or grid.psi.shape[1] < 3:
        raise ValueError("grid needs at least 3 nodes per direction")


def gs_operator(grid: FluxGrid) -> np.ndarray:
    """Psi_rr - Psi_r / r + Psi_zz on interior nodes."""
    _check_grid(grid)
    _, p_r, p_rr, p_zz = _derivs(grid)
    r = grid.r[1:-1, None]
    return p_rr - p_r / r + p_zz


def gs_residual(grid: FluxGrid, profiles: ProfilePair) -> np.ndarray:
    """Pointwise GS residual on interior nodes, shape (n_r - 2, n_z - 2)."""
    _check_grid(grid)
    c, p_r, p_rr, p_zz = _derivs(grid)
    r = grid.r[1:-1, None]
    return p_rr - p_r / r + p_zz + profiles.II(c) + r**2 * profiles.dP(c)


def jfko_residual(grid: FluxGrid, profiles: ProfilePair, gamma: float, mu: float = 1.0) -> np.ndarray:
    """Pointwise JFKO residual on interior nodes of an (r, u) grid."""
    _check_grid(grid)
    c, p_r, p_rr, p_uu = _derivs(grid)
    r = grid.r[1:-1, None]
    d = r**2 + gamma**2
    a = r / d
    da = (gamma**2 - r**2) / d**2
    I = profiles.I(c)
    return p_uu / r**2 + (a * p_rr + da * p_r) / r + profiles.II(c) / d + 2 * gamma * I / d**2 + mu * profiles.dP(c)


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


def optimal_omega(n_r: int, n_z: int, dr: float, dz: float) -> float:
    wr, wz = 1 / dr**2, 1 / dz**2
    rho = (wr * np.cos(np.pi / (n_r - 1)) + wz * np.cos(np.pi / (n_z - 1))) / (wr + wz)
    return float(2 / (1 + np.sqrt(1 - rho**2)))


def _sor(grid: FluxGrid, coef: np.ndarray, rhs: np.ndarray, config: SolverConfig) -> FluxGrid:
    """Red-black SOR for Psi_rr - Psi_r/r + Psi_zz + coef Psi = rhs (interior).

    Boundary values are taken from ``grid.psi`` and never modified.
    """
    _check_grid(grid)
    psi = grid.psi.copy()
    dr, dz = grid.dr, grid.dz
    nr, nz = psi.shape
    r = grid.r[1:-1, None]
    aE = np.broadcast_to(1 / dr**2 - 1 / (2 * dr * r), (nr - 2, nz - 2))
    aW = np.broadcast_to(1 / dr**2 + 1 / (2 * dr * r), (nr - 2, nz - 2))
    aNS = 1 / dz**2
    diag = -2 / dr**2 - 2 / dz**2 + np.broadcast_to(coef, (nr - 2, nz - 2))
    if np.any(diag == 0):
        raise DivergenceError("zero diagonal in the discrete operator")
    rhs = np.broadcast_to(rhs, (nr - 2, nz - 2))
    omega = config.omega if config.omega is not None else optimal_omega(nr, nz, dr, dz)

    ii, jj = np.meshgrid(np.arange(nr - 2), np.arange(nz - 2), indexing="ij")
    colors = [(ii + jj) % 2 == 0, (ii + jj) % 2 == 1]
    history = []
    inner = psi[1:-1, 1:-1]  # view
    for it in range(1, config.max_iterations + 1):
        biggest = 0.0
        for mask in colors:
            nb = aE * psi[2:, 1:-1] + aW * psi[:-2, 1:-1] + aNS * (psi[1:-1, 2:] + psi[1:-1, :-2])
            gs = (rhs - nb) / diag
            delta = omega * (gs - inner)
            inner[mask] += delta[mask]
            biggest = max(biggest, float(np.max(np.abs(delta[mask]))))
        history.append(biggest)
        if not np.isfinite(biggest) or biggest > 1e100:
            raise DivergenceError(f"SOR blew up at iteration {it}", history)
        if biggest < config.tolerance:
            break
    else:
        raise DivergenceError(
            f"SOR did not reach tolerance {config.tolerance:g} in {config.max_iterations} iterations "
            f"(last update {history[-1]:.3e})",
            history,
        )
    out = FluxGrid(grid.r, grid.z, psi, grid.coord, iterations=it, history=history)
    out.residual_norm = float(np.max(np.abs(gs_operator(out) + coef * psi[1:-1, 1:-1] - rhs)))
    return out


def solve_gs(
    boundary: FluxGrid,
    profiles: Optional[ProfilePair] = None,
    config: SolverConfig = SolverConfig(),
    source: Optional[Callable] = None,
) -> FluxGrid:
    """Solve the GS equation with Dirichlet data taken from ``boundary``.

    Either ``profiles`` with I I' and P' affine in Psi (Solov'ev class) or a
    manufactured ``source(r, z)`` with Psi_rr - Psi_r/r + Psi_zz = source.
    Interior values of ``boundary.psi`` are the initial guess.
    """
    R, Z = boundary.mesh()
    Ri, Zi = R[1:-1, 1:-1], Z[1:-1, 1:-1]
    if source is not None:
        if profiles is not None:
            raise ValueError("give either profiles or a manufactured source, not both")
        return _sor(boundary, np.zeros_like(Ri), np.asarray(source(Ri, Zi), float), config)
    if profiles is None:
        return _sor(boundary, np.zeros_like(Ri), np.zeros_like(Ri), config)
    a0, a1, b0, b1 = profiles.affine_coefficients()
    # Psi_rr - Psi_r/r + Psi_zz + (a1 + r^2 b1) Psi = -(a0 + r^2 b0)
    return _sor(boundary, a1 + Ri**2 * b1, -(a0 + Ri**2 * b0), config)


def solve_gs_picard(
    boundary: FluxGrid,
    profiles: ProfilePair,
    config: SolverConfig = SolverConfig(),
    outer_tolerance: float = 1e-10,
    max_outer: int = 200,
) -> FluxGrid:
    """General nonlinear profiles: Picard iteration on a frozen source."""
    current = boundary
    R, _ = boundary.mesh()
    Ri = R[1:-1, 1:-1]
    history = []
    for _ in range(max_outer):
        c = current.psi[1:-1, 1:-1]
        rhs = -(profiles.II(c) + Ri**2 * profiles.dP(c))
        nxt = _sor(current, np.zeros_like(Ri), rhs, config)
        change = float(np.max(np.abs(nxt.psi - current.psi)))
        history.append(change)
        current = nxt
        if change < outer_tolerance:
            current.history = history
            current.residual_norm = float(np.max(np.abs(gs_residual(current, profiles))))
            return current
    raise DivergenceError("Picard iteration did not converge", history)


# ---------------------------------------------------------------------------
# Lifting to 3D fields
# ---------------------------------------------------------------------------


def _cyl(x):
    x = np.asarray(x, float)
    r = np.hypot(x[..., 0], x[..., 1])
    if np.any(r <= 0):
        raise SingularAxisError("axisymmetric field evaluated on the axis r = 0")
    return r, np.arctan2(x[..., 1], x[..., 0]), x[..., 2]


def _to_cartesian(phi, comps):
    return np.einsum("...i,...ij->...j", comps, cylindrical_basis(phi))


def _as_flux(flux) -> FluxFunction:
    return flux.flux_function() if isinstance(flux, FluxGrid) else flux


def gs_components(flux, I: Func, r, z):
    """(B_r, B_phi, B_z) of the axisymmetric field at (r, z)."""
    flux = _as_flux(flux)
    r = np.asarray(r, float)
    if np.any(r <= 0):
        raise SingularAxisError("axisymmetric field evaluated on the axis r = 0")
    psi = flux.psi(r, z)
    return flux.psi_z(r, z) / r, I(psi) / r, -flux.psi_r(r, z) / r


def gs_field(flux, I: Func, domain=None) -> VectorField:
    """Axisymmetric field from a flux function or a solved grid."""
    flux = _as_flux(flux)

    def B(x):
        r, phi, z = _cyl(x)
        return _to_cartesian(phi, np.stack(gs_components(flux, I, r, z), axis=-1))

    return VectorField(B, domain=domain)


def jfko_components(flux, I: Func, gamma: float, r, u):
    flux = _as_flux(flux)
    r = np.asarray(r, float)
    if np.any(r <= 0):
        raise SingularAxisError("helical field evaluated on the axis r = 0")
    psi, p_r, p_u = flux.psi(r, u), flux.psi_r(r, u), flux.psi_z(r, u)
    d = r**2 + gamma**2
    Ival = I(psi)
    return p_u / r, (r * Ival + gamma * p_r) / d, (gamma * Ival - r * p_r) / d


def jfko_field(flux, I: Func, gamma: float, domain=None) -> VectorField:
    """Helically symmetric field.  Psi must be 2 pi gamma periodic in u for
    the field to be continuous across the branch cut of phi."""
    flux = _as_flux(flux)

    def B(x):
        r, phi, z = _cyl(x)
        return _to_cartesian(phi, np.stack(jfko_components(flux, I, gamma, r, z - gamma * phi), axis=-1))

    return VectorField(B, domain=domain)


@dataclass(frozen=True)
class AxisymmetricEquilibrium:
    """A GS equilibrium: flux function plus profiles, on a cylindrical shell."""

    flux: FluxFunction
    profiles: ProfilePair
    domain: Optional[CylindricalShell] = None

    @classmethod
    def from_grid(cls, grid: FluxGrid, profiles: ProfilePair, guard: int = 2) -> "AxisymmetricEquilibrium":
        g = guard
        dom = CylindricalShell(grid.r[g], grid.r[-1 - g], grid.z[g], grid.z[-1 - g])
        return cls(grid.flux_function(), profiles, dom)

    def components(self, r, z):
        return gs_components(self.flux, self.profiles.I, r, z)

    def pressure(self, r, z):
        return self.profiles.P(self.flux.psi(r, z))

    @property
    def B(self) -> VectorField:
        return gs_field(self.flux, self.profiles.I, self.domain)

    @property
    def state(self) -> MhdState:
        dom = self.domain

        def label(x):
            r, _, z = _cyl(x)
            return self.flux.psi(r, z)

        return MhdState(
            B=self.B,
            P=ScalarField(lambda x: self.profiles.P(label(x)), domain=dom),
            surface_label=ScalarField(label, domain=dom),
            domain=dom,
            meta={"solution": "grad-shafranov"},
        )


# ---------------------------------------------------------------------------
# Reference solutions
# ---------------------------------------------------------------------------


def solovev(
    beta: float = 1.0,
    alpha: float = 0.5,
    I0: float = 1.0,
    P0: float = 1.0,
    c: float = 0.0,
    k: float = np.pi,
    domain=None,
):
    """Psi = beta r^4 / 8 + alpha r^2 z^2 + c r I1(k r) cos(k z), an exact GS solution.

    With constant I = I0 and P = P0 - (beta + 2 alpha) Psi the GS equation
    holds identically; the Bessel term solves the homogeneous operator and
    makes the solution non-polynomial when c != 0.
    """
    c1 = beta + 2 * alpha

    def psi(r, z):
        return beta * r**4 / 8 + alpha * r**2 * z**2 + c * r * i1(k * r) * np.cos(k * z)

    def psi_r(r, z):
        # d/dr [r I1(kr)] = k r I0(kr)
        return beta * r**3 / 2 + 2 * alpha * r * z**2 + c * k * r * i0(k * r) * np.cos(k * z)

    def psi_z(r, z):
        return 2 * alpha * r**2 * z - c * k * r * i1(k * r) * np.sin(k * z)

    profiles = ProfilePair(
        lambda s: np.full(np.shape(s), float(I0)),
        lambda s: np.zeros(np.shape(s)),
        lambda s: P0 - c1 * np.asarray(s, float),
        lambda s: np.full(np.shape(s), -c1),
    )
    return AxisymmetricEquilibrium(FluxFunction(psi, psi_r, psi_z), profiles, domain or CylindricalShell(0.5, 1.5, -0.5, 0.5))


def manufactured_problem(r_range=(0.5, 1.5), z_range=(-0.5, 0.5)):
    """A smooth non-polynomial exact solution and its GS source term.

    Psi* = sin(pi (r - r0)) cos(pi z) exp(r), source = Delta* Psi*.
    """
    r0 = r_range[0]
    k = np.pi

    def psi(r, z):
        return np.sin(k * (r - r0)) * np.cos(k * z) * np.exp(r)

    def source(r, z):
        s, c, e = np.sin(k * (r - r0)), np.cos(k * (r - r0)), np.exp(r)
        cz = np.cos(k * z)
        f = s * e
        f_r = (k * c + s) * e
        f_rr = (-k * k * s + 2 * k * c + s) * e
        return (f_rr - f_r / r - k * k * f) * cz

    return psi, source
