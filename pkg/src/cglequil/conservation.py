"""
Conservation laws of the static MHD and CGL equilibrium systems.

Isotropic (MHD) fluxes, each divergence free on equilibria::

    stress   : zeta . T,   T = -B (x) B + (P + |B|^2 / 2) I
    flux     : f(P) B
    current  : f(P) J,     J = curl B

Anisotropic (CGL) fluxes, with p = p_perp + tau |B|^2 / 2::

    stress   : zeta . S,   S = -(1 - tau) B (x) B + (p + (1 - tau) |B|^2 / 2) I
    flux     : f(p) B
    vorticity: f(p) A,     A = curl(sqrt(1 - tau) B)

``zeta = a + b x x`` is a Euclidean Killing vector.  Multipliers are chosen
so that ``Gamma div B + Lambda . (curl B x B - grad P) = div Phi`` holds as an
identity for arbitrary smooth fields (see ``multipliers``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, SingularAxisError
from .fields import (
    CglState,
    FdScheme,
    MhdState,
    VectorField,
    _STENCILS,
    curl,
    curl_field,
    div,
    grad,
    jacobian,
)
from .transforms import SurfaceFunction

# J = curl B is stencil based; fourth order at h = 1e-3 keeps it near 1e-11 relative
CURRENT_SCHEME = FdScheme(h=1e-3, order="central4")

ROUNDING_FACTOR = 64

MHD_ROWS = ("stress", "flux", "current")
CGL_ROWS = ("stress", "flux", "vorticity")


def _sq(B):
    return np.sum(B * B, axis=-1)


# ---------------------------------------------------------------------------
# Killing vectors and stress tensors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KillingVector:
    """zeta(x) = a + b x x."""

    a: tuple = (0.0, 0.0, 0.0)
    b: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in np.broadcast_to(self.a, 3)))
        object.__setattr__(self, "b", tuple(float(v) for v in np.broadcast_to(self.b, 3)))

    def __call__(self, x):
        x = np.asarray(x, float)
        return np.asarray(self.a) + np.cross(np.asarray(self.b), x)

    @staticmethod
    def basis() -> list["KillingVector"]:
        """Three translations followed by three rotations."""
        e = np.eye(3)
        return [KillingVector(a=v) for v in e] + [KillingVector(b=v) for v in e]


@dataclass(frozen=True)
class StressTensorField:
    evaluate: Callable[[np.ndarray], np.ndarray]
    kind: str

    def __call__(self, x):
        return self.evaluate(np.asarray(x, float))


def _T(B, P):
    eye = np.eye(3)
    return -B[..., :, None] * B[..., None, :] + (P + 0.5 * _sq(B))[..., None, None] * eye


def stress_T(st: MhdState) -> StressTensorField:
    return StressTensorField(lambda x: _T(st.B(x), st.P(x)), "isotropic_T")


def stress_S(st: CglState) -> StressTensorField:
    def S(x):
        B, tau = st.B(x), st.tau(x)
        p = st.p_perp(x) + 0.5 * tau * _sq(B)
        w = 1 - tau
        return -w[..., None, None] * B[..., :, None] * B[..., None, :] + (p + 0.5 * w * _sq(B))[..., None, None] * np.eye(3)

    return StressTensorField(S, "anisotropic_S")


def _contract(zeta: KillingVector, T: StressTensorField, domain) -> VectorField:
    return VectorField(lambda x: np.einsum("...i,...ij->...j", zeta(x), T(x)), domain=domain)


def stress_divergence_residual(st: Union[MhdState, CglState], zeta: KillingVector, p, s: Optional[FdScheme] = None):
    """|div(zeta . T)| (or zeta . S for CGL states) at ``p``."""
    T = stress_S(st) if isinstance(st, CglState) else stress_T(st)
    return np.abs(div(_contract(zeta, T, st.domain), p, s))


# ---------------------------------------------------------------------------
# Conserved vector densities
# ---------------------------------------------------------------------------


def _need(zeta, f, row):
    if row == "stress" and zeta is None:
        raise ValueError("the stress row needs a Killing vector")
    if row != "stress" and f is None:
        raise ValueError(f"the {row} row needs a surface function f")


def table1_flux(
    st: MhdState,
    row: str,
    zeta: Optional[KillingVector] = None,
    f: Optional[SurfaceFunction] = None,
    scheme: FdScheme = CURRENT_SCHEME,
) -> VectorField:
    """Conserved vector of the isotropic system; ``f`` acts on the pressure P."""
    if row not in MHD_ROWS:
        raise ValueError(f"row must be one of {MHD_ROWS}")
    _need(zeta, f, row)
    if row == "stress":
        return _contract(zeta, stress_T(st), st.domain)
    if row == "flux":
        return VectorField(lambda x: f(st.P(x))[..., None] * st.B(x), domain=st.domain)
    J = curl_field(st.B, scheme)
    return VectorField(lambda x: f(st.P(x))[..., None] * J(x), domain=st.domain)


def effective_field(st: CglState) -> VectorField:
    """sqrt(1 - tau) B; requires tau < 1 wherever it is evaluated."""
    from .fields import _effective_field

    return _effective_field(st)


def table2_flux(
    st: CglState,
    row: str,
    zeta: Optional[KillingVector] = None,
    f: Optional[Union[SurfaceFunction, Callable]] = None,
    scheme: FdScheme = CURRENT_SCHEME,
) -> VectorField:
    """Conserved vector of the anisotropic system.

    ``f`` acts on the mean pressure p.  For the flux row ``f`` may also be a
    plain callable ``f(p, tau)``.
    """
    if row not in CGL_ROWS:
        raise ValueError(f"row must be one of {CGL_ROWS}")
    _need(zeta, f, row)
    pmean = st.mean_pressure
    if row == "stress":
        return _contract(zeta, stress_S(st), st.domain)
    if row == "flux":
        if isinstance(f, SurfaceFunction):
            return VectorField(lambda x: f(pmean(x))[..., None] * st.B(x), domain=st.domain)
        return VectorField(lambda x: np.asarray(f(pmean(x), st.tau(x)))[..., None] * st.B(x), domain=st.domain)
    A = curl_field(effective_field(st), scheme)
    return VectorField(lambda x: f(pmean(x))[..., None] * A(x), domain=st.domain)


# ---------------------------------------------------------------------------
# Multiplier identities
# ---------------------------------------------------------------------------


def multipliers(st: MhdState, row: str, x, zeta=None, f=None, s: Optional[FdScheme] = None):
    """(Gamma, Lambda) of the isotropic system at ``x``.

    Signs are fixed so that Gamma div B + Lambda . (curl B x B - grad P)
    equals +div Phi; for the stress and current rows this is the negative
    of the classical choice (zeta . B, zeta) and f'(P) J.
    """
    _need(zeta, f, row)
    B, P = st.B(x), st.P(x)
    if row == "stress":
        z = zeta(x)
        return -np.sum(B * z, axis=-1), -z
    if row == "flux":
        return f(P), -f.prime(P)[..., None] * B
    if row == "current":
        return np.zeros(B.shape[:-1]), -f.prime(P)[..., None] * curl(st.B, x, s)
    raise ValueError(f"row must be one of {MHD_ROWS}")


def cgl_multipliers(st: CglState, row: str, x, zeta=None, f=None, s: Optional[FdScheme] = None):
    """(Pi, Omega, Upsilon) of the anisotropic system, same sign rule as ``multipliers``."""
    _need(zeta, f, row)
    B, tau = st.B(x), st.tau(x)
    b2 = _sq(B)
    p = st.p_perp(x) + 0.5 * tau * b2
    if row == "stress":
        z = zeta(x)
        bz = np.sum(B * z, axis=-1)
        return -(1 - tau) * bz, -z, bz
    if row == "flux":
        fp = f.prime(p)
        return f(p), -fp[..., None] * B, 0.5 * fp * b2
    if row == "vorticity":
        A = curl(effective_field(st), x, s)
        fp = f.prime(p)
        return np.zeros(b2.shape), -fp[..., None] * A, 0.5 * fp * np.sum(A * B, axis=-1)
    raise ValueError(f"row must be one of {CGL_ROWS}")


def multiplier_identity_check(
    st: Union[MhdState, CglState],
    row: str,
    p,
    s: Optional[FdScheme] = None,
    zeta: Optional[KillingVector] = None,
    f: Optional[SurfaceFunction] = None,
):
    """(lhs, rhs) of the multiplier identity at ``p``, both from stencils.

    lhs is the multiplier-weighted sum of equation residuals, rhs the
    divergence of the row's flux.  The fields need not be an equilibrium.
    """
    p = np.asarray(p, float)
    if isinstance(st, CglState):
        B, tau = st.B(p), st.tau(p)
        Jb = jacobian(st.B, p, s)
        divB = np.trace(Jb, axis1=-2, axis2=-1)
        curlB = np.stack([Jb[..., 2, 1] - Jb[..., 1, 2], Jb[..., 0, 2] - Jb[..., 2, 0], Jb[..., 1, 0] - Jb[..., 0, 1]], -1)
        grad_b2 = 2 * np.einsum("...ij,...i->...j", Jb, B)
        mom = (1 - tau)[..., None] * np.cross(curlB, B) - grad(st.p_perp, p, s) - 0.5 * tau[..., None] * grad_b2
        tau_eq = np.sum(B * grad(st.tau, p, s), axis=-1)
        Pi, Om, Ups = cgl_multipliers(st, row, p, zeta, f, s)
        lhs = Pi * divB + np.sum(Om * mom, axis=-1) + Ups * tau_eq
        rhs = div(table2_flux(st, row, zeta, f, s or CURRENT_SCHEME), p, s)
        return lhs, rhs
    B = st.B(p)
    Jb = jacobian(st.B, p, s)
    divB = np.trace(Jb, axis1=-2, axis2=-1)
    curlB = np.stack([Jb[..., 2, 1] - Jb[..., 1, 2], Jb[..., 0, 2] - Jb[..., 2, 0], Jb[..., 1, 0] - Jb[..., 0, 1]], -1)
    mom = np.cross(curlB, B) - grad(st.P, p, s)
    G, L = multipliers(st, row, p, zeta, f, s)
    lhs = G * divB + np.sum(L * mom, axis=-1)
    rhs = div(table1_flux(st, row, zeta, f, s or CURRENT_SCHEME), p, s)
    return lhs, rhs


# ---------------------------------------------------------------------------
# Surface flux quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SphereQuadrature:
    """Gauss-Legendre in cos(theta) times the uniform rule in phi."""

    radius: float
    center: tuple = (0.0, 0.0, 0.0)
    n_theta: int = 64
    n_phi: int = 128

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.n_theta < 1 or self.n_phi < 1:
            raise ValueError("rule sizes must be positive")

    def nodes(self):
        """(points, outward normals, weights, theta, phi) with sum(weights) = 4 pi r^2."""
        mu, wmu = np.polynomial.legendre.leggauss(self.n_theta)
        phi = 2 * np.pi * np.arange(self.n_phi) / self.n_phi
        theta = np.arccos(mu)
        TH, PH = np.meshgrid(theta, phi, indexing="ij")
        n = np.stack([np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH), np.cos(TH)], axis=-1)
        w = np.outer(wmu, np.full(self.n_phi, 2 * np.pi / self.n_phi)) * self.radius**2
        pts = np.asarray(self.center, float) + self.radius * n
        return pts, n, w, TH, PH

    def refined(self) -> "SphereQuadrature":
        return SphereQuadrature(self.radius, self.center, 2 * self.n_theta, 2 * self.n_phi)


@dataclass(frozen=True)
class FluxReport:
    value: float
    error: float
    scale: float
    n_samples: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.value) <= self.tolerance


def _integrate(V: VectorField, q: SphereQuadrature):
    pts, n, w, _, _ = q.nodes()
    try:
        vals = V(pts)
    except DomainError as exc:
        raise DomainError(f"flux field not evaluable on sphere of radius {q.radius}: {exc}") from exc
    g = np.sum(vals * n, axis=-1)
    size = float(np.sum(w * np.linalg.norm(vals, axis=-1)))
    return float(np.sum(w * g)), float(np.sum(w * np.abs(g))), size, g.size


def flux_surface_integral(V: VectorField, q: SphereQuadrature, rel_tol: float = 1e-8, error_factor: float = 10.0) -> FluxReport:
    """Net outward flux of ``V`` through a sphere.

    The rule with n_theta and n_phi doubled gives the reported value; its
    difference from the base rule is the error estimate.  A vanishing flux
    passes when |value| <= max(rel_tol * scale, error_factor * error),
    scale being the integral of |V . n|.  A rounding floor of
    64 eps times the integral of |V| covers densities that vanish identically.
    """
    coarse, _, _, n0 = _integrate(V, q)
    fine, scale, size, n1 = _integrate(V, q.refined())
    err = abs(fine - coarse)
    tol = max(rel_tol * scale, error_factor * err, ROUNDING_FACTOR * np.finfo(float).eps * size)
    return FluxReport(fine, err, scale, n0 + n1, tol)


# ---------------------------------------------------------------------------
# Closed-form vortex fluxes
# ---------------------------------------------------------------------------


def spherical_components(v, theta, phi):
    """(v_rho, v_theta, v_phi) of a constant Cartesian vector."""
    vx, vy, vz = v
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    return (
        vx * st * cp + vy * st * sp + vz * ct,
        vx * ct * cp + vy * ct * sp - vz * st,
        -vx * sp + vy * cp,
    )


def bobnev_flux_integrands(params, zeta: KillingVector, f: SurfaceFunction, rho, theta, phi):
    """Outward normal densities (zeta.T.n, f(P) B.n, f(P) J.n) on a sphere.

    Closed forms in the vortex profiles; the current density is
    2 f(P) (U / rho) cos(theta), regular at the poles.
    """
    from .bobnev import BobnevProfiles

    prof = BobnevProfiles(params)
    rho = np.asarray(rho, float)
    theta, phi = np.asarray(theta, float), np.asarray(phi, float)
    V, U, W, p = prof.V(rho), prof.U(rho), prof.W(rho), prof.p(rho)
    s2, cs = np.sin(theta) ** 2, np.sin(theta) * np.cos(theta)
    c2 = np.cos(theta) ** 2
    P = params.P0 + p * s2
    a_r, a_t, a_p = spherical_components(zeta.a, theta, phi)
    _, b_t, b_p = spherical_components(zeta.b, theta, phi)
    stress = a_r * (P + 0.5 * ((U**2 + W**2) * s2 - V**2 * c2)) - V * cs * (U * (a_p - rho * b_t) + W * (a_t + rho * b_p))
    fP = f(P)
    magnetic = fP * V * np.cos(theta)
    current = 2 * fP * params.lam * V * np.cos(theta)  # U / rho = lam V
    return stress, magnetic, current


# ---------------------------------------------------------------------------
# Cylindrical (axisymmetric) forms of the stress laws
# ---------------------------------------------------------------------------


def _brackets(law: int, comps, energy, r, phi, z):
    """(F_r, F_phi, F_z) with law = (1/r) dF_r/dr + (1/r) dF_phi/dphi + dF_z/dz."""
    Br, Bp, Bz = comps(r, phi, z)
    e = energy(r, phi, z)
    if law == 3:
        return r * Br * Bz, None, -(e - Bz**2)
    if law == 6:
        return r**2 * Br * Bp, None, r * Bp * Bz
    c, s = np.cos(phi), np.sin(phi)
    if law == 1:
        return (
            r * ((e - Br**2) * c + Br * Bp * s),
            -((e - Bp**2) * s + Br * Bp * c),
            -Bz * (Br * c - Bp * s),
        )
    if law == 2:
        return (
            r * ((e - Br**2) * s - Br * Bp * c),
            (e - Bp**2) * c - Br * Bp * s,
            -Bz * (Br * s + Bp * c),
        )
    if law == 4:
        return (
            r * ((z * (e - Br**2) + r * Br * Bz) * s - z * Br * Bp * c),
            z * (e - Bp**2) * c + (r * Bz - z * Br) * Bp * s,
            -((r * (e - Bz**2) + z * Br * Bz) * s + z * Bp * Bz * c),
        )
    if law == 5:
        return (
            r * ((z * (e - Br**2) + r * Br * Bz) * c + z * Br * Bp * s),
            -(z * (e - Bp**2) * s - (r * Bz - z * Br) * Bp * c),
            -((r * (e - Bz**2) + z * Br * Bz) * c - z * Bp * Bz * s),
        )
    raise ValueError("law must be an integer 1..6")


@dataclass(frozen=True)
class CylindricalState:
    """Cylindrical components (B_r, B_phi, B_z)(r, phi, z) and pressure P(r, phi, z)."""

    components: Callable
    pressure: Callable

    @classmethod
    def from_axisymmetric(cls, eq) -> "CylindricalState":
        """Wrap an ``AxisymmetricEquilibrium``; the angle is never used."""
        return cls(lambda r, phi, z: eq.components(r, z), lambda r, phi, z: eq.pressure(r, z))

    def energy(self, r, phi, z):
        Br, Bp, Bz = self.components(r, phi, z)
        return self.pressure(r, phi, z) + 0.5 * (Br**2 + Bp**2 + Bz**2)


PHI_FREE_LAWS = (3, 6)


def cylindrical_cl_residual(st: CylindricalState, law: int, r, phi, z, h: float = 1e-3, order: str = "central2"):
    """Printed cylindrical stress law ``law`` (1..6) evaluated by central differences.

    The phi-free laws 3 and 6 never sample other angles.
    """
    r, phi, z = (np.asarray(v, float) for v in np.broadcast_arrays(r, phi, z))
    if np.any(r <= 0) or np.any(r - 2 * h <= 0):
        raise SingularAxisError("cylindrical laws need r > 0 (including the stencil)")
    if law not in range(1, 7):
        raise ValueError("law must be an integer 1..6")
    stencil = _STENCILS[order]

    def d(idx, comp):
        acc = 0.0
        for k, w in stencil:
            arg_p = [r, phi, z]
            arg_m = [r, phi, z]
            arg_p[idx] = arg_p[idx] + k * h
            arg_m[idx] = arg_m[idx] - k * h
            acc = acc + w * (_brackets(law, st.components, st.energy, *arg_p)[comp] - _brackets(law, st.components, st.energy, *arg_m)[comp])
        return acc / h

    out = d(0, 0) / r + d(2, 2)
    if law not in PHI_FREE_LAWS:
        out = out + d(1, 1) / r
    return out
