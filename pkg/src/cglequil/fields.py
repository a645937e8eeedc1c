"""
Fields over R^3, coordinate frames and pointwise finite-difference operators.

Everything here is mesh-free: a derivative at a query point is built from a
small stencil of field evaluations around that point, so closed-form
solutions can be checked without interpolating onto a grid.

Conventions
-----------
* Points are arrays whose last axis has length 3 (Cartesian x, y, z).  Any
  leading shape is allowed, and all operators broadcast over it.
* ``ScalarField.func(x)`` returns shape ``x.shape[:-1]``;
  ``VectorField.func(x)`` returns shape ``x.shape``.
* ``jacobian(V)[..., i, j]`` is dV_i/dx_j.

Residuals of the two equilibrium systems
----------------------------------------
isotropic (MHD)::

    curl B x B - grad P = 0,   div B = 0

anisotropic (CGL) with the surface-constant anisotropy factor tau::

    (1 - tau) curl B x B - grad p_perp - tau grad(|B|^2/2) - B (B . grad tau) = 0
    div B = 0,   B . grad tau = 0
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import DomainError, FireHoseError, SingularAxisError

ArrayFunc = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------


class Domain:
    """Membership predicate plus a sampling rule for residual sweeps."""

    def contains(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lattice(self, n: int, guard: float = 0.05) -> np.ndarray:
        """Roughly ``n**3`` interior points away from boundary and axes."""
        raise NotImplementedError

    def random_points(self, n: int, rng: np.random.Generator, guard: float = 0.05) -> np.ndarray:
        raise NotImplementedError


class Everywhere(Domain):
    """All of R^3; sampling happens in the box ``[-extent, extent]^3``."""

    def __init__(self, extent: float = 1.0):
        self.extent = extent

    def contains(self, x):
        return np.ones(np.shape(x)[:-1], dtype=bool)

    def lattice(self, n, guard=0.05):
        a = self.extent * (1 - guard)
        g = np.linspace(-a, a, n)
        return np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)

    def random_points(self, n, rng, guard=0.05):
        a = self.extent * (1 - guard)
        return rng.uniform(-a, a, size=(n, 3))


@dataclass(frozen=True)
class Ball(Domain):
    """Open ball ``|x - center| < radius``."""

    radius: float
    center: tuple = (0.0, 0.0, 0.0)

    def contains(self, x):
        return np.linalg.norm(np.asarray(x) - np.asarray(self.center), axis=-1) < self.radius

    def lattice(self, n, guard=0.05):
        # Spherical lattice: n radii x n polar angles x n azimuths.
        R = self.radius
        rho = np.linspace(guard * R, (1 - guard) * R, n)
        theta = np.linspace(guard * np.pi, (1 - guard) * np.pi, n)
        phi = np.linspace(0.0, 2 * np.pi, n, endpoint=False) + 0.1
        r, t, p = np.meshgrid(rho, theta, phi, indexing="ij")
        pts = np.stack(
            [r * np.sin(t) * np.cos(p), r * np.sin(t) * np.sin(p), r * np.cos(t)], axis=-1
        )
        return pts.reshape(-1, 3) + np.asarray(self.center)

    def random_points(self, n, rng, guard=0.05):
        R = self.radius * (1 - guard)
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        r = R * rng.uniform(guard, 1.0, size=(n, 1)) ** (1 / 3)
        return r * v + np.asarray(self.center)


@dataclass(frozen=True)
class CylindricalShell(Domain):
    """``r_min < r < r_max``, ``z_min < z < z_max`` with r = sqrt(x^2 + y^2)."""

    r_min: float
    r_max: float
    z_min: float
    z_max: float

    def contains(self, x):
        x = np.asarray(x)
        r = np.hypot(x[..., 0], x[..., 1])
        return (r > self.r_min) & (r < self.r_max) & (x[..., 2] > self.z_min) & (x[..., 2] < self.z_max)

    def _ranges(self, guard):
        dr = (self.r_max - self.r_min) * guard
        dz = (self.z_max - self.z_min) * guard
        return (self.r_min + dr, self.r_max - dr), (self.z_min + dz, self.z_max - dz)

    def lattice(self, n, guard=0.05):
        (r0, r1), (z0, z1) = self._ranges(guard)
        r, p, z = np.meshgrid(
            np.linspace(r0, r1, n),
            np.linspace(0.0, 2 * np.pi, n, endpoint=False) + 0.1,
            np.linspace(z0, z1, n),
            indexing="ij",
        )
        return np.stack([r * np.cos(p), r * np.sin(p), z], axis=-1).reshape(-1, 3)

    def random_points(self, n, rng, guard=0.05):
        (r0, r1), (z0, z1) = self._ranges(guard)
        r = rng.uniform(r0, r1, n)
        p = rng.uniform(0, 2 * np.pi, n)
        z = rng.uniform(z0, z1, n)
        return np.stack([r * np.cos(p), r * np.sin(p), z], axis=-1)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


def _check_domain(domain: Optional[Domain], x: np.ndarray) -> None:
    if domain is None:
        return
    inside = domain.contains(x)
    if not np.all(inside):
        bad = np.asarray(x)[~inside]
        raise DomainError(f"{bad.shape[0]} evaluation point(s) outside the domain, e.g. {bad[0]}")


@dataclass(frozen=True)
class ScalarField:
    """Real-valued field; ``gradient`` is an optional exact gradient."""

    func: ArrayFunc
    gradient: Optional[ArrayFunc] = None
    domain: Optional[Domain] = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        _check_domain(self.domain, x)
        return self.func(x)

    @classmethod
    def constant(cls, value: float, domain: Optional[Domain] = None) -> "ScalarField":
        return cls(
            lambda x: np.full(np.shape(x)[:-1], float(value)),
            gradient=lambda x: np.zeros(np.shape(x)),
            domain=domain,
        )


@dataclass(frozen=True)
class VectorField:
    """Vector field with Cartesian components; ``jacobian`` is optional and exact."""

    func: ArrayFunc
    jacobian: Optional[ArrayFunc] = None
    domain: Optional[Domain] = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        _check_domain(self.domain, x)
        return self.func(x)

    @classmethod
    def constant(cls, value, domain: Optional[Domain] = None) -> "VectorField":
        v = np.asarray(value, dtype=float)
        return cls(
            lambda x: np.broadcast_to(v, np.shape(x)).copy(),
            jacobian=lambda x: np.zeros(np.shape(x) + (3,)),
            domain=domain,
        )


# ---------------------------------------------------------------------------
# Finite-difference operators
# ---------------------------------------------------------------------------

_STENCILS = {
    "central2": ((1, 0.5),),
    "central4": ((1, 2.0 / 3.0), (2, -1.0 / 12.0)),
}


@dataclass(frozen=True)
class FdScheme:
    """Central-difference stencil.

    With ``h=None`` the step is relative, ``rel * (1 + |p|)``, per query point.
    """

    h: Optional[float] = None
    order: str = "central2"
    rel: float = 1e-4

    def __post_init__(self):
        if self.order not in _STENCILS:
            raise ValueError(f"unknown stencil {self.order!r}")
        if self.h is not None and not self.h > 0:
            raise ValueError("step h must be positive")
        if not self.rel > 0:
            raise ValueError("relative step must be positive")

    def steps(self, x: np.ndarray) -> np.ndarray:
        if self.h is not None:
            return np.full(x.shape[:-1], float(self.h))
        return self.rel * (1.0 + np.linalg.norm(x, axis=-1))


DEFAULT_SCHEME = FdScheme()


def _partials(func: ArrayFunc, domain, x: np.ndarray, scheme: FdScheme) -> np.ndarray:
    """Stack of d func / dx_j along a new trailing axis (all axes in one batch)."""
    x = np.asarray(x, dtype=float)
    h = scheme.steps(x)
    offsets = []
    for k, _ in _STENCILS[scheme.order]:
        for j in range(3):
            for sign in (1.0, -1.0):
                e = np.zeros(3)
                e[j] = sign * k
                offsets.append(e)
    offsets = np.array(offsets)
    pts = x[None, ...] + offsets.reshape((-1,) + (1,) * (x.ndim - 1) + (3,)) * h[None, ..., None]
    _check_domain(domain, pts)
    vals = np.asarray(func(pts))
    extra = vals.ndim - pts.ndim + 1  # 0 for scalar fields, 1 for vector fields
    hh = h.reshape(h.shape + (1,) * extra)
    out = []
    for j in range(3):
        acc = 0.0
        for s, (k, w) in enumerate(_STENCILS[scheme.order]):
            base = s * 6 + 2 * j
            acc = acc + w * (vals[base] - vals[base + 1])
        out.append(acc / hh)
    return np.stack(out, axis=-1)


def grad(f: ScalarField, p, s: Optional[FdScheme] = None) -> np.ndarray:
    """Gradient of ``f`` at ``p``; an exact gradient wins over the stencil."""
    p = np.asarray(p, dtype=float)
    if f.gradient is not None:
        _check_domain(f.domain, p)
        return np.asarray(f.gradient(p), dtype=float)
    return _partials(f.func, f.domain, p, s or DEFAULT_SCHEME)


def jacobian(V: VectorField, p, s: Optional[FdScheme] = None) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if V.jacobian is not None:
        _check_domain(V.domain, p)
        return np.asarray(V.jacobian(p), dtype=float)
    return _partials(V.func, V.domain, p, s or DEFAULT_SCHEME)


def div(V: VectorField, p, s: Optional[FdScheme] = None) -> np.ndarray:
    return np.trace(jacobian(V, p, s), axis1=-2, axis2=-1)


def _curl_from_jacobian(J: np.ndarray) -> np.ndarray:
    return np.stack(
        [J[..., 2, 1] - J[..., 1, 2], J[..., 0, 2] - J[..., 2, 0], J[..., 1, 0] - J[..., 0, 1]],
        axis=-1,
    )


def curl(V: VectorField, p, s: Optional[FdScheme] = None) -> np.ndarray:
    return _curl_from_jacobian(jacobian(V, p, s))


def curl_field(V: VectorField, s: Optional[FdScheme] = None) -> VectorField:
    """The current J = curl V as a field in its own right (always stencil based)."""
    return VectorField(lambda x: curl(V, x, s), domain=V.domain)


# ---------------------------------------------------------------------------
# Equilibrium states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MhdState:
    """Isotropic equilibrium candidate (B, P) with a surface label."""

    B: VectorField
    P: ScalarField
    surface_label: Optional[ScalarField] = None
    domain: Optional[Domain] = None
    meta: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class CglState:
    """Anisotropic equilibrium candidate (B, p_perp, tau); p_par is derived."""

    B: VectorField
    p_perp: ScalarField
    tau: ScalarField
    surface_label: Optional[ScalarField] = None
    domain: Optional[Domain] = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def p_par(self) -> ScalarField:
        B, pp, tau = self.B, self.p_perp, self.tau
        return ScalarField(
            lambda x: pp.func(x) + tau.func(x) * np.sum(B.func(x) ** 2, axis=-1),
            domain=self.domain,
        )

    @property
    def mean_pressure(self) -> ScalarField:
        """p = p_perp + tau |B|^2 / 2."""
        B, pp, tau = self.B, self.p_perp, self.tau
        return ScalarField(
            lambda x: pp.func(x) + 0.5 * tau.func(x) * np.sum(B.func(x) ** 2, axis=-1),
            domain=self.domain,
        )


class MhdResidual(NamedTuple):
    momentum: np.ndarray
    solenoidal: np.ndarray


class CglResidual(NamedTuple):
    momentum: np.ndarray
    solenoidal: np.ndarray
    state_eq: np.ndarray


def mhd_residual(st: MhdState, p, s: Optional[FdScheme] = None) -> MhdResidual:
    """momentum = curl B x B - grad P, solenoidal = div B."""
    p = np.asarray(p, dtype=float)
    J = jacobian(st.B, p, s)
    B = st.B(p)
    momentum = np.cross(_curl_from_jacobian(J), B) - grad(st.P, p, s)
    return MhdResidual(momentum, np.trace(J, axis1=-2, axis2=-1))


def cgl_residual(st: CglState, p, s: Optional[FdScheme] = None) -> CglResidual:
    p = np.asarray(p, dtype=float)
    J = jacobian(st.B, p, s)
    B = st.B(p)
    tau = st.tau(p)[..., None]
    gtau = grad(st.tau, p, s)
    # grad(|B|^2/2) = J^T B
    gmag = np.einsum("...ij,...i->...j", J, B)
    B_dot_gtau = np.sum(B * gtau, axis=-1)
    momentum = (
        (1 - tau) * np.cross(_curl_from_jacobian(J), B)
        - grad(st.p_perp, p, s)
        - tau * gmag
        - B * B_dot_gtau[..., None]
    )
    return CglResidual(momentum, np.trace(J, axis1=-2, axis2=-1), B_dot_gtau)


def _effective_field(st: CglState) -> VectorField:
    """sqrt(1 - tau) B, refusing the fire-hose regime anywhere it is sampled."""
    B, tau = st.B, st.tau

    def func(x):
        t = tau.func(x)
        if np.any(t >= 1):
            raise FireHoseError("tau >= 1 on the stencil: sqrt(1 - tau) is not real")
        return np.sqrt(1 - t)[..., None] * B.func(x)

    return VectorField(func, domain=st.domain)


def theorem1_residual(st: CglState, p, s: Optional[FdScheme] = None) -> MhdResidual:
    """Residual of the CGL system written as an isotropic system.

    Evaluates curl(B~) x B~ - grad p and div B~ with B~ = sqrt(1 - tau) B and
    mean pressure p = p_perp + tau |B|^2 / 2.
    """
    Bt = _effective_field(st)
    return mhd_residual(MhdState(Bt, st.mean_pressure, domain=st.domain), p, s)


# ---------------------------------------------------------------------------
# Steady Euler flow equivalent
# ---------------------------------------------------------------------------


def euler_map(st: MhdState, P0: float = 0.0):
    """Velocity v = B and pressure pi = P0 - P - |B|^2/2 of the Euler flow."""
    B, P = st.B, st.P
    pi = ScalarField(lambda x: P0 - P.func(x) - 0.5 * np.sum(B.func(x) ** 2, axis=-1), domain=st.domain)
    return B, pi


def euler_residual(v: VectorField, pi: ScalarField, p, s: Optional[FdScheme] = None):
    """(v . grad) v + grad pi and div v."""
    J = jacobian(v, p, s)
    vv = v(np.asarray(p, dtype=float))
    adv = np.einsum("...ij,...j->...i", J, vv)
    return adv + grad(pi, p, s), np.trace(J, axis1=-2, axis2=-1)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    """Max-norm summary of a residual sweep over a sample set.

    ``*_scale`` are the matching max magnitudes of the individual terms, so
    ``relative`` is comparable between solutions of very different size.
    """

    name: str
    momentum: float
    solenoidal: float
    state_eq: float
    momentum_scale: float
    solenoidal_scale: float
    n_points: int

    @property
    def relative(self) -> float:
        m = self.momentum / self.momentum_scale if self.momentum_scale > 0 else self.momentum
        d = self.solenoidal / self.solenoidal_scale if self.solenoidal_scale > 0 else self.solenoidal
        return max(m, d)

    def passed(self, tol: float) -> bool:
        return self.relative <= tol


def _vmax(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _vnorm_max(a):
    a = np.asarray(a)
    return float(np.max(np.linalg.norm(a, axis=-1))) if a.size else 0.0


def mhd_sweep(st: MhdState, points, s: Optional[FdScheme] = None, name: str = "mhd") -> ResidualReport:
    points = np.asarray(points, dtype=float)
    J = jacobian(st.B, points, s)
    B = st.B(points)
    force = np.cross(_curl_from_jacobian(J), B)
    gP = grad(st.P, points, s)
    return ResidualReport(
        name,
        _vnorm_max(force - gP),
        _vmax(np.trace(J, axis1=-2, axis2=-1)),
        0.0,
        max(_vnorm_max(force), _vnorm_max(gP)),
        float(np.max(np.linalg.norm(J, axis=(-2, -1)))) if J.size else 0.0,
        len(points),
    )


def cgl_sweep(st: CglState, points, s: Optional[FdScheme] = None, name: str = "cgl") -> ResidualReport:
    points = np.asarray(points, dtype=float)
    res = cgl_residual(st, points, s)
    J = jacobian(st.B, points, s)
    B = st.B(points)
    tau = st.tau(points)[..., None]
    force = (1 - tau) * np.cross(_curl_from_jacobian(J), B)
    gtau = grad(st.tau, points, s)
    scale = max(
        _vnorm_max(force),
        _vnorm_max(grad(st.p_perp, points, s)),
        _vnorm_max(tau * np.einsum("...ij,...i->...j", J, B)),
    )
    bscale = float(np.max(np.linalg.norm(J, axis=(-2, -1)))) if J.size else 0.0
    # state equation measured relative to |B| |grad tau|
    denom = np.linalg.norm(B, axis=-1) * np.linalg.norm(gtau, axis=-1)
    dmax = float(np.max(denom)) if denom.size else 0.0
    st_eq = _vmax(res.state_eq) / dmax if dmax > 0 else _vmax(res.state_eq)
    return ResidualReport(name, _vnorm_max(res.momentum), _vmax(res.solenoidal), st_eq, scale, bscale, len(points))


def theorem1_sweep(st: CglState, points, s: Optional[FdScheme] = None, name: str = "theorem1") -> ResidualReport:
    Bt = _effective_field(st)
    return mhd_sweep(MhdState(Bt, st.mean_pressure, domain=st.domain), points, s, name)


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    """Coordinate frame: cartesian, cylindrical (r, phi, z), spherical
    (rho, theta, phi) or helical (r, phi, u) with z = u + gamma * phi."""

    kind: str = "cartesian"
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cartesian", "cylindrical", "spherical", "helical"):
            raise ValueError(f"unknown frame {self.kind!r}")
        if self.kind == "helical" and self.gamma == 0:
            raise ValueError("helical frame requires gamma != 0")


def cylindrical_basis(phi):
    """Rows e_r, e_phi, e_z as Cartesian vectors, shape (..., 3, 3)."""
    c, s = np.cos(phi), np.sin(phi)
    z, o = np.zeros_like(c), np.ones_like(c)
    return np.stack([np.stack([c, s, z], -1), np.stack([-s, c, z], -1), np.stack([z, z, o], -1)], -2)


def spherical_basis(theta, phi):
    """Rows e_rho, e_theta, e_phi as Cartesian vectors, shape (..., 3, 3)."""
    ct, st_, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
    return np.stack(
        [
            np.stack([st_ * cp, st_ * sp, ct], -1),
            np.stack([ct * cp, ct * sp, -st_], -1),
            np.stack([-sp, cp, np.zeros_like(cp)], -1),
        ],
        -2,
    )


def frame_to_cartesian(frame: Frame, coords, components):
    """Position and vector components in ``frame`` -> Cartesian point and vector."""
    q = np.asarray(coords, dtype=float)
    v = np.asarray(components, dtype=float)
    a, b, c = q[..., 0], q[..., 1], q[..., 2]
    if frame.kind == "cartesian":
        return q.copy(), v.copy()
    if frame.kind in ("cylindrical", "helical"):
        if np.any(a <= 0):
            raise SingularAxisError("cylindrical basis undefined for r <= 0")
        z = c if frame.kind == "cylindrical" else c + frame.gamma * b
        point = np.stack([a * np.cos(b), a * np.sin(b), z], axis=-1)
        basis = cylindrical_basis(b)
    else:
        if np.any(a <= 0):
            raise SingularAxisError("spherical basis undefined for rho <= 0")
        point = np.stack([a * np.sin(b) * np.cos(c), a * np.sin(b) * np.sin(c), a * np.cos(b)], axis=-1)
        basis = spherical_basis(b, c)
    return point, np.einsum("...i,...ij->...j", v, basis)


def cartesian_to_cylindrical(x):
    """(r, phi, z) of Cartesian points."""
    x = np.asarray(x, dtype=float)
    return np.hypot(x[..., 0], x[..., 1]), np.arctan2(x[..., 1], x[..., 0]), x[..., 2]
