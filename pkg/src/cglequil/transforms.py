"""
Symmetry transformations of the static MHD and CGL equilibrium systems.

Finite point transformations shared by both systems:

* Euclidean motions x' = A x + a, B'(x') = A B(x), with A = A3 A2 A1 built
  from Euler angles (phi, theta, psi);
* scaling B' = a4 B, pressure' = a4^2 pressure;
* dilation x' = a5 x;
* pressure shift pressure' = pressure + a6.

The CGL system additionally admits, for any function M of the surface
label Psi that stays away from zero::

    B'      = M B
    tau'    = 1 - (1 - tau) / M^2
    p_perp' = p_perp + (|B|^2 - |B'|^2) / 2
    p_par'  = p_perp' + |B'|^2 (1 - (1 - (p_par - p_perp)/|B|^2) / M^2)

Such maps leave sqrt(1 - tau) B and p_perp + tau |B|^2 / 2 unchanged, so
through ``cgl_to_mhd`` every CGL equilibrium is an MHD equilibrium in
disguise.  The maps form the abelian group of pairs (alpha, H) with
M = alpha exp(H), alpha = +-1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DegenerateTransformError, FireHoseError, SurfaceLabelError, UndefinedCriterionError
from .fields import (
    CglState,
    Domain,
    Everywhere,
    FdScheme,
    MhdState,
    ScalarField,
    VectorField,
    cgl_residual,
    grad,
    mhd_residual,
)

_keys = itertools.count()


# ---------------------------------------------------------------------------
# Surface functions and the group G_C
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SurfaceFunction:
    """A real function of the surface label, with optional derivative."""

    apply: Callable[[np.ndarray], np.ndarray]
    description: str = ""
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    key: int = field(default_factory=lambda: next(_keys))

    def __call__(self, psi):
        return np.asarray(self.apply(np.asarray(psi, dtype=float)), dtype=float)

    def prime(self, psi):
        if self.derivative is None:
            psi = np.asarray(psi, dtype=float)
            d = 1e-6 * (1 + np.abs(psi))
            return (self(psi + d) - self(psi - d)) / (2 * d)
        return np.asarray(self.derivative(np.asarray(psi, dtype=float)), dtype=float)

    def __mul__(self, other: "SurfaceFunction") -> "SurfaceFunction":
        return SurfaceFunction(
            lambda s: self(s) * other(s),
            f"({self.description})*({other.description})",
            lambda s: self.prime(s) * other(s) + self(s) * other.prime(s),
        )

    # -- built-ins ------------------------------------------------------------

    @classmethod
    def constant(cls, c: float) -> "SurfaceFunction":
        return cls(lambda s: np.full(np.shape(s), float(c)), f"{c}", lambda s: np.zeros(np.shape(s)))

    @classmethod
    def affine(cls, a: float, b: float) -> "SurfaceFunction":
        """a + b * psi."""
        return cls(lambda s: a + b * s, f"{a} + {b}*psi", lambda s: np.full(np.shape(s), float(b)))

    @classmethod
    def oscillatory(cls, psi1: float = 200.0, psi2: float = 60.0) -> "SurfaceFunction":
        """1 + (psi/psi1) sin(psi/psi2), the vortex example multiplier."""
        return cls(
            lambda s: 1 + s / psi1 * np.sin(s / psi2),
            f"1 + psi/{psi1} sin(psi/{psi2})",
            lambda s: np.sin(s / psi2) / psi1 + s / (psi1 * psi2) * np.cos(s / psi2),
        )

    @classmethod
    def exponential(cls, c: float) -> "SurfaceFunction":
        return cls(lambda s: np.exp(c * s), f"exp({c}*psi)", lambda s: c * np.exp(c * s))

    @classmethod
    def tabulated(cls, labels, values) -> "SurfaceFunction":
        """Monotone cubic (PCHIP) interpolation through (label, value) pairs."""
        interp = PchipInterpolator(np.asarray(labels, float), np.asarray(values, float), extrapolate=True)
        d = interp.derivative()
        return cls(interp, f"tabulated[{len(labels)}]", d)


@dataclass(frozen=True)
class GroupElement:
    """Element (alpha, H) of G_C; M(psi) = alpha * exp(H(psi)).

    H is stored as an integer combination of basis surface functions, keyed
    and summed in a canonical order, so group identities hold bit for bit.
    """

    alpha: int = 1
    terms: tuple = ()  # sorted ((key, coefficient, SurfaceFunction), ...)

    def __post_init__(self):
        if self.alpha not in (1, -1):
            raise ValueError("alpha must be +1 or -1")

    @classmethod
    def from_function(cls, alpha: int, H: SurfaceFunction) -> "GroupElement":
        return cls(alpha, ((H.key, 1, H),))

    def H(self, psi) -> np.ndarray:
        psi = np.asarray(psi, dtype=float)
        out = np.zeros(psi.shape)
        for _, c, f in self.terms:
            out = out + c * f(psi)
        return out

    def multiplier(self) -> SurfaceFunction:
        return SurfaceFunction(lambda s: self.alpha * np.exp(self.H(s)), f"M[{self.alpha}; {len(self.terms)} terms]")

    def __eq__(self, other):
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self.alpha == other.alpha and [(k, c) for k, c, _ in self.terms] == [
            (k, c) for k, c, _ in other.terms
        ]

    def __hash__(self):
        return hash((self.alpha, tuple((k, c) for k, c, _ in self.terms)))


def identity() -> GroupElement:
    return GroupElement(1, ())


def compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    """(alpha, H) . (beta, K) = (alpha beta, H + K)."""
    coef: dict[int, list] = {}
    for k, c, f in g1.terms + g2.terms:
        if k in coef:
            coef[k][0] += c
        else:
            coef[k] = [c, f]
    terms = tuple((k, c, f) for k, (c, f) in sorted(coef.items()) if c != 0)
    return GroupElement(g1.alpha * g2.alpha, terms)


def inverse(g: GroupElement) -> GroupElement:
    return GroupElement(g.alpha, tuple((k, -c, f) for k, c, f in g.terms))


# ---------------------------------------------------------------------------
# Euclidean motions, scaling, dilation, pressure shift
# ---------------------------------------------------------------------------


def euler_rotation(phi: float, theta: float, psi: float) -> np.ndarray:
    """A3(psi) A2(theta) A1(phi) in the passive convention of the motion group."""
    c, s = np.cos(phi), np.sin(phi)
    A1 = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    c, s = np.cos(theta), np.sin(theta)
    A2 = np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])
    c, s = np.cos(psi), np.sin(psi)
    A3 = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    return A3 @ A2 @ A1


@dataclass(frozen=True)
class EuclideanMotion:
    translation: tuple = (0.0, 0.0, 0.0)
    angles: tuple = (0.0, 0.0, 0.0)  # Euler angles (phi, theta, psi)

    @property
    def rotation(self) -> np.ndarray:
        return euler_rotation(*self.angles)

    def __call__(self, x):
        return np.asarray(x, float) @ self.rotation.T + np.asarray(self.translation, float)

    def pullback(self, y):
        """Inverse map y -> A^T (y - a)."""
        return (np.asarray(y, float) - np.asarray(self.translation, float)) @ self.rotation


class MappedDomain(Domain):
    """Image of a domain under an invertible affine map x -> forward(x)."""

    def __init__(self, base: Optional[Domain], forward, backward):
        self.base = base if base is not None else Everywhere()
        self.forward = forward
        self.backward = backward

    def contains(self, y):
        return self.base.contains(self.backward(np.asarray(y, float)))

    def lattice(self, n, guard=0.05):
        return self.forward(self.base.lattice(n, guard))

    def random_points(self, n, rng, guard=0.05):
        return self.forward(self.base.random_points(n, rng, guard))


def _map_scalar(f: Optional[ScalarField], back, dom) -> Optional[ScalarField]:
    if f is None:
        return None
    return ScalarField(lambda y: f.func(back(y)), domain=dom)


def _replace(st, **kw):
    from dataclasses import replace

    return replace(st, **kw)


def apply_isometry(st: Union[MhdState, CglState], m: EuclideanMotion):
    """Push a state forward through x' = A x + a, B'(x') = A B(x)."""
    A = m.rotation
    back = m.pullback
    dom = MappedDomain(st.domain, m, back)
    B = VectorField(lambda y: st.B.func(back(y)) @ A.T, domain=dom)
    common = dict(B=B, surface_label=_map_scalar(st.surface_label, back, dom), domain=dom)
    if isinstance(st, MhdState):
        return _replace(st, P=_map_scalar(st.P, back, dom), **common)
    return _replace(st, p_perp=_map_scalar(st.p_perp, back, dom), tau=_map_scalar(st.tau, back, dom), **common)


def apply_scaling(st: Union[MhdState, CglState], a4: float):
    """B' = a4 B and pressure' = a4^2 pressure (tau unchanged)."""
    B = VectorField(lambda x: a4 * st.B.func(x), domain=st.domain)
    if isinstance(st, MhdState):
        return _replace(st, B=B, P=ScalarField(lambda x: a4**2 * st.P.func(x), domain=st.domain))
    return _replace(st, B=B, p_perp=ScalarField(lambda x: a4**2 * st.p_perp.func(x), domain=st.domain))


def apply_dilation(st: Union[MhdState, CglState], a5: float):
    """x' = a5 x; all fields are transported unchanged."""
    if a5 == 0:
        raise ValueError("dilation factor a5 must be nonzero")
    back = lambda y: np.asarray(y, float) / a5  # noqa: E731
    dom = MappedDomain(st.domain, lambda x: a5 * np.asarray(x, float), back)
    common = dict(
        B=VectorField(lambda y: st.B.func(back(y)), domain=dom),
        surface_label=_map_scalar(st.surface_label, back, dom),
        domain=dom,
    )
    if isinstance(st, MhdState):
        return _replace(st, P=_map_scalar(st.P, back, dom), **common)
    return _replace(st, p_perp=_map_scalar(st.p_perp, back, dom), tau=_map_scalar(st.tau, back, dom), **common)


def apply_pressure_shift(st: Union[MhdState, CglState], a6: float):
    if isinstance(st, MhdState):
        return _replace(st, P=ScalarField(lambda x: st.P.func(x) + a6, domain=st.domain))
    return _replace(st, p_perp=ScalarField(lambda x: st.p_perp.func(x) + a6, domain=st.domain))


# ---------------------------------------------------------------------------
# Surface-label machinery
# ---------------------------------------------------------------------------


def label_defect(st, points, s: Optional[FdScheme] = None, delta: float = 1e-12) -> float:
    """max |B . grad Psi| / (|B| |grad Psi| + delta) over ``points``."""
    if st.surface_label is None:
        raise SurfaceLabelError("state carries no surface label")
    points = np.asarray(points, float)
    B = st.B(points)
    g = grad(st.surface_label, points, s)
    num = np.abs(np.sum(B * g, axis=-1))
    den = np.linalg.norm(B, axis=-1) * np.linalg.norm(g, axis=-1) + delta
    return float(np.max(num / den)) if len(points) else 0.0


def _check_points(st, points):
    if points is not None:
        return np.asarray(points, float)
    dom = st.domain if st.domain is not None else Everywhere()
    return dom.lattice(6)


def _validate(st, M: SurfaceFunction, points, label_tol, min_abs):
    pts = _check_points(st, points)
    if label_tol is not None:
        defect = label_defect(st, pts)
        if defect > label_tol:
            raise SurfaceLabelError(f"surface label not constant on field lines: defect {defect:.3e} > {label_tol:.1e}")
    m = M(st.surface_label(pts))
    if np.min(np.abs(m)) < min_abs or np.any(np.sign(m) != np.sign(m.flat[0])):
        raise DegenerateTransformError(
            f"multiplier {M.description!r} not separated from zero: min |M| = {np.min(np.abs(m)):.3e}"
        )


def _as_function(M) -> SurfaceFunction:
    return M.multiplier() if isinstance(M, GroupElement) else M


def infinite_transform(
    st: CglState,
    M: Union[SurfaceFunction, GroupElement],
    *,
    points=None,
    label_tol: Optional[float] = 1e-6,
    min_abs: float = 1e-8,
) -> CglState:
    """Apply the infinite CGL symmetry with multiplier M(Psi)."""
    M = _as_function(M)
    if st.surface_label is None:
        raise SurfaceLabelError("infinite transform needs a surface label")
    _validate(st, M, points, label_tol, min_abs)
    lab, B, pp, tau = st.surface_label, st.B, st.p_perp, st.tau

    def m(x):
        return M(lab.func(x))

    def new_B(x):
        return m(x)[..., None] * B.func(x)

    def new_tau(x):
        return 1 - (1 - tau.func(x)) / m(x) ** 2

    def new_pp(x):
        b2 = np.sum(B.func(x) ** 2, axis=-1)
        return pp.func(x) + 0.5 * (b2 - m(x) ** 2 * b2)

    return _replace(
        st,
        B=VectorField(new_B, domain=st.domain),
        tau=ScalarField(new_tau, domain=st.domain),
        p_perp=ScalarField(new_pp, domain=st.domain),
    )


def transformed_p_par(st: CglState, M: Union[SurfaceFunction, GroupElement]) -> ScalarField:
    """p_par' of the infinite transform written exactly in the original variables."""
    M = _as_function(M)
    lab, B, pp, ppar = st.surface_label, st.B, st.p_perp, st.p_par

    def f(x):
        m = M(lab.func(x))
        b2 = np.sum(B.func(x) ** 2, axis=-1)
        b2n = m**2 * b2
        pp_new = pp.func(x) + 0.5 * (b2 - b2n)
        return pp_new + b2n * (1 - (1 - (ppar.func(x) - pp.func(x)) / b2) / m**2)

    return ScalarField(f, domain=st.domain)


def embed(st: MhdState) -> CglState:
    """An MHD equilibrium read as a CGL equilibrium with tau = 0."""
    return CglState(
        B=st.B,
        p_perp=st.P,
        tau=ScalarField.constant(0.0, domain=st.domain),
        surface_label=st.surface_label,
        domain=st.domain,
        meta=dict(st.meta),
    )


def mhd_to_cgl(
    st: MhdState,
    M: Union[SurfaceFunction, GroupElement],
    P1: float = 0.0,
    *,
    points=None,
    label_tol: Optional[float] = 1e-6,
    min_abs: float = 1e-8,
) -> CglState:
    """Family of CGL equilibria generated from one MHD equilibrium."""
    M = _as_function(M)
    if st.surface_label is None:
        raise SurfaceLabelError("mhd_to_cgl needs a surface label")
    _validate(st, M, points, label_tol, min_abs)
    lab, B, P = st.surface_label, st.B, st.P

    def m(x):
        return M(lab.func(x))

    def new_pp(x):
        b2 = np.sum(B.func(x) ** 2, axis=-1)
        return P1 + P.func(x) + 0.5 * b2 * (1 - m(x) ** 2)

    return CglState(
        B=VectorField(lambda x: m(x)[..., None] * B.func(x), domain=st.domain),
        p_perp=ScalarField(new_pp, domain=st.domain),
        tau=ScalarField(lambda x: 1 - 1 / m(x) ** 2, domain=st.domain),
        surface_label=lab,
        domain=st.domain,
        meta=dict(st.meta, transform=f"mhd_to_cgl[{M.description}]", P1=P1),
    )


def cgl_to_mhd(st: CglState) -> MhdState:
    """(sqrt(1 - tau) B, p_perp + tau |B|^2 / 2); undefined where tau >= 1."""
    B, tau = st.B, st.tau

    def new_B(x):
        t = tau.func(x)
        if np.any(t >= 1):
            raise FireHoseError("tau >= 1: the isotropic image is not real")
        return np.sqrt(1 - t)[..., None] * B.func(x)

    return MhdState(
        B=VectorField(new_B, domain=st.domain),
        P=st.mean_pressure,
        surface_label=st.surface_label,
        domain=st.domain,
        meta=dict(st.meta),
    )


# ---------------------------------------------------------------------------
# Stability criteria
# ---------------------------------------------------------------------------


def firehose_unstable(st: CglState, p) -> np.ndarray:
    """p_par - p_perp > |B|^2."""
    p = np.asarray(p, float)
    b2 = np.sum(st.B(p) ** 2, axis=-1)
    return st.p_par(p) - st.p_perp(p) > b2


def mirror_unstable(st: CglState, p) -> np.ndarray:
    """p_perp (p_perp / (6 p_par) - 1) > |B|^2 / 2."""
    p = np.asarray(p, float)
    ppar = st.p_par(p)
    if np.any(ppar == 0):
        raise UndefinedCriterionError("mirror criterion undefined where p_par = 0")
    pp = st.p_perp(p)
    b2 = np.sum(st.B(p) ** 2, axis=-1)
    return pp * (pp / (6 * ppar) - 1) > 0.5 * b2


# ---------------------------------------------------------------------------
# Infinitesimal generators
# ---------------------------------------------------------------------------

GENERATOR_SCHEME = FdScheme(order="central4", rel=1e-3)
EXACT_FLOOR = 1e-10


def _perturbed(st, generator: str, eps: float, f: Optional[SurfaceFunction]):
    dom = st.domain
    B = st.B
    if generator == "scaling":
        newB = VectorField(lambda x: (1 + eps) * B.func(x), domain=dom)
        if isinstance(st, MhdState):
            return _replace(st, B=newB, P=ScalarField(lambda x: (1 + 2 * eps) * st.P.func(x), domain=dom))
        return _replace(st, B=newB, p_perp=ScalarField(lambda x: (1 + 2 * eps) * st.p_perp.func(x), domain=dom))
    if generator == "pressure_shift":
        return apply_pressure_shift(st, eps)
    if generator == "infinite":
        cst = embed(st) if isinstance(st, MhdState) else st
        if f is None:
            raise ValueError("the infinite generator needs a surface function f")
        lab, tau, pp = cst.surface_label, cst.tau, cst.p_perp

        def fx(x):
            return f(lab.func(x))

        return _replace(
            cst,
            B=VectorField(lambda x: (1 + eps * fx(x))[..., None] * B.func(x), domain=dom),
            p_perp=ScalarField(lambda x: pp.func(x) - eps * fx(x) * np.sum(B.func(x) ** 2, axis=-1), domain=dom),
            tau=ScalarField(lambda x: tau.func(x) + 2 * eps * fx(x) * (1 - tau.func(x)), domain=dom),
        )
    raise ValueError(f"unknown generator {generator!r}")


def _residual_vector(st, pts, s):
    if isinstance(st, MhdState):
        r = mhd_residual(st, pts, s)
        return np.concatenate([r.momentum, r.solenoidal[..., None]], axis=-1)
    r = cgl_residual(st, pts, s)
    return np.concatenate([r.momentum, r.solenoidal[..., None], r.state_eq[..., None]], axis=-1)


def infinitesimal_generator_check(
    st,
    generator: str,
    eps: float,
    points,
    f: Optional[SurfaceFunction] = None,
    s: FdScheme = GENERATOR_SCHEME,
) -> float:
    """Relative change of the residual when fields move by eps along a generator.

    The baseline residual (pure truncation error) is subtracted pointwise, so
    the returned norm is O(eps^2) for a true symmetry.
    """
    pts = np.asarray(points, float)
    base_state = embed(st) if generator == "infinite" and isinstance(st, MhdState) else st
    base = _residual_vector(base_state, pts, s)
    pert = _residual_vector(_perturbed(st, generator, eps, f), pts, s)
    if isinstance(base_state, MhdState):
        scale = np.max(np.linalg.norm(grad(base_state.P, pts, s), axis=-1))
    else:
        scale = np.max(np.linalg.norm(grad(base_state.p_perp, pts, s), axis=-1))
    scale = max(scale, np.max(np.linalg.norm(base_state.B(pts), axis=-1)) ** 2)
    return float(np.max(np.linalg.norm(pert - base, axis=-1)) / scale)


@dataclass(frozen=True)
class GeneratorStudy:
    generator: str
    eps: tuple
    norms: tuple
    slope: float
    exact: bool

    def passed(self, target: float = 2.0, tol: float = 0.2) -> bool:
        return self.exact or abs(self.slope - target) <= tol


def generator_study(st, generator, points, f=None, eps=(1e-2, 1e-3, 1e-4), s=GENERATOR_SCHEME) -> GeneratorStudy:
    """Log-log slope of the generator defect over a sequence of eps.

    A generator whose first-order action is already exact leaves only
    round-off; that case is flagged ``exact`` and has no meaningful slope.
    """
    norms = [infinitesimal_generator_check(st, generator, e, points, f, s) for e in eps]
    exact = max(norms) < EXACT_FLOOR
    if exact:
        slope = float("nan")
    else:
        slope = float(np.polyfit(np.log(eps), np.log(np.maximum(norms, 1e-300)), 1)[0])
    return GeneratorStudy(generator, tuple(eps), tuple(norms), slope, exact)
