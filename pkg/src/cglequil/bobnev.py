"""
Bobnev's localized isotropic plasma vortex.

In spherical coordinates (rho, theta, phi) the solution reads::

    B = e_rho V cos(theta) + e_theta W sin(theta) + e_phi U sin(theta)
    P = P0 + p(rho) sin^2(theta)

    U = lam rho V,   W = -V - rho V'/2,   p = gamma rho^2 V
    V(rho) = B0 (V0(2 lam rho) - V0(2 lam R)) / (1 - V0(2 lam R))
    V0(x)  = 3 (sin x / x^3 - cos x / x^2)

with ``R lam`` a positive root of (3 - 4 t^2) sin 2t - 6 t cos 2t = 0.

The pressure amplitude that balances the Lorentz force is
``gamma = lam^2 B0 V0(2 lam R) / (1 - V0(2 lam R))``, entering P with a
plus sign (curl B x B = grad P fixes both).  For R = 1, n = 3, B0 = 100 this
gives gamma = -72.831.

B and P are evaluated in Cartesian form.  With g(rho) = V'(rho)/rho::

    B = (-g z x / 2 - lam V y,  -g z y / 2 + lam V x,  V + g (x^2 + y^2) / 2)
    P = P0 + gamma V (x^2 + y^2)

which is smooth through the origin and the symmetry axis, so no basis
singularity is ever touched.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateNormalizationError, RootSearchError
from .fields import Ball, MhdState, ScalarField, VectorField

_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 12


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


# 3 j1(x)/x and -3 j2(x)/x^2 as power series in y = -x^2/2
_V0_COEF = np.array([3.0 / (factorial(k) * _double_factorial(2 * k + 3)) for k in range(_SERIES_TERMS)])
_DV0_COEF = np.array([-3.0 / (factorial(k) * _double_factorial(2 * k + 5)) for k in range(_SERIES_TERMS)])


def _series(coef, x):
    y = -0.5 * x * x
    return np.polynomial.polynomial.polyval(y, coef)


def v0_profile(x):
    """V0(x) = 3 (sin x / x^3 - cos x / x^2), even, V0(0) = 1."""
    x = np.abs(np.asarray(x, dtype=float))
    small = x < _SERIES_CUTOFF
    xs = np.where(small, 1.0, x)
    closed = 3.0 * (np.sin(xs) - xs * np.cos(xs)) / xs**3
    return np.where(small, _series(_V0_COEF, x), closed)


def v0_prime_over_x(x):
    """V0'(x) / x, smooth and even (equals -1/5 at the origin)."""
    x = np.abs(np.asarray(x, dtype=float))
    small = x < _SERIES_CUTOFF
    xs = np.where(small, 1.0, x)
    closed = -3.0 * ((3.0 - xs**2) * np.sin(xs) - 3.0 * xs * np.cos(xs)) / xs**5
    return np.where(small, _series(_DV0_COEF, x), closed)


def eigen_residual(t):
    """Left side of the eigenvalue condition in t = R * lambda."""
    t = np.asarray(t, dtype=float)
    return (3 - 4 * t**2) * np.sin(2 * t) - 6 * t * np.cos(2 * t)


def _eigen_residual_dt(t):
    return -8 * t * np.sin(2 * t) + 2 * (3 - 4 * t**2) * np.cos(2 * t) - 6 * np.cos(2 * t) + 12 * t * np.sin(2 * t)


def root_tolerance(t) -> float:
    """Accepted |residual| at t: 1e-12 scaled by the residual's amplitude 1 + 4 t^2."""
    return 1e-12 * (1 + 4 * float(t) ** 2)


def bobnev_roots(R: float, n_max: int, scan_step: float = 0.05) -> list[float]:
    """First ``n_max`` positive eigenvalues lambda_n for vortex radius ``R``.

    Roots are bracketed on a scan in t = R lambda, refined by Brent's method
    and polished with Newton steps that are only kept when they reduce the
    residual.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    roots = []
    a = scan_step
    fa = eigen_residual(a)
    # the residual behaves like 32 t^5 / 15 at the origin, so t = 0 is skipped
    while len(roots) < n_max:
        b = a + scan_step
        fb = eigen_residual(b)
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            t = brentq(eigen_residual, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            for _ in range(3):
                step = eigen_residual(t) / _eigen_residual_dt(t)
                if abs(eigen_residual(t - step)) < abs(eigen_residual(t)):
                    t -= step
            if abs(eigen_residual(t)) >= root_tolerance(t):
                raise RootSearchError(f"root near t={t} polished only to {eigen_residual(t):.3e}")
            roots.append(float(t))
        a, fa = b, fb
        if a > 10 * (n_max + 2) * np.pi:
            raise RootSearchError("scan ran past the expected root range")
    return [t / R for t in roots]


@dataclass(frozen=True)
class BobnevParams:
    R: float
    n: int
    lam: float
    B0: float
    P0: float
    gamma_const: float

    @property
    def v0_edge(self) -> float:
        return float(v0_profile(2 * self.lam * self.R))


@dataclass(frozen=True)
class BobnevProfiles:
    """Radial profiles V, U, W, p (and V', V'/rho) of a vortex."""

    params: BobnevParams

    def _norm(self):
        c = self.params.v0_edge
        return c, self.params.B0 / (1 - c)

    def V(self, rho):
        c, k = self._norm()
        return k * (v0_profile(2 * self.params.lam * np.asarray(rho, dtype=float)) - c)

    def g(self, rho):
        """V'(rho) / rho."""
        lam = self.params.lam
        _, k = self._norm()
        return k * 4 * lam**2 * v0_prime_over_x(2 * lam * np.asarray(rho, dtype=float))

    def dV(self, rho):
        return np.asarray(rho, dtype=float) * self.g(rho)

    def U(self, rho):
        return self.params.lam * np.asarray(rho, dtype=float) * self.V(rho)

    def W(self, rho):
        rho = np.asarray(rho, dtype=float)
        return -self.V(rho) - 0.5 * rho * self.dV(rho)

    def p(self, rho):
        rho = np.asarray(rho, dtype=float)
        return self.params.gamma_const * rho**2 * self.V(rho)


def bobnev_params(R: float, n: int, B0: float, P0: float) -> BobnevParams:
    if not (np.isfinite(R) and np.isfinite(B0) and np.isfinite(P0)):
        raise ValueError("parameters must be finite")
    if n < 1:
        raise ValueError("n must be a positive integer")
    lam = bobnev_roots(R, n)[n - 1]
    c = float(v0_profile(2 * lam * R))
    if abs(1 - c) < 1e-14:
        raise DegenerateNormalizationError("V0(2 lambda R) = 1: profile normalisation is singular")
    gamma = lam**2 * B0 * c / (1 - c)
    return BobnevParams(R=R, n=n, lam=lam, B0=B0, P0=P0, gamma_const=gamma)


def bobnev_state(R: float = 1.0, n: int = 3, B0: float = 100.0, P0: float = 4500.0):
    """Vortex as an ``MhdState`` together with its parameters and profiles.

    The surface label is the gauge-fixed pressure P - P0, which is constant
    on magnetic surfaces and vanishes on the separatrix spheres and the
    boundary.
    """
    params = bobnev_params(R, n, B0, P0)
    prof = BobnevProfiles(params)
    lam, gamma = params.lam, params.gamma_const
    dom = Ball(R)

    def B(x):
        x_, y_, z_ = x[..., 0], x[..., 1], x[..., 2]
        rho = np.sqrt(x_**2 + y_**2 + z_**2)
        V = prof.V(rho)
        hg = 0.5 * prof.g(rho)
        return np.stack([-hg * z_ * x_ - lam * V * y_, -hg * z_ * y_ + lam * V * x_, V + hg * (x_**2 + y_**2)], axis=-1)

    def dP(x):
        x_, y_, z_ = x[..., 0], x[..., 1], x[..., 2]
        rho = np.sqrt(x_**2 + y_**2 + z_**2)
        return gamma * prof.V(rho) * (x_**2 + y_**2)

    st = MhdState(
        B=VectorField(B, domain=dom),
        P=ScalarField(lambda x: P0 + dP(x), domain=dom),
        surface_label=ScalarField(dP, domain=dom),
        domain=dom,
        meta={"solution": "bobnev", "R": R, "n": n, "B0": B0, "P0": P0},
    )
    return st, params, prof


def separatrix_radii(params: BobnevParams, n_scan: int = 4000) -> list[float]:
    """Zeros of V on (0, R): the spherical separatrices of the vortex."""
    prof = BobnevProfiles(params)
    R = params.R
    rho = np.linspace(0.0, R, n_scan + 1)[1:-1]
    v = prof.V(rho)
    out = []
    for i in np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]:
        r = brentq(lambda t: float(prof.V(t)), rho[i], rho[i + 1], xtol=1e-16, rtol=4 * np.finfo(float).eps)
        out.append(float(r))
    out.extend(float(r) for r in rho[v == 0.0])
    return sorted(out)
