import numpy as np
import pytest

from cglequil.errors import DivergenceError, SingularAxisError
from cglequil.fields import CylindricalShell, FdScheme, div, mhd_sweep
from cglequil.gs import (
    AxisymmetricEquilibrium,
    FluxFunction,
    FluxGrid,
    ProfilePair,
    SolverConfig,
    gs_components,
    gs_field,
    gs_operator,
    gs_residual,
    jfko_field,
    jfko_residual,
    manufactured_problem,
    solovev,
    solve_gs,
    solve_gs_picard,
)


def _boundary_from(psi, n=33, r_range=(0.5, 1.5), z_range=(-0.5, 0.5)):
    """Grid holding exact Psi on the boundary and zeros inside."""
    g = FluxGrid.uniform(r_range, z_range, n, n, psi=psi)
    g.psi[1:-1, 1:-1] = 0.0
    return g


# -- grids and residuals ----------------------------------------------------------


def test_grid_validation():
    with pytest.raises(SingularAxisError):
        FluxGrid.uniform((0.0, 1.0), (0, 1), 5, 5)
    with pytest.raises(ValueError):
        FluxGrid([1.0, 1.1, 1.5], [0, 1, 2], np.zeros((3, 3)))
    with pytest.raises(ValueError):
        FluxGrid([1.0, 2.0], [0, 1], np.zeros((3, 2)))


def test_operator_annihilates_r_squared():
    # Delta* r^2 = 2 - 2 = 0 exactly, and Delta* z = 0
    g = FluxGrid.uniform((0.5, 1.5), (-1, 1), 11, 13, psi=lambda r, z: 3 * r**2 + z)
    np.testing.assert_allclose(gs_operator(g), 0.0, atol=1e-10)


def test_operator_on_r_fourth():
    # Delta* r^4 = 12 r^2 - 4 r^2 = 8 r^2; central differences are exact up to the r^4 term
    g = FluxGrid.uniform((0.5, 1.5), (-1, 1), 41, 5, psi=lambda r, z: r**4)
    R, _ = g.mesh()
    np.testing.assert_allclose(gs_operator(g), 8 * R[1:-1, 1:-1] ** 2, rtol=1e-3)


def test_solovev_grid_residual_small():
    eq = solovev()
    g = FluxGrid.uniform((0.5, 1.5), (-0.5, 0.5), 41, 41, psi=eq.flux.psi)
    # central differences of beta r^4 / 8 leave exactly -beta dr^2 / 4
    np.testing.assert_allclose(gs_residual(g, eq.profiles), -0.25 * g.dr**2, atol=1e-10)


def test_jfko_reduces_to_gs_at_zero_pitch():
    eq = solovev(c=0.3)
    g = FluxGrid.uniform((0.5, 1.5), (-0.5, 0.5), 21, 21, psi=eq.flux.psi, coord="u")
    R, _ = g.mesh()
    np.testing.assert_allclose(
        jfko_residual(g, eq.profiles, 0.0) * R[1:-1, 1:-1] ** 2, gs_residual(g, eq.profiles), atol=1e-12
    )


def test_affine_coefficients():
    p = ProfilePair.linear(I0=2.0, I1=0.5, P0=1.0, P1=-3.0)
    np.testing.assert_allclose(p.affine_coefficients(), [1.0, 0.25, -3.0, 0.0])
    quad = ProfilePair(np.zeros_like, np.zeros_like, lambda s: s**3, lambda s: 3 * np.asarray(s) ** 2)
    with pytest.raises(ValueError):
        quad.affine_coefficients()


# -- field lifting ----------------------------------------------------------------


def test_uniform_axial_field():
    flux = FluxFunction(lambda r, z: r**2 / 2, lambda r, z: r, lambda r, z: np.zeros_like(r))
    B = gs_field(flux, lambda s: np.zeros_like(s))
    x = np.array([[0.3, 0.4, 0.1], [-1.0, 2.0, 5.0]])
    np.testing.assert_allclose(B(x), [[0, 0, -1], [0, 0, -1]], atol=1e-15)


def test_axis_rejected():
    flux = FluxFunction(lambda r, z: r**2, lambda r, z: 2 * r, lambda r, z: 0 * r)
    with pytest.raises(SingularAxisError):
        gs_components(flux, lambda s: s, 0.0, 0.0)
    with pytest.raises(SingularAxisError):
        gs_field(flux, lambda s: s)(np.zeros(3))


def test_solovev_is_mhd_equilibrium():
    eq = solovev(c=0.3)
    pts = eq.domain.lattice(8)
    rep = mhd_sweep(eq.state, pts, FdScheme(h=1e-3))
    assert rep.relative < 1e-4
    assert rep.solenoidal / rep.solenoidal_scale < 1e-5


def test_jfko_field_divergence_free_and_helical():
    gamma = 0.4
    flux = FluxFunction(
        lambda r, u: r**2 * np.cos(u / gamma),
        lambda r, u: 2 * r * np.cos(u / gamma),
        lambda r, u: -(r**2) / gamma * np.sin(u / gamma),
    )
    B = jfko_field(flux, lambda s: 1.0 + 0.1 * s, gamma)
    rng = np.random.default_rng(3)
    r = rng.uniform(0.5, 1.5, 20)
    ph = rng.uniform(-2.5, 2.5, 20)
    z = rng.uniform(-1, 1, 20)
    x = np.stack([r * np.cos(ph), r * np.sin(ph), z], -1)
    assert np.max(np.abs(div(B, x, FdScheme(h=1e-4, order="central4")))) < 1e-7
    d = 0.3
    c, s = np.cos(d), np.sin(d)
    rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    moved = x @ rot.T + np.array([0, 0, gamma * d])
    np.testing.assert_allclose(B(moved), B(x) @ rot.T, atol=1e-12)


# -- solver -----------------------------------------------------------------------


def test_zero_boundary_gives_zero():
    g = solve_gs(FluxGrid.uniform((0.5, 1.5), (-0.5, 0.5), 17, 17))
    np.testing.assert_array_equal(g.psi, 0.0)


def test_manufactured_second_order():
    psi, src = manufactured_problem()
    errs = []
    for n in (17, 33, 65):
        g = solve_gs(_boundary_from(psi, n), source=src, config=SolverConfig(tolerance=1e-13))
        R, Z = g.mesh()
        errs.append(np.max(np.abs(g.psi - psi(R, Z))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    np.testing.assert_allclose(orders, 2.0, atol=0.1)


def test_solovev_recovered_by_solver():
    eq = solovev(c=0.3)
    g = solve_gs(_boundary_from(eq.flux.psi, 33), eq.profiles, SolverConfig(tolerance=1e-13))
    R, Z = g.mesh()
    assert np.max(np.abs(g.psi - eq.flux.psi(R, Z))) < 1e-3 * np.max(np.abs(g.psi))
    assert g.residual_norm < 1e-9


def test_maximum_principle():
    rng = np.random.default_rng(7)
    g = FluxGrid.uniform((0.5, 1.5), (-0.5, 0.5), 21, 21)
    edge = np.ones_like(g.psi, bool)
    edge[1:-1, 1:-1] = False
    g.psi[edge] = rng.uniform(-1, 1, edge.sum())
    out = solve_gs(g)
    inner = out.psi[1:-1, 1:-1]
    assert inner.max() <= g.psi[edge].max() and inner.min() >= g.psi[edge].min()


def test_divergence_reports_history():
    psi, src = manufactured_problem()
    with pytest.raises(DivergenceError) as info:
        solve_gs(_boundary_from(psi, 33), source=src, config=SolverConfig(max_iterations=20, omega=1.99))
    assert len(info.value.history) == 20


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(omega=2.5)
    with pytest.raises(ValueError):
        SolverConfig(tolerance=0.0)


def test_picard_matches_direct_for_linear_profiles():
    eq = solovev()
    b = _boundary_from(eq.flux.psi, 21)
    direct = solve_gs(b, eq.profiles)
    picard = solve_gs_picard(b, eq.profiles)
    np.testing.assert_allclose(picard.psi, direct.psi, atol=1e-9)


def test_picard_nonlinear_profile():
    prof = ProfilePair(
        lambda s: np.zeros_like(np.asarray(s, float)),
        lambda s: np.zeros_like(np.asarray(s, float)),
        lambda s: 0.1 * np.asarray(s) ** 3 / 3,
        lambda s: 0.1 * np.asarray(s) ** 2,
    )
    b = _boundary_from(lambda r, z: r**2, 21)
    g = solve_gs_picard(b, prof)
    assert g.residual_norm < 1e-8
    assert len(g.history) > 1


def test_solved_grid_to_field_pipeline():
    eq = solovev(c=0.3)
    g = solve_gs(_boundary_from(eq.flux.psi, 65), eq.profiles)
    num = AxisymmetricEquilibrium.from_grid(g, eq.profiles)
    assert isinstance(num.domain, CylindricalShell)
    r = np.linspace(0.6, 1.4, 9)
    z = np.linspace(-0.4, 0.4, 9)
    got = np.stack(num.components(r, z), -1)
    want = np.stack(eq.components(r, z), -1)
    np.testing.assert_allclose(got, want, atol=1e-3 * np.max(np.abs(want)))
    rep = mhd_sweep(num.state, num.domain.lattice(5), FdScheme(h=1e-3))
    assert rep.solenoidal / rep.solenoidal_scale < 1e-5
