import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cglequil.bobnev import (
    BobnevProfiles,
    root_tolerance,
    bobnev_params,
    bobnev_roots,
    bobnev_state,
    eigen_residual,
    separatrix_radii,
    v0_prime_over_x,
    v0_profile,
)
from cglequil.fields import FdScheme, mhd_sweep, spherical_basis


def test_first_three_roots():
    np.testing.assert_allclose(bobnev_roots(1.0, 3), [2.881729598, 4.547505665, 6.161470485], atol=1e-8)


def test_roots_scale_with_radius():
    np.testing.assert_allclose(bobnev_roots(2.0, 3), np.array(bobnev_roots(1.0, 3)) / 2, rtol=1e-14)


def test_root_residuals_polished():
    lams = bobnev_roots(1.0, 12)
    for lam in lams[:3]:
        assert abs(eigen_residual(lam)) < 1e-12
    for lam in lams:
        assert abs(eigen_residual(lam)) < root_tolerance(lam)


def test_roots_increasing_and_distinct():
    r = np.array(bobnev_roots(1.0, 10))
    assert np.all(np.diff(r) > 1.0)


def test_roots_bad_input():
    with pytest.raises(ValueError):
        bobnev_roots(0.0, 3)
    with pytest.raises(ValueError):
        bobnev_roots(1.0, 0)


def test_v0_limits():
    assert v0_profile(0.0) == pytest.approx(1.0)
    assert v0_prime_over_x(0.0) == pytest.approx(-0.2)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 20.0))
def test_v0_matches_closed_form(x):
    closed = 3 * (np.sin(x) / x**3 - np.cos(x) / x**2)
    assert float(v0_profile(x)) == pytest.approx(closed, abs=1e-9 if x < 0.05 else 1e-12)


def test_v0_series_continuous_at_cutoff():
    x = np.array([0.5 - 1e-12, 0.5 + 1e-12])
    assert abs(np.diff(v0_profile(x))[0]) < 1e-12
    assert abs(np.diff(v0_prime_over_x(x))[0]) < 1e-12


def test_v0_prime_matches_derivative():
    x = np.linspace(0.01, 15, 200)
    h = 1e-6
    fd = (v0_profile(x + h) - v0_profile(x - h)) / (2 * h) / x
    np.testing.assert_allclose(v0_prime_over_x(x), fd, atol=1e-7)


def test_gamma_value():
    p = bobnev_params(1.0, 3, 100.0, 4500.0)
    assert p.gamma_const == pytest.approx(-72.831, abs=5e-3)
    assert p.lam == pytest.approx(6.161470485, abs=1e-8)


def test_separatrices():
    p = bobnev_params(1.0, 3, 100.0, 4500.0)
    r = separatrix_radii(p)
    np.testing.assert_allclose(r, [0.376, 0.597], atol=5e-4)
    prof = BobnevProfiles(p)
    assert np.all(np.abs(prof.V(np.array(r))) < 1e-12)


def test_separatrix_count_grows_with_n():
    assert len(separatrix_radii(bobnev_params(1.0, 1, 1.0, 0.0))) == 0
    assert len(separatrix_radii(bobnev_params(1.0, 2, 1.0, 0.0))) == 1


def test_profiles_vanish_at_boundary():
    p = bobnev_params(1.0, 3, 100.0, 4500.0)
    prof = BobnevProfiles(p)
    assert abs(prof.V(1.0)) < 1e-12
    assert prof.V(0.0) == pytest.approx(100.0)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        bobnev_params(float("nan"), 3, 1.0, 0.0)
    with pytest.raises(ValueError):
        bobnev_params(1.0, 0, 1.0, 0.0)


def test_cartesian_field_matches_spherical_form(vortex, rng):
    st_, params, prof = vortex
    rho = rng.uniform(0.05, 0.95, 50)
    th = rng.uniform(0.05, np.pi - 0.05, 50)
    ph = rng.uniform(0, 2 * np.pi, 50)
    x = np.stack([rho * np.sin(th) * np.cos(ph), rho * np.sin(th) * np.sin(ph), rho * np.cos(th)], -1)
    comps = np.stack([prof.V(rho) * np.cos(th), prof.W(rho) * np.sin(th), prof.U(rho) * np.sin(th)], -1)
    expected = np.einsum("...i,...ij->...j", comps, spherical_basis(th, ph))
    np.testing.assert_allclose(st_.B(x), expected, atol=1e-11)
    np.testing.assert_allclose(st_.P(x), params.P0 + prof.p(rho) * np.sin(th) ** 2, rtol=1e-14)


def test_label_constant_on_field_lines(vortex):
    st_, _, _ = vortex
    pts = st_.domain.lattice(6)
    from cglequil.fields import grad

    dot = np.sum(st_.B(pts) * grad(st_.surface_label, pts, FdScheme(h=1e-4, order="central4")), -1)
    scale = np.max(np.linalg.norm(st_.B(pts), axis=-1)) * np.max(np.linalg.norm(grad(st_.surface_label, pts), axis=-1))
    assert np.max(np.abs(dot)) / scale < 1e-9


def test_residual_second_order(vortex):
    st_, _, _ = vortex
    pts = st_.domain.lattice(10)
    norms = [mhd_sweep(st_, pts, FdScheme(h=h)).relative for h in (1e-3, 5e-4, 2.5e-4)]
    slope = np.polyfit(np.log([1e-3, 5e-4, 2.5e-4]), np.log(norms), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.3)


def test_other_eigenmode_is_equilibrium():
    st_, _, _ = bobnev_state(R=2.0, n=2, B0=5.0, P0=10.0)
    assert mhd_sweep(st_, st_.domain.lattice(6)).relative < 1e-5


def test_pressure_equals_p0_on_separatrix(vortex):
    st_, params, _ = vortex
    for r in separatrix_radii(params):
        th = np.linspace(0.1, 3.0, 7)
        x = np.stack([r * np.sin(th), np.zeros_like(th), r * np.cos(th)], -1)
        np.testing.assert_allclose(st_.P(x), params.P0, atol=1e-9)
