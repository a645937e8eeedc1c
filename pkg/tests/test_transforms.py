import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cglequil.errors import DegenerateTransformError, FireHoseError, SurfaceLabelError, UndefinedCriterionError
from cglequil.fields import (
    CglState,
    Everywhere,
    MhdState,
    ScalarField,
    VectorField,
    cgl_sweep,
    mhd_sweep,
    theorem1_sweep,
)
from cglequil.transforms import (
    EuclideanMotion,
    GroupElement,
    SurfaceFunction,
    apply_dilation,
    apply_isometry,
    apply_pressure_shift,
    apply_scaling,
    cgl_to_mhd,
    compose,
    embed,
    euler_rotation,
    firehose_unstable,
    generator_study,
    identity,
    infinite_transform,
    inverse,
    label_defect,
    mhd_to_cgl,
    mirror_unstable,
    transformed_p_par,
)

BASIS = [SurfaceFunction.affine(0.0, 1e-3), SurfaceFunction(np.sin, "sin"), SurfaceFunction(lambda s: 1e-4 * s**2, "sq")]

elements = st.builds(
    lambda a, cs: GroupElement(a, tuple(sorted((f.key, c, f) for f, c in zip(BASIS, cs) if c != 0))),
    st.sampled_from([1, -1]),
    st.lists(st.integers(-3, 3), min_size=3, max_size=3),
)


@pytest.fixture(scope="module")
def cgl_vortex(vortex):
    st_, _, _ = vortex
    return mhd_to_cgl(st_, SurfaceFunction.oscillatory(200.0, 60.0))


def _uniform_cgl(tau, label=True):
    return CglState(
        VectorField.constant([0.0, 0.0, 2.0]),
        ScalarField.constant(5.0),
        ScalarField.constant(tau),
        ScalarField(lambda x: x[..., 0]) if label else None,
        Everywhere(1.0),
    )


# -- group algebra --------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(elements, elements, elements)
def test_group_axioms(a, b, c):
    assert compose(compose(a, b), c) == compose(a, compose(b, c))
    assert compose(a, b) == compose(b, a)
    assert compose(a, inverse(a)) == identity()
    assert compose(a, identity()) == a


@settings(max_examples=50, deadline=None)
@given(elements, elements)
def test_composed_multiplier_is_product(a, b):
    s = np.linspace(-300, 300, 41)
    np.testing.assert_allclose(compose(a, b).multiplier()(s), a.multiplier()(s) * b.multiplier()(s), rtol=1e-13)


def test_group_element_alpha_validated():
    with pytest.raises(ValueError):
        GroupElement(2, ())


def test_surface_function_prime_fallback():
    f = SurfaceFunction(lambda s: s**3)
    assert f.prime(2.0) == pytest.approx(12.0, rel=1e-8)
    assert SurfaceFunction.oscillatory().prime(10.0) == pytest.approx(
        np.sin(1 / 6) / 200 + 10 / 12000 * np.cos(1 / 6), rel=1e-12
    )


def test_tabulated_function_interpolates():
    f = SurfaceFunction.tabulated([0, 1, 2], [1.0, 2.0, 4.0])
    np.testing.assert_allclose(f([0, 1, 2]), [1.0, 2.0, 4.0])


# -- Euclidean motions and scalings --------------------------------------------------


def test_euler_rotation_orthogonal():
    A = euler_rotation(0.3, -1.1, 2.0)
    np.testing.assert_allclose(A @ A.T, np.eye(3), atol=1e-15)
    assert np.linalg.det(A) == pytest.approx(1.0)


def test_isometry_preserves_equilibrium(vortex):
    st_, _, _ = vortex
    m = EuclideanMotion((0.5, -0.2, 1.0), (0.3, 0.7, -0.4))
    moved = apply_isometry(st_, m)
    pts = m(st_.domain.lattice(5))
    assert mhd_sweep(moved, pts).relative < 1e-5
    x = st_.domain.lattice(3)
    np.testing.assert_allclose(moved.B(m(x)), st_.B(x) @ m.rotation.T, atol=1e-10)


def test_scaling_and_dilation(vortex):
    st_, _, _ = vortex
    s = apply_scaling(st_, 3.0)
    pts = st_.domain.lattice(4)
    np.testing.assert_allclose(s.P(pts), 9.0 * st_.P(pts))
    assert mhd_sweep(s, pts).relative < 1e-5
    d = apply_dilation(st_, 2.0)
    assert mhd_sweep(d, 2.0 * pts).relative < 1e-5
    with pytest.raises(ValueError):
        apply_dilation(st_, 0.0)


def test_pressure_shift(vortex):
    st_, _, _ = vortex
    pts = st_.domain.lattice(3)
    np.testing.assert_allclose(apply_pressure_shift(st_, 7.0).P(pts), st_.P(pts) + 7.0)


# -- MHD -> CGL -----------------------------------------------------------------


def test_mhd_to_cgl_is_cgl_equilibrium(cgl_vortex, vortex):
    pts = vortex[0].domain.lattice(8)
    assert cgl_sweep(cgl_vortex, pts).relative < 1e-5
    assert theorem1_sweep(cgl_vortex, pts).relative < 1e-5


def test_round_trip(vortex, cgl_vortex):
    st_, _, _ = vortex
    back = cgl_to_mhd(cgl_vortex)
    pts = st_.domain.lattice(10)
    B0 = st_.B(pts)
    assert np.max(np.linalg.norm(back.B(pts) - B0, axis=-1)) / np.max(np.linalg.norm(B0, axis=-1)) < 1e-12
    gauge = back.P(pts) - st_.P(pts)
    assert np.ptp(gauge) / np.max(np.abs(st_.P(pts))) < 1e-12


def test_p_perp_formula(vortex):
    st_, _, _ = vortex
    M = SurfaceFunction.oscillatory()
    c = mhd_to_cgl(st_, M, P1=3.0)
    pts = st_.domain.lattice(4)
    m = M(st_.surface_label(pts))
    b2 = np.sum(st_.B(pts) ** 2, -1)
    np.testing.assert_allclose(c.B(pts), m[..., None] * st_.B(pts), rtol=1e-15)
    np.testing.assert_allclose(c.tau(pts), 1 - m**-2, rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(c.p_perp(pts), 3.0 + st_.P(pts) + 0.5 * b2 * (1 - m**2), rtol=1e-13)


def test_constant_one_multiplier_is_embedding(vortex):
    st_, _, _ = vortex
    c = mhd_to_cgl(st_, SurfaceFunction.constant(1.0))
    pts = st_.domain.lattice(3)
    np.testing.assert_array_equal(c.B(pts), st_.B(pts))
    np.testing.assert_array_equal(c.tau(pts), 0.0)
    e = embed(st_)
    np.testing.assert_array_equal(e.p_perp(pts), st_.P(pts))


def test_infinite_transform_invariants(cgl_vortex, vortex):
    pts = vortex[0].domain.lattice(10)
    M2 = SurfaceFunction.affine(1.2, 1e-3)
    out = infinite_transform(cgl_vortex, M2)
    a = np.sqrt(1 - out.tau(pts))[..., None] * out.B(pts)
    b = np.sqrt(1 - cgl_vortex.tau(pts))[..., None] * cgl_vortex.B(pts)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13 * np.max(np.abs(b)))
    np.testing.assert_allclose(out.mean_pressure(pts), cgl_vortex.mean_pressure(pts), rtol=1e-13)
    np.testing.assert_allclose(out.p_par(pts), transformed_p_par(cgl_vortex, M2)(pts), rtol=1e-12)


def test_two_step_equals_product(cgl_vortex, vortex):
    pts = vortex[0].domain.lattice(6)
    g = GroupElement.from_function(1, SurfaceFunction.affine(0.1, 1e-3))
    h = GroupElement.from_function(-1, SurfaceFunction(lambda s: 0.2 * np.sin(s / 50), "s"))
    two = infinite_transform(infinite_transform(cgl_vortex, g), h)
    one = infinite_transform(cgl_vortex, compose(g, h))
    np.testing.assert_allclose(two.B(pts), one.B(pts), rtol=1e-13, atol=1e-13 * 100)
    np.testing.assert_allclose(two.tau(pts), one.tau(pts), rtol=1e-13, atol=1e-13)


def test_multiplier_near_zero_rejected(vortex):
    st_, _, _ = vortex
    with pytest.raises(DegenerateTransformError):
        mhd_to_cgl(st_, SurfaceFunction.affine(0.0, 0.01))


def test_raw_pressure_label_rejected(vortex):
    # with the raw pressure as label the vortex multiplier crosses zero
    st_, _, _ = vortex
    from dataclasses import replace

    raw = replace(st_, surface_label=st_.P)
    with pytest.raises(DegenerateTransformError):
        mhd_to_cgl(raw, SurfaceFunction.oscillatory())


def test_bad_label_rejected(vortex):
    st_, _, _ = vortex
    from dataclasses import replace

    bad = replace(st_, surface_label=ScalarField(lambda x: x[..., 2], domain=st_.domain))
    assert label_defect(bad, st_.domain.lattice(4)) > 1e-3
    with pytest.raises(SurfaceLabelError):
        mhd_to_cgl(bad, SurfaceFunction.constant(2.0))


def test_missing_label():
    with pytest.raises(SurfaceLabelError):
        infinite_transform(_uniform_cgl(0.2, label=False), SurfaceFunction.constant(2.0))


def test_cgl_to_mhd_firehose():
    with pytest.raises(FireHoseError):
        cgl_to_mhd(_uniform_cgl(1.5)).B(np.zeros(3))


@pytest.mark.parametrize("m", [0.2, 1.0, 5.0])
@pytest.mark.parametrize("tau", [-1.0, 0.5, 2.0])
def test_firehose_sign_invariant(m, tau):
    c = _uniform_cgl(tau)
    out = infinite_transform(c, SurfaceFunction.constant(m))
    x = np.array([[0.1, 0.2, 0.3]])
    assert np.sign(1 - out.tau(x)) == np.sign(1 - c.tau(x))
    assert firehose_unstable(out, x) == firehose_unstable(c, x)


def test_mirror_criterion():
    c = _uniform_cgl(0.5)
    assert not mirror_unstable(c, np.zeros((1, 3)))[0]
    z = CglState(VectorField.constant([1.0, 0, 0]), ScalarField.constant(0.0), ScalarField.constant(0.0))
    with pytest.raises(UndefinedCriterionError):
        mirror_unstable(z, np.zeros(3))


# -- generators -----------------------------------------------------------------


def test_generator_slopes(vortex):
    st_, _, _ = vortex
    pts = st_.domain.lattice(5)
    assert generator_study(st_, "scaling", pts).passed()
    shift = generator_study(st_, "pressure_shift", pts)
    assert shift.exact and shift.passed()
    inf = generator_study(st_, "infinite", pts, f=SurfaceFunction.constant(1.0))
    assert inf.slope == pytest.approx(2.0, abs=0.2)


def test_broken_generator_detected(vortex):
    # the Euclidean-invariant scaling B -> (1+eps) B with P fixed is no symmetry
    st_, _, _ = vortex
    from cglequil.transforms import infinitesimal_generator_check

    pts = st_.domain.lattice(4)
    good = infinitesimal_generator_check(st_, "scaling", 1e-3, pts)
    bad_state = MhdState(VectorField(lambda x: 1.001 * st_.B.func(x), domain=st_.domain), st_.P, st_.surface_label, st_.domain)
    assert mhd_sweep(bad_state, pts).relative > 100 * good
