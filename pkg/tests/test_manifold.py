"""Geometry, sampling, eigenfunctions and integration on the model manifolds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from sepfluct import manifold as mf

MANIFOLDS = [mf.circle(), mf.flat_torus(1), mf.flat_torus(2), mf.sphere2()]


def library(m, max_eigenvalue=12.0):
    return mf.eigenfunctions_up_to(m, max_eigenvalue, include_constant=True)


# ---------------------------------------------------------------- types


def test_dimensions_and_tags():
    assert mf.circle().dim == 1
    assert mf.sphere2().dim == 2
    assert mf.flat_torus(2).chart_dim == 2
    assert mf.sphere2().chart_dim == 3
    for m in MANIFOLDS:
        assert mf.from_tag(m.tag) == m


def test_invalid_manifolds_rejected():
    with pytest.raises(mf.ManifoldError):
        mf.flat_torus(3)
    with pytest.raises(mf.ManifoldError):
        mf.ManifoldModel("circle", 2, 2 * math.pi)
    with pytest.raises(mf.ManifoldError):
        mf.from_tag("klein")


@pytest.mark.parametrize("m", MANIFOLDS, ids=lambda m: m.tag)
def test_integral_of_one_is_one(m):
    assert m.integrate(lambda p: np.ones(p.shape[0]), resolution=64) == pytest.approx(1.0, abs=1e-14)


# ---------------------------------------------------------------- sampling


def test_circle_samples_in_range():
    pts = mf.sample_points(mf.circle(), 10_000, np.random.default_rng(3))
    assert pts.shape == (10_000, 1)
    assert np.all((pts >= 0) & (pts < 2 * np.pi))


def test_torus_angles_in_range_and_cos_mean_zero():
    R = 100_000
    pts = mf.sample_points(mf.flat_torus(2), R, np.random.default_rng(4))
    assert np.all((pts >= 0) & (pts < 2 * np.pi))
    c = np.cos(pts[:, 0])
    assert abs(c.mean()) < 4 * c.std() / math.sqrt(R)


def test_sphere_samples_unit_and_z_mean_zero():
    R = 100_000
    pts = mf.sample_points(mf.sphere2(), R, np.random.default_rng(5))
    assert np.max(np.abs(np.linalg.norm(pts, axis=1) - 1.0)) < 1e-12
    assert abs(pts[:, 2].mean()) < 4 / math.sqrt(R)


def test_sphere_sampling_is_area_uniform():
    # the z coordinate of an area-uniform point is uniform on [-1, 1] (Archimedes)
    from scipy.stats import kstest

    z = mf.sample_points(mf.sphere2(), 20_000, np.random.default_rng(6))[:, 2]
    assert kstest(z, "uniform", args=(-1, 2)).pvalue > 1e-3


def test_sample_uniform_single_point_and_determinism():
    for m in MANIFOLDS:
        p = mf.sample_uniform(m, np.random.default_rng(0))
        q = mf.sample_uniform(m, np.random.default_rng(0))
        assert p.shape == (m.chart_dim,)
        np.testing.assert_array_equal(p, q)


# ---------------------------------------------------------------- distance


def test_circle_wraparound_distance():
    assert mf.geodesic_distance(mf.circle(), [0.1], [6.2]) == pytest.approx(2 * math.pi - 6.1, abs=1e-12)
    assert mf.geodesic_distance(mf.circle(), [0.1], [6.2]) == pytest.approx(0.18318, abs=1e-5)


def test_sphere_antipodal_distance():
    assert mf.geodesic_distance(mf.sphere2(), [0, 0, 1.0], [0, 0, -1.0]) == pytest.approx(math.pi, abs=1e-15)


@pytest.mark.parametrize("m", MANIFOLDS, ids=lambda m: m.tag)
def test_distance_identity_and_symmetry(m):
    pts = mf.sample_points(m, 50, np.random.default_rng(1))
    assert np.all(mf.geodesic_distance(m, pts, pts) == 0.0)
    d1 = mf.geodesic_distance(m, pts[:-1], pts[1:])
    d2 = mf.geodesic_distance(m, pts[1:], pts[:-1])
    np.testing.assert_array_equal(d1, d2)
    assert np.all(d1 > 0)


@pytest.mark.parametrize("m", MANIFOLDS, ids=lambda m: m.tag)
@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_triangle_inequality(m, seed):
    p, q, r = mf.sample_points(m, 3, np.random.default_rng(seed))
    d = lambda a, b: mf.geodesic_distance(m, a, b)  # noqa: E731
    assert d(p, r) <= d(p, q) + d(q, r) + 1e-12


def test_torus_distance_is_euclidean_in_wrapped_coordinates():
    m = mf.flat_torus(2)
    assert mf.geodesic_distance(m, [0.1, 0.2], [6.2, 0.6]) == pytest.approx(math.hypot(2 * math.pi - 6.1, 0.4))


# ---------------------------------------------------------------- eigenfunctions


def test_circle_k1_is_scaled_cosine():
    f = mf.eigenfunction(mf.circle(), 1)
    th = np.linspace(0, 2 * np.pi, 7)[:, None]
    np.testing.assert_allclose(f(th), math.sqrt(2) * np.cos(th[:, 0]))
    assert f.eigenvalue == 1.0
    assert mf.integrate(mf.circle(), lambda p: f(p) ** 2, resolution=256) == pytest.approx(1.0, abs=1e-12)


def test_circle_k0_is_constant():
    f = mf.eigenfunction(mf.circle(), 0)
    th = np.random.default_rng(0).uniform(0, 2 * np.pi, (20, 1))
    np.testing.assert_array_equal(f(th), np.ones(20))
    assert f.eigenvalue == 0.0


@pytest.mark.parametrize("bad", [(1, 2), 1.5, "k", True])
def test_invalid_circle_index(bad):
    with pytest.raises(mf.ManifoldError):
        mf.eigenfunction(mf.circle(), bad)


@pytest.mark.parametrize("bad", [(1, 2), (-1, 0), (2,), 3])
def test_invalid_sphere_index(bad):
    with pytest.raises(mf.ManifoldError):
        mf.eigenfunction(mf.sphere2(), bad)


def test_invalid_torus_index():
    with pytest.raises(mf.ManifoldError):
        mf.eigenfunction(mf.flat_torus(2), 1)
    with pytest.raises(mf.ManifoldError):
        mf.eigenfunction(mf.flat_torus(2), (1, 0, 0))


def test_eigenvalues_follow_index():
    assert mf.eigenfunction(mf.circle(), -3).eigenvalue == 9
    assert mf.eigenfunction(mf.flat_torus(2), (1, -2)).eigenvalue == 5
    assert mf.eigenfunction(mf.sphere2(), (3, -2)).eigenvalue == 12


@pytest.mark.parametrize("m", MANIFOLDS, ids=lambda m: m.tag)
def test_laplacian_matches_eigenvalue_pointwise(m):
    pts = mf.sample_points(m, 1000, np.random.default_rng(2))
    for f in library(m):
        assert np.max(np.abs(f.laplacian(pts) + f.eigenvalue * f(pts))) < 1e-10, f.name


def _chart_laplacian_fd(m, f, pts, h=1e-4):
    """Second-order central differences of the Laplace-Beltrami operator in chart coordinates."""
    if m.kind != "sphere":
        out = np.zeros(pts.shape[0])
        for a in range(m.dim):
            e = np.zeros(m.dim)
            e[a] = h
            out += (f(pts + e) - 2 * f(pts) + f(pts - e)) / h**2
        return out
    theta = np.arccos(pts[:, 2])
    phi = np.arctan2(pts[:, 1], pts[:, 0])

    def F(th, ph):
        return f(np.column_stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]))

    d2th = (F(theta + h, phi) - 2 * F(theta, phi) + F(theta - h, phi)) / h**2
    dth = (F(theta + h, phi) - F(theta - h, phi)) / (2 * h)
    d2ph = (F(theta, phi + h) - 2 * F(theta, phi) + F(theta, phi - h)) / h**2
    return d2th + np.cos(theta) / np.sin(theta) * dth + d2ph / np.sin(theta) ** 2


def _chart_grad_sq_fd(m, f, pts, h=1e-6):
    if m.kind != "sphere":
        out = np.zeros(pts.shape[0])
        for a in range(m.dim):
            e = np.zeros(m.dim)
            e[a] = h
            out += ((f(pts + e) - f(pts - e)) / (2 * h)) ** 2
        return out
    theta = np.arccos(pts[:, 2])
    phi = np.arctan2(pts[:, 1], pts[:, 0])

    def F(th, ph):
        return f(np.column_stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]))

    dth = (F(theta + h, phi) - F(theta - h, phi)) / (2 * h)
    dph = (F(theta, phi + h) - F(theta, phi - h)) / (2 * h)
    return dth**2 + dph**2 / np.sin(theta) ** 2


@pytest.mark.parametrize("m", MANIFOLDS, ids=lambda m: m.tag)
def test_closed_form_laplacian_against_finite_differences(m):
    pts = mf.sample_points(m, 100, np.random.default_rng(7))
    if m.kind == "sphere":  # keep away from the chart poles
        pts = pts[np.abs(pts[:, 2]) < 0.95]
    for f in library(m, 6.0):
        fd = _chart_laplacian_fd(m, f, pts)
        np.testing.assert_allclose(f.laplacian(pts), fd, atol=2e-5 * (1 + f.eigenvalue), err_msg=f.name)


def test_sphere_l1_m0_is_z_with_eigenvalue_two():
    m = mf.sphere2()
    f = mf.eigenfunction(m, (1, 0))
    pts = mf.sample_points(m, 100, np.random.default_rng(8))
    np.testing.assert_allclose(f(pts), math.sqrt(3) * pts[:, 2], atol=1e-14)
    pts = pts[np.abs(pts[:, 2]) < 0.95]
    np.testing.assert_allclose(_chart_laplacian_fd(m, f, pts), -2 * f(pts), atol=1e-5)


@pytest.mark.parametrize("m", MANIFOLDS, ids=lambda m: m.tag)
def test_closed_form_gradient_against_finite_differences(m):
    pts = mf.sample_points(m, 100, np.random.default_rng(9))
    if m.kind == "sphere":
        pts = pts[np.abs(pts[:, 2]) < 0.95]
    for f in library(m, 6.0):
        np.testing.assert_allclose(f.grad_sq(pts), _chart_grad_sq_fd(m, f, pts), atol=1e-6, err_msg=f.name)


def test_sphere_harmonics_match_scipy_up_to_sign():
    """Real harmonics equal sqrt(4 pi) times scipy's complex ones (real or imaginary part, sqrt 2 for m != 0)."""
    m = mf.sphere2()
    pts = mf.sample_points(m, 200, np.random.default_rng(10))
    theta = np.arccos(pts[:, 2])
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    for ell in range(4):
        for mm in range(-ell, ell + 1):
            y = special.sph_harm_y(ell, abs(mm), theta, phi)
            ref = math.sqrt(4 * math.pi) * (y.real if mm >= 0 else y.imag) * (math.sqrt(2) if mm else 1.0)
            got = mf.eigenfunction(m, (ell, mm))(pts)
            sign = np.sign(np.dot(got, ref))
            np.testing.assert_allclose(got, sign * ref, atol=1e-12, err_msg=f"l={ell}, m={mm}")


@pytest.mark.parametrize("m", MANIFOLDS, ids=lambda m: m.tag)
def test_library_unit_norm_by_quadrature(m):
    res = 64
    for f in library(m):
        val = mf.integrate(m, lambda p: f(p) ** 2, resolution=res)
        assert val == pytest.approx(1.0, abs=1e-8), f.name
        assert f.norm_sq == 1.0


@pytest.mark.parametrize("m", MANIFOLDS, ids=lambda m: m.tag)
def test_library_orthogonality(m):
    funcs = library(m, 6.0)
    for a in range(len(funcs)):
        for b in range(a + 1, len(funcs)):
            val = mf.integrate(m, lambda p: funcs[a](p) * funcs[b](p), resolution=64)
            assert abs(val) < 1e-6, (funcs[a].name, funcs[b].name)


@pytest.mark.parametrize("m", MANIFOLDS, ids=lambda m: m.tag)
def test_dirichlet_energy_equals_eigenvalue(m):
    for f in library(m, 6.0):
        val = mf.integrate(m, f.grad_sq, resolution=64)
        assert val == pytest.approx(f.eigenvalue, abs=1e-8), f.name
        assert f.grad_sq_integral == pytest.approx(f.eigenvalue)


def test_circle_gradient_square_integral_by_quadrature():
    f = mf.eigenfunction(mf.circle(), 1)
    th = np.linspace(0, 2 * np.pi, 9)[:, None]
    np.testing.assert_allclose(f.grad_sq(th), 2 * np.sin(th[:, 0]) ** 2, atol=1e-15)
    assert mf.integrate(mf.circle(), lambda p: 2 * np.sin(p[:, 0]) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_closed_form_integral_short_circuit():
    f = mf.eigenfunction(mf.sphere2(), (2, 1))
    assert mf.integrate(mf.sphere2(), f) == 0.0
    assert mf.integrate(mf.circle(), mf.eigenfunction(mf.circle(), 0)) == 1.0


def test_eigenfunctions_up_to_counts():
    assert len(mf.eigenfunctions_up_to(mf.circle(), 10)) == 6
    assert len(mf.eigenfunctions_up_to(mf.sphere2(), 6)) == 8
    # lattice points with 0 < k1^2 + k2^2 <= 2
    assert len(mf.eigenfunctions_up_to(mf.flat_torus(2), 2)) == 8


def test_evaluators_are_pure():
    f = mf.eigenfunction(mf.flat_torus(2), (1, 2))
    pts = mf.sample_points(mf.flat_torus(2), 10, np.random.default_rng(0))
    before = pts.copy()
    a, b = f(pts), f(pts)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(pts, before)
