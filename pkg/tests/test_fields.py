import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from magtrace.errors import ConfigurationError, PreconditionError
from magtrace.fields import (
    AgmonCutoff,
    ConstantField,
    ExprField,
    MagneticField,
    connecting_gauge,
    curl,
    cutoff_modify,
    gauge_shift,
    gaussian_bump_gauge,
    harmonic,
    landau_gauge,
    line_integral,
    norm_sq,
    polynomial_gauge_function,
    quartic,
    same_field,
    symmetric_gauge,
    triangle_flux,
)

coord = st.floats(-2.0, 2.0, allow_nan=False)
point2 = st.tuples(coord, coord)
small = st.floats(-1.0, 1.0, allow_nan=False)


def test_expr_field_derivatives_match_closed_form():
    V = quartic(1, lam=0.25)
    x = np.linspace(-2, 2, 9)[None, :]
    assert np.allclose(V(x), x[0] ** 2 + x[0] ** 4 / 4)
    assert np.allclose(V.laplacian(x), 2.0 + 3.0 * x[0] ** 2)
    assert np.allclose(V.derivative((3,))(x), 6.0 * x[0])


def test_expr_field_accepts_plain_sympy_symbols():
    x1, x2 = sp.symbols("x1 x2")
    f = ExprField(2, x1**2 * x2)
    p = np.array([[1.5], [-2.0]])
    assert np.allclose(f.partial(0)(p), 2 * 1.5 * -2.0)
    assert np.allclose(f.partial(1)(p), 1.5**2)


def test_expr_field_rejects_unknown_symbols():
    with pytest.raises(ConfigurationError):
        ExprField(2, sp.Symbol("y") * 2)


def test_constant_field_is_flat():
    f = ConstantField(2, 3.0)
    assert np.allclose(f(np.zeros((2, 4))), 3.0)
    assert f.partial(0).is_zero


@pytest.mark.parametrize("gauge", [landau_gauge, symmetric_gauge])
def test_constant_field_gauges_have_curl_b(gauge):
    B = curl(gauge(0.7))
    pts = np.random.default_rng(0).uniform(-3, 3, (2, 20))
    assert np.allclose(B(pts)[0, 1], 0.7)
    assert np.allclose(B(pts)[1, 0], -0.7)


def test_bump_gauge_curl():
    A = gaussian_bump_gauge(1.3, 0.8)
    pts = np.random.default_rng(1).uniform(-2, 2, (2, 15))
    expected = 1.3 * np.exp(-np.sum(pts**2, axis=0) / 0.64)
    assert np.allclose(curl(A)(pts)[0, 1], expected, atol=1e-12)


@given(point2)
def test_connecting_gauge_landau_to_symmetric(p):
    phi = connecting_gauge(landau_gauge(1.0), symmetric_gauge(1.0))
    x = np.array(p)[:, None]
    assert np.allclose(phi(x), -0.5 * x[0] * x[1], atol=1e-12)


@given(small, small, small)
def test_gauge_shift_preserves_field(c1, c2, c3):
    phi = polynomial_gauge_function(2, {(2, 1): c1, (0, 3): c2, (1, 1): c3})
    A = landau_gauge(0.9)
    pts = np.random.default_rng(2).uniform(-2, 2, (2, 10))
    assert same_field(A, gauge_shift(A, phi), pts)


@given(point2, point2, small, small)
def test_line_integral_of_gradient_is_difference(p, q, c1, c2):
    phi = polynomial_gauge_function(2, {(3, 0): c1, (1, 2): c2})
    grad = gauge_shift(landau_gauge(0.0), phi)
    x, y = np.array(p)[:, None], np.array(q)[:, None]
    assert np.allclose(line_integral(grad, x, y), phi(y) - phi(x), atol=1e-11)


@given(point2, point2, point2)
def test_triangle_flux_constant_field(x, y, z):
    b = 0.6
    B = MagneticField(2, {(0, 1): ConstantField(2, b)})
    x, y, z = (np.array(v)[:, None] for v in (x, y, z))
    # vertices x-y-z, x+y-z, x-y+z span edges 2y, 2z
    expected = b * 0.5 * 4.0 * (y[0] * z[1] - y[1] * z[0])
    assert np.allclose(triangle_flux(B, x, y, z), expected, atol=1e-12)


def test_norm_conventions():
    B = curl(landau_gauge(1.5))
    x = np.zeros((2, 3))
    assert np.allclose(norm_sq(B, x, "upper"), 2.25)
    assert np.allclose(norm_sq(B, x, "full"), 4.5)
    with pytest.raises(ConfigurationError):
        norm_sq(B, x, "half")


def test_agmon_cutoff_shape():
    chi = AgmonCutoff(1.0, 2.0)
    t = np.array([0.0, 0.5, 1.0])
    assert np.allclose(chi(t), t)
    assert np.allclose(chi(np.array([2.0, 5.0])), chi.plateau)
    assert chi.plateau == pytest.approx(1.5)
    s = np.linspace(1.01, 1.99, 50)
    num = np.gradient(chi(s), s)
    assert np.allclose(num[2:-2], chi(s, 1)[2:-2], atol=1e-3)
    assert np.all(np.diff(chi(np.linspace(0, 3, 200))) >= -1e-14)


def test_cutoff_modify_leaves_low_region():
    V = harmonic(1)
    Vh = cutoff_modify(V, 1.0, ceiling=3.0)
    x = np.linspace(-1.4, 1.4, 30)[None, :]
    assert np.allclose(Vh(x), V(x))
    assert np.max(Vh(np.linspace(-10, 10, 100)[None, :])) <= Vh.sigma_v + 1e-12
    with pytest.raises(PreconditionError):
        cutoff_modify(V, 1.0)
    with pytest.raises(PreconditionError):
        cutoff_modify(V, 4.0, ceiling=3.0)
