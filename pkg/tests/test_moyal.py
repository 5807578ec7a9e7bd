import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import dblquad

from magtrace.fields import (
    ConstantField,
    ExprField,
    MagneticField,
    ScalarPotential,
    curl,
    gaussian_bump_gauge,
    harmonic,
)
from magtrace.moyal import (
    MoyalCoefficientTable,
    c0,
    c1,
    c2,
    c2_resolvent,
    composition_error,
    g2_symbol,
    p22,
    p23,
    r1,
)
from magtrace.spectral import TestFunction
from magtrace.symbols import GaussianSymbol, PolySymbol, ResolventExpansion, hamiltonian_symbol, pz_symbol

x1, x2 = sp.symbols("x1 x2")
coef = st.floats(-1.5, 1.5, allow_nan=False)
X = np.array([[0.3, -0.5, 1.1], [0.2, 0.7, -0.4]])
XI = np.array([[0.4, 0.1, -0.9], [-0.6, 0.3, 0.5]])


def _const_b(b):
    return MagneticField(2, {(0, 1): ConstantField(2, b)})


def _xi(j, k=None, c=1.0):
    alpha = [0, 0]
    alpha[j] += 1
    if k is not None:
        alpha[k] += 1
    return PolySymbol.monomial(2, alpha, c)


def test_table_entries_by_direct_integration():
    tab = MoyalCoefficientTable(dim=1, max_order=1)
    ref0 = dblquad(lambda t, s: 1.0, -1, 1, lambda s: -1.0, lambda s: -s)[0]
    ref1 = dblquad(lambda t, s: s, -1, 1, lambda s: -1.0, lambda s: -s)[0]
    assert float(tab[(0,), (0,)]) == pytest.approx(ref0, abs=1e-12)
    assert float(tab[(1,), (1,)]) == pytest.approx(ref1, abs=1e-12)
    assert float(tab[(1,), (1,)]) == pytest.approx(-2.0 / 3.0)


def test_position_momentum_commutator():
    x = PolySymbol(1, {(0,): ExprField(1, x1)})
    xi = PolySymbol.monomial(1, (1,))
    comm = c1(x, xi) - c1(xi, x)
    assert np.allclose(comm(np.zeros((1, 1)), np.zeros((1, 1))), 1j)


def test_kinetic_momenta_commutator_is_field():
    b = 0.7
    B = _const_b(b)
    comm = c1(_xi(0), _xi(1), B) - c1(_xi(1), _xi(0), B)
    assert np.allclose(comm(X, XI), 1j * b)


def test_constant_field_quadratic_composition():
    # (hbar D_1 - A_1)^2 (hbar D_2 - A_2)^2 has symbol expansion ending at hbar^2
    b = 1.3
    B = _const_b(b)
    phi, psi = _xi(0, 0), _xi(1, 1)
    assert np.allclose(c1(phi, psi, B)(X, XI), 2j * b * XI[0] * XI[1])
    assert np.allclose(c2(phi, psi, B)(X, XI), -0.5 * b * b)


def test_c0_is_product():
    a = PolySymbol(2, {(1, 0): ExprField(2, x1 * x2), (0, 0): 2.0})
    c = PolySymbol(2, {(0, 2): ExprField(2, x2)})
    assert np.allclose(c0(a, c)(X, XI), a(X, XI) * c(X, XI))


def _random_symbol(c):
    return PolySymbol(
        2,
        {
            (0, 0): ExprField(2, c[0] * x1**2 + c[1] * x1 * x2),
            (1, 0): ExprField(2, c[2] * x2 + c[3]),
            (1, 1): ExprField(2, c[4] * x1),
            (0, 2): c[5],
        },
    )


@given(st.lists(coef, min_size=6, max_size=6), st.lists(coef, min_size=6, max_size=6), coef)
def test_c1_antisymmetric_c2_symmetric(ca, cb, b):
    a, c = _random_symbol(ca), _random_symbol(cb)
    for B in (None, _const_b(b), curl(gaussian_bump_gauge(b, 1.0))):
        assert np.allclose(c1(a, c, B)(X, XI), -c1(c, a, B)(X, XI), atol=1e-12)
        assert np.allclose(c2(a, c, B)(X, XI), c2(c, a, B)(X, XI), atol=1e-12)


@given(st.lists(coef, min_size=6, max_size=6), st.lists(coef, min_size=6, max_size=6))
def test_real_symbols_give_imaginary_c1_and_real_c2(ca, cb):
    a, c = _random_symbol(ca), _random_symbol(cb)
    B = curl(gaussian_bump_gauge(0.8, 1.2))
    assert np.allclose(c1(a, c, B)(X, XI).real, 0.0, atol=1e-12)
    assert np.allclose(c2(a, c, B)(X, XI).imag, 0.0, atol=1e-12)


@pytest.mark.parametrize("field", ["none", "constant", "bump"])
def test_resolvent_c2_closed_form_matches_generic(field):
    V = ScalarPotential(ExprField(2, x1**2 + 2 * x2**2 + x1 * x2**3 / 5))
    B = {"none": None, "constant": _const_b(0.8), "bump": curl(gaussian_bump_gauge(1.0, 1.0))}[field]
    z = -0.5 + 0.3j
    p, r = pz_symbol(V, z), ResolventExpansion.inverse(V, z)
    assert np.allclose(c2(p, r, B)(X, XI), c2_resolvent(z, V, B)(X, XI), rtol=1e-12)
    assert np.allclose(c1(p, r, B)(X, XI), 0.0)
    assert r1(z, V, B).is_zero


def test_g2_symbol_assembles_p22_p23():
    V = harmonic(1)
    F = hamiltonian_symbol(V)
    g = TestFunction(1.0, 0.8)
    x = np.array([[0.3, 0.6]])
    xi = np.array([[0.5, -0.2]])
    f = x[0] ** 2 + xi[0] ** 2
    # p22 = -1/8 * 2 * 2, p23 = -1/24 (2 xi^2 + 2 x^2) * ... from the closed forms
    expect22 = -0.5
    expect23 = -(1.0 / 24.0) * (2.0 * (2 * xi[0]) ** 2 + 2.0 * (2 * x[0]) ** 2)
    assert np.allclose(p22(F)(x, xi), expect22)
    assert np.allclose(p23(F)(x, xi), expect23)
    assert np.allclose(g2_symbol(g, F, x, xi), expect22 * g.derivative(f, 2) + expect23 * g.derivative(f, 3))


def test_composition_constant_symbols_exact():
    a = PolySymbol.constant(1, 2.0)
    b = PolySymbol.constant(1, -0.5)
    rep = composition_error(a, b, None, hbars=(0.3, 0.2))
    assert max(rep.errors[2]) <= 1e-14


def test_composition_orders_one_dimension():
    a = GaussianSymbol(ExprField(1, sp.exp(-((x1 - 0.2) ** 2) / 4.5)), [0.3], 1.0)
    b = GaussianSymbol(ExprField(1, (1 + 0.3 * x1) * sp.exp(-(x1**2) / 4.5)), [-0.1], 1.0)
    rep = composition_error(a, b, None, hbars=(0.4, 0.3, 0.2, 0.15))
    assert rep.slopes[0] == pytest.approx(1.0, abs=0.35)
    assert rep.slopes[1] == pytest.approx(2.0, abs=0.35)
    assert rep.slopes[2] >= 2.6
