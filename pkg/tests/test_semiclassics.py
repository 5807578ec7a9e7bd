import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import dblquad, quad

from magtrace.errors import ConfigurationError, PreconditionError
from magtrace.fields import curl, gaussian_well, harmonic, landau_gauge, quartic
from magtrace.semiclassics import (
    GridPolicy,
    PhaseSpaceQuadrature,
    Scenario,
    SweepRow,
    SweepTable,
    T0,
    T2,
    T2_hr,
    T2_weyl,
    angular_moment,
    fit_expansion,
    hbar_sweep,
    max_threads,
    monomial_moment,
    remainder_slope,
)
from magtrace.spectral import TestFunction

BUMP = TestFunction(0.55, 0.35)
WIDE = TestFunction(1.5, 1.2)


@pytest.mark.parametrize(
    "alpha,expected",
    [((0,), 2.0), ((2,), 2.0), ((1,), 0.0), ((0, 0), 2 * np.pi), ((2, 0), np.pi), ((2, 2), np.pi / 4), ((4, 0), 3 * np.pi / 4)],
)
def test_angular_moments(alpha, expected):
    assert angular_moment(alpha) == pytest.approx(expected)


@pytest.mark.parametrize("k,n", [(0, 0), (0, 1), (2, 1), (2, 3), (3, 2)])
def test_radial_rule_against_adaptive_quadrature(k, n):
    g = WIDE
    q = PhaseSpaceQuadrature(r_panels=256)
    for v in (-0.2, 0.4, 1.1):
        ref = quad(lambda r: r**n * g.derivative(r * r + v, k), 0, 3, limit=400, epsabs=1e-15, epsrel=1e-13, points=[np.sqrt(max(0.3 - v, 0)), np.sqrt(2.7 - v)])[0]
        got = monomial_moment(g, k, np.array([v]), n, q)[0]
        assert got == pytest.approx(ref, rel=1e-10, abs=1e-13)
        coarse = monomial_moment(g, k, np.array([v]), n, PhaseSpaceQuadrature())[0]
        assert coarse == pytest.approx(ref, rel=1e-7, abs=1e-12)


def test_T0_harmonic_closed_forms():
    # 1D: area of {xi^2 + x^2 < E} is pi E, so T0 = pi int g
    assert T0(BUMP, harmonic(1)) == pytest.approx(np.pi * BUMP.integral(), rel=1e-9)
    # 2D: volume of the 4-ball of radius sqrt(E) is pi^2 E^2 / 2
    a, b = WIDE.support
    ref = np.pi**2 * quad(lambda e: e * WIDE(e), a, b, limit=200)[0]
    assert T0(WIDE, harmonic(2)) == pytest.approx(ref, rel=1e-7)


def test_T0_against_direct_phase_space_integral():
    V = quartic(1)
    ref = dblquad(lambda xi, x: WIDE(xi * xi + x * x + x**4 / 4), -2, 2, -2, 2, epsabs=1e-11)[0]
    assert T0(WIDE, V) == pytest.approx(ref, rel=1e-7)


def test_T2_harmonic_vanishes_in_1d():
    assert abs(T2(BUMP, harmonic(1))) <= 1e-10


@pytest.mark.parametrize("V", [quartic(1), quartic(2, lam=0.1)])
def test_T2_equals_hessian_form(V):
    g = TestFunction(0.0, 6.5, "gauss", scale=1.0) if V.dim == 1 else WIDE
    assert T2(g, V) == pytest.approx(T2_hr(g, V), rel=1e-10, abs=1e-12)


def test_T2_equals_weyl_form():
    V = quartic(1)
    q = PhaseSpaceQuadrature(r_panels=256)
    assert T2_weyl(WIDE, V, q) == pytest.approx(T2(WIDE, V, quad=q), rel=1e-9)


def test_magnetic_T2_constant_field():
    # for V = |x|^2 in 2D, int int g''(F) = pi^2 int_0^inf E g''(E) dE = pi^2 g(0)
    V = harmonic(2)
    g = TestFunction(0.0, 6.5, "gauss", scale=1.0)
    b = 0.8
    B = curl(landau_gauge(b))
    diff = T2(g, V, B) - T2(g, V)
    ref = -(2 * b * b / 12.0) * np.pi**2 * g(0.0)
    assert diff == pytest.approx(ref, rel=1e-6)
    upper = T2(g, V, B, convention="upper") - T2(g, V)
    assert diff == pytest.approx(2.0 * upper, rel=1e-10)


def test_preconditions():
    V = gaussian_well(1)
    with pytest.raises(PreconditionError):
        T0(TestFunction(-0.5, 0.6), V)
    with pytest.raises(ConfigurationError):
        T0(BUMP, harmonic(1), PhaseSpaceQuadrature(L=0.5))


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_fit_recovers_polynomial(t0, t2, t4):
    h = np.array([0.4, 0.3, 0.25, 0.2, 0.15, 0.1, 0.05])
    vals = t0 + t2 * h**2 + t4 * h**4
    fit = fit_expansion((h, vals), 4, even_only=True)
    assert fit.powers == (0, 2, 4)
    assert fit[0] == pytest.approx(t0, abs=1e-9)
    assert fit[2] == pytest.approx(t2, abs=1e-7)
    assert fit[1] == 0.0


def test_fit_synthetic_example():
    h = np.array([0.4, 0.3, 0.2, 0.1])
    fit = fit_expansion((h, 3.0 + 0.5 * h**2), 2, even_only=True)
    assert fit[0] == pytest.approx(3.0)
    assert fit[2] == pytest.approx(0.5)
    assert fit.covariance.shape == (2, 2)


def test_fit_needs_spare_rows():
    with pytest.raises(PreconditionError):
        fit_expansion((np.array([0.3, 0.2, 0.1]), np.ones(3)), 2)


def test_remainder_slope():
    h = np.array([0.2, 0.1, 0.05])
    assert remainder_slope(h, 1.0 + 2.0 * h**4, 1.0) == pytest.approx(4.0)


def test_sweep_table_orders_rows():
    rows = [SweepRow(h, 1.0 + h, 10, 1.0, 3) for h in (0.1, 0.3, 0.2)]
    t = SweepTable(1, rows)
    assert list(t.hbar) == [0.3, 0.2, 0.1]
    with pytest.raises(ConfigurationError):
        SweepTable(1, rows + [SweepRow(0.1, 0.0, 10, 1.0, 3)])
    t2 = SweepTable(1, rows + [SweepRow(0.05, float("nan"), 0, 0.0, 0, error="boom")])
    assert len(t2.failed) == 1
    assert len(t2.hbar) == 3


def test_sweep_approaches_T0():
    V = harmonic(1)
    sc = Scenario("h", V, None, WIDE, (0.2, 0.1), 3.0, GridPolicy(order=8))
    tab = hbar_sweep(sc)
    t0 = T0(WIDE, V)
    err = np.abs(tab.values - t0)
    assert err[1] < err[0]
    assert err[1] / t0 < 1e-3


def test_grid_policy_validation():
    with pytest.raises(ConfigurationError):
        GridPolicy(mode="fixed").grid(harmonic(1), 0.1, 1.0)
    with pytest.raises(ConfigurationError):
        GridPolicy(mode="other").grid(harmonic(1), 0.1, 1.0)


def test_max_threads(monkeypatch):
    monkeypatch.setenv("MAGTRACE_THREADS", "3")
    assert max_threads() == 3
    monkeypatch.setenv("MAGTRACE_THREADS", "x")
    with pytest.raises(ConfigurationError):
        max_threads()
