import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magtrace._smooth import bump_derivative, smoothstep
from magtrace.errors import ConfigurationError, PreconditionError
from magtrace.fields import harmonic
from magtrace.quantize import GridSpec, build_hamiltonian
from magtrace.spectral import (
    AlmostAnalyticExtension,
    TestFunction,
    agmon_compare,
    eigensolve,
    hs_apply,
    hs_apply_extrapolated,
    spectral_apply,
    trace_g,
)


def _fd(f, t, k, h):
    # central differences of order k
    if k == 1:
        return (f(t + h) - f(t - h)) / (2 * h)
    return (f(t + h) - 2 * f(t) + f(t - h)) / h**2


@pytest.mark.parametrize("profile,kw", [("bump", {}), ("gauss", {"scale": 0.7})])
def test_test_function_derivatives(profile, kw):
    g = TestFunction(0.5, 1.2, profile, **kw)
    t = np.linspace(-0.6, 1.6, 41)
    h = 1e-4
    for k in range(4):
        num1 = _fd(lambda s: g.derivative(s, k), t, 1, h)
        assert np.allclose(num1, g.derivative(t, k + 1), rtol=1e-5, atol=1e-5 * (1 + np.max(np.abs(num1))))


def test_test_function_support_and_integrals():
    g = TestFunction(0.55, 0.35)
    assert g.support == pytest.approx((0.2, 0.9))
    assert np.all(g(np.array([0.0, 0.2, 0.9, 1.5])) == 0.0)
    assert g.integral(1) == pytest.approx(0.0, abs=1e-14)
    assert g.integral(2) == pytest.approx(0.0, abs=1e-12)


def test_gauss_profile_plateau():
    g = TestFunction(0.0, 4.0, "gauss", scale=1.0, inner=0.5)
    t = np.linspace(-2.0, 2.0, 21)
    assert np.allclose(g(t), np.exp(-0.5 * t * t))
    with pytest.raises(ConfigurationError):
        TestFunction(0.0, 1.0, "gauss")
    with pytest.raises(ConfigurationError):
        TestFunction(0.0, -1.0)


@given(st.floats(-0.999, 0.999))
def test_bump_derivative_symmetry(s):
    # bump is even: odd derivatives are odd
    assert bump_derivative(np.array([s]), 0) == pytest.approx(bump_derivative(np.array([-s]), 0))
    assert bump_derivative(np.array([s]), 1) == pytest.approx(-bump_derivative(np.array([-s]), 1), abs=1e-14)


@given(st.floats(-0.5, 1.5))
def test_smoothstep_partition(s):
    a = smoothstep(np.array([s]))[0]
    b = smoothstep(np.array([1.0 - s]))[0]
    assert a + b == pytest.approx(1.0, abs=1e-12)
    assert 0.0 <= a <= 1.0


def test_extension_restricts_to_g_and_is_almost_analytic():
    g = TestFunction(1.0, 0.5)
    ext = AlmostAnalyticExtension(g, order=3, mu_cut=1.0)
    lam = np.linspace(0.5, 1.5, 31)
    assert np.allclose(ext(lam, 0.0), g(lam))
    # numerical dbar = 1/2 (d_lambda + i d_mu)
    h = 1e-5
    for mu in (0.05, 0.2, 0.45, 0.7):
        num = 0.5 * ((ext(lam + h, mu) - ext(lam - h, mu)) / (2 * h) + 1j * (ext(lam, mu + h) - ext(lam, mu - h)) / (2 * h))
        assert np.allclose(ext.dbar(lam, mu), num, atol=1e-4 * max(1.0, np.max(np.abs(num))))
    small = np.max(np.abs(ext.dbar(lam, 0.01)))
    smaller = np.max(np.abs(ext.dbar(lam, 0.005)))
    assert smaller / small == pytest.approx(0.5**3, rel=0.05)


def _harmonic_matrix(n=80, L=4.0, hbar=0.3, order=4):
    return build_hamiltonian(harmonic(1), None, hbar, GridSpec(1, L, n, order))


def test_eigensolver_methods_agree():
    H = _harmonic_matrix(n=400, L=5.0)
    ref = eigensolve(H, 4.0, method="dense").eigenvalues
    for method in ("banded", "sparse"):
        ev = eigensolve(H, 4.0, method=method).eigenvalues
        assert np.allclose(ev, ref, rtol=1e-10, atol=1e-12)


def test_eigensolver_rejects_non_hermitian():
    H = _harmonic_matrix().dense()
    H[0, 1] += 1.0
    with pytest.raises(PreconditionError):
        eigensolve(H, 1.0)


def test_trace_requires_cap_above_support():
    s = eigensolve(_harmonic_matrix(), 1.0)
    with pytest.raises(PreconditionError):
        trace_g(s, TestFunction(1.0, 0.5))
    g = TestFunction(0.6, 0.35)
    assert trace_g(s, g) == pytest.approx(np.sum(g(s.eigenvalues)))


def test_spectral_apply_matches_trace():
    H = _harmonic_matrix()
    g = TestFunction(1.0, 0.8)
    s = eigensolve(H, 2.0, vectors=True)
    G = spectral_apply(s, g)
    assert np.trace(G).real == pytest.approx(trace_g(s, g), rel=1e-12)
    assert np.allclose(G, G.conj().T)


def test_helffer_sjostrand_small_matrix():
    H = _harmonic_matrix(n=50, L=3.5, hbar=0.4)
    g = TestFunction(1.3, 0.9)
    G = spectral_apply(eigensolve(H, 3.0, vectors=True), g)
    ext = AlmostAnalyticExtension(g, 3)
    coarse = hs_apply(H, ext, eps=0.05)
    extrap, per = hs_apply_extrapolated(H, ext)
    assert len(per) == 3
    e_coarse = np.linalg.norm(coarse - G) / np.linalg.norm(G)
    e_extrap = np.linalg.norm(extrap - G) / np.linalg.norm(G)
    assert e_extrap <= 1e-4
    assert e_extrap <= e_coarse


def test_agmon_difference_decays():
    g = TestFunction(0.55, 0.35)
    rep = agmon_compare(harmonic(1), None, 1.0, g, (0.2, 0.1), ceiling=3.0, order=8)
    assert rep.delta[1] < rep.delta[0] * 0.05
    assert rep.plateau == pytest.approx((2.0 + 7.0 / 3.0) / 2.0)
    with pytest.raises(PreconditionError):
        agmon_compare(harmonic(1), None, 0.5, g, (0.2,), ceiling=3.0)
