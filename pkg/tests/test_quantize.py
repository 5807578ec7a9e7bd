import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from magtrace.errors import ConfigurationError
from magtrace.fields import (
    ExprField,
    gauge_shift,
    gaussian_bump_gauge,
    harmonic,
    landau_gauge,
    polynomial_gauge_function,
    quartic,
)
from magtrace.quantize import (
    GridSpec,
    auto_grid,
    build_hamiltonian,
    build_op_kernel,
    dump_matrix,
    gauge_conjugate,
    load_matrix,
    stencil_weights,
)
from magtrace.scenarios import fock_darwin_levels, harmonic_levels
from magtrace.spectral import eigensolve
from magtrace.symbols import GaussianSymbol, GaussPolySymbol, PolySymbol

x1, x2 = sp.symbols("x1 x2")
small = st.floats(-0.5, 0.5, allow_nan=False)


@pytest.mark.parametrize("order", [2, 4, 6, 8])
def test_stencil_exact_on_polynomials(order):
    w = stencil_weights(order)
    h, x = 0.1, 0.37
    for p in range(order + 2):
        approx = w[0] * x**p + sum(w[k] * ((x + k * h) ** p + (x - k * h) ** p) for k in range(1, len(w)))
        exact = p * (p - 1) * x ** (p - 2) * h * h if p >= 2 else 0.0
        assert approx == pytest.approx(exact, abs=1e-12)


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        GridSpec(3, 1.0, 20)
    with pytest.raises(ConfigurationError):
        GridSpec(1, 1.0, 4)
    with pytest.raises(ConfigurationError):
        GridSpec(1, 1.0, 20, order=5)
    g = GridSpec(2, 1.0, 11)
    assert g.size == 121
    assert g.h == pytest.approx(0.2)
    assert g.points().shape == (2, 121)


def test_row_cap():
    with pytest.raises(ConfigurationError):
        build_hamiltonian(harmonic(2), None, 0.1, GridSpec(2, 1.0, 50), max_rows=1000)


def test_hamiltonian_is_hermitian():
    grid = GridSpec(2, 3.0, 24, order=6)
    H = build_hamiltonian(harmonic(2), gaussian_bump_gauge(1.0, 1.0), 0.4, grid)
    assert H.is_hermitian(1e-13)


def test_harmonic_spectrum_1d():
    hbar = 0.1
    grid = auto_grid(harmonic(1), hbar, 2.0, order=8)
    H = build_hamiltonian(harmonic(1), None, hbar, grid)
    ev = eigensolve(H, 2.0).eigenvalues
    ref = harmonic_levels(hbar, len(ev))
    assert np.max(np.abs(ev - ref) / ref) <= 1e-6


def test_fock_darwin_spectrum_2d():
    hbar, b, cap = 0.3, 1.0, 2.0
    grid = GridSpec(2, 4.5, 110, order=4)
    H = build_hamiltonian(harmonic(2), landau_gauge(b), hbar, grid)
    ev = eigensolve(H, cap).eigenvalues
    ref = fock_darwin_levels(hbar, b, cap)
    n = min(len(ev), len(ref), 12)
    assert np.max(np.abs(ev[:n] - ref[:n]) / ref[:n]) <= 1e-4


def test_fock_darwin_reduces_to_harmonic():
    lv = fock_darwin_levels(0.2, 0.0, 1.5)
    # degeneracy n + 1 at 0.2 * 2 * (n + 1)
    vals, counts = np.unique(np.round(lv, 12), return_counts=True)
    assert np.allclose(vals, 0.4 * np.arange(1, len(vals) + 1))
    assert list(counts) == list(range(1, len(vals) + 1))


@given(small, small, small)
def test_gauge_change_is_conjugation(c1, c2, c3):
    phi = polynomial_gauge_function(2, {(1, 1): c1, (2, 1): c2, (0, 3): c3})
    A = landau_gauge(0.8)
    grid = GridSpec(2, 2.0, 12, order=4)
    H1 = build_hamiltonian(harmonic(2), A, 0.5, grid)
    H2 = build_hamiltonian(harmonic(2), gauge_shift(A, phi), 0.5, grid)
    conj = gauge_conjugate(H1, phi)
    assert abs(conj.data - H2.data).max() <= 1e-10


def test_op_kernel_gauge_covariance():
    sym = GaussianSymbol(ExprField(2, sp.exp(-(x1**2 + x2**2) / 2)), [0.2, -0.1], 0.8)
    phi = polynomial_gauge_function(2, {(1, 1): 0.3, (3, 0): 0.1})
    A = landau_gauge(0.6)
    grid = GridSpec(2, 1.5, 14)
    M1 = build_op_kernel(sym, A, 0.4, grid, tol=1e-20)
    M2 = build_op_kernel(sym, gauge_shift(A, phi), 0.4, grid, tol=1e-20)
    assert abs(gauge_conjugate(M1, phi).data - M2.data).max() <= 1e-12


def test_op_kernel_real_symbol_is_hermitian():
    sym = GaussPolySymbol(PolySymbol(1, {(0,): ExprField(1, sp.cos(x1)), (2,): 0.5}), [0.3], 0.7)
    M = build_op_kernel(sym, None, 0.3, GridSpec(1, 2.0, 40), tol=1e-20)
    assert M.hermitian_defect() <= 1e-12


def test_op_kernel_of_momentum_gaussian_on_plane_wave():
    # Op(exp(-(xi - c)^2 / 2 s^2)) acting on exp(i k x / hbar) multiplies by the symbol at k
    hbar, c, s, k = 0.2, 0.3, 0.6, 0.5
    sym = GaussPolySymbol(PolySymbol.constant(1, 1.0), [c], s)
    grid = GridSpec(1, 6.0, 601)
    M = build_op_kernel(sym, None, hbar, grid, tol=1e-20)
    x = grid.axis
    u = np.exp(1j * k * x / hbar)
    out = M.data @ u
    mid = np.abs(x) < 2.0
    assert np.allclose(out[mid], np.exp(-((k - c) ** 2) / (2 * s * s)) * u[mid], atol=1e-8)


def test_matrix_dump_roundtrip(tmp_path):
    grid = GridSpec(1, 2.0, 16, order=4)
    H = build_hamiltonian(quartic(1), None, 0.3, grid)
    path = tmp_path / "h.bin"
    dump_matrix(path, H)
    M = load_matrix(path, L=2.0, order=4)
    assert np.array_equal(M.dense(), H.dense())
    assert M.hbar == 0.3
