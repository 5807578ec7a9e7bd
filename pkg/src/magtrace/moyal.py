"""Low-order terms of the magnetic Moyal product.

For symbols ``phi``, ``psi`` and a magnetic field ``B``,

    phi #_hbar^B psi = c0 + hbar c1 + hbar^2 c2 + O(hbar^3),

where (sums over repeated indices, derivatives of ``B`` at ``x``)

    c0 = phi psi
    c1 = (i/2) [ d_x phi . d_xi psi - d_xi phi . d_x psi
                 + B_jk d_xi_j phi d_xi_k psi ]
    c2 = -1/8 (d_xa d_xb phi d_xia d_xib psi + d_xia d_xib phi d_xa d_xb psi)
         + 1/4 d_xa d_xib phi d_xia d_xb psi
         + 1/4 B_jk (d_xik d_xa phi d_xij d_xia psi - d_xik d_xia phi d_xij d_xa psi)
         - T/8 d_l B_jk (d_xik phi d_xij d_xil psi - d_xik d_xil phi d_xij psi)
         - 1/8 B_jk B_lm d_xik d_xim phi d_xij d_xil psi,

with ``T = -2/3`` the first-moment entry of :class:`MoyalCoefficientTable`.
The signs are those for which ``Op(xi_j) Op(xi_k) - Op(xi_k) Op(xi_j)``
equals ``i hbar B_jk`` with ``B_jk = d_j A_k - d_k A_j``; they are checked
against exact compositions of quantized Gaussian symbols in the test suite.

The module also provides ``c2(p_z, p_z^{-1})`` in closed form, the
resolvent parametrix terms ``r1 = 0`` and ``r2``, and the functional
calculus coefficient ``g_2`` of the non-magnetic Weyl calculus.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iproduct
from math import comb, prod

import numpy as np
from scipy.integrate import dblquad

from .errors import CapabilityError, ConfigurationError
from .fields import ConstantField, MagneticField, ScalarPotential
from .symbols import MultiIndex, PolySymbol, ResolventExpansion

__all__ = [
    "MoyalCoefficientTable",
    "c0",
    "c1",
    "c2",
    "c2_resolvent",
    "r1",
    "r2",
    "p22",
    "p23",
    "g2_symbol",
    "CompositionReport",
    "composition_error",
]


class MoyalCoefficientTable:
    """Moments of the flux parametrisation.

    ``T[gamma, delta]`` is the coefficient of ``y^delta z^(gamma - delta)`` in
    ``int_{-1}^{1} ds int_{-1}^{-s} dt (s y + t z)^gamma``. ``T[0, 0] = 2`` is
    the weight of the constant-field flux ``2 B(y, z)``; the first moments
    ``-2/3`` weight the gradient of ``B``.
    """

    def __init__(self, dim=2, max_order=1):
        self.dim = dim
        self.max_order = max_order
        self.entries = {}
        for gamma in iproduct(range(max_order + 1), repeat=dim):
            if sum(gamma) > max_order:
                continue
            for delta in iproduct(*(range(g + 1) for g in gamma)):
                self.entries[(gamma, delta)] = self.exact(gamma, delta)

    @staticmethod
    def moment(p, q):
        """``int_{-1}^{1} ds int_{-1}^{-s} dt s^p t^q`` as an exact fraction."""

        def even_integral(n):
            return Fraction(2, n + 1) if n % 2 == 0 else Fraction(0)

        sign = -1 if (q + 1) % 2 else 1
        return Fraction(sign, q + 1) * (even_integral(p + q + 1) - even_integral(p))

    @classmethod
    def exact(cls, gamma, delta):
        binom = prod(comb(g, e) for g, e in zip(gamma, delta))
        p = sum(delta)
        q = sum(gamma) - p
        return binom * cls.moment(p, q)

    @staticmethod
    def numerical(gamma, delta):
        """Direct quadrature of the defining double integral."""
        binom = prod(comb(g, e) for g, e in zip(gamma, delta))
        p = sum(delta)
        q = sum(gamma) - p
        val, _ = dblquad(lambda t, s: s**p * t**q, -1.0, 1.0, lambda s: -1.0, lambda s: -s, epsabs=1e-14, epsrel=1e-14)
        return binom * val

    def __getitem__(self, key):
        gamma, delta = key
        return self.entries[(tuple(gamma), tuple(delta))]


_TABLE = MoyalCoefficientTable(dim=1, max_order=1)
_T00 = float(_TABLE[(0,), (0,)])
_T_LINEAR = float(_TABLE[(1,), (1,)])  # equals _TABLE[(1,), (0,)]


def _d(sym, x=(), xi=()):
    dim = sym.dim
    ax = [0] * dim
    bx = [0] * dim
    for j in x:
        ax[j] += 1
    for j in xi:
        bx[j] += 1
    return sym.derivative(MultiIndex(ax), MultiIndex(bx))


def _check(phi, psi, B=None):
    if phi.dim != psi.dim or (B is not None and B.dim != phi.dim):
        raise ConfigurationError("symbols and magnetic field must share the dimension")


def _accumulate(terms):
    out = None
    for t in terms:
        if t is None or t.is_zero:
            continue
        out = t if out is None else out + t
    return out


def c0(phi, psi):
    """Leading term ``phi * psi``."""
    _check(phi, psi)
    return phi * psi


def c1(phi, psi, B: MagneticField | None = None):
    """First-order term of the magnetic Moyal product (see module notes)."""
    _check(phi, psi, B)
    d = phi.dim
    terms = []
    for j in range(d):
        terms.append(_d(phi, x=(j,)) * _d(psi, xi=(j,)))
        terms.append(_d(phi, xi=(j,)) * _d(psi, x=(j,)) * -1.0)
    if B is not None:
        # the constant-field flux 2 B(y, z) carries weight T00/4 = 1/2
        for j, k in iproduct(range(d), repeat=2):
            bjk = B.component(j, k)
            if bjk.is_zero:
                continue
            terms.append(_d(phi, xi=(j,)) * _d(psi, xi=(k,)) * bjk)
    out = _accumulate(terms)
    if out is None:
        return phi * psi * 0.0
    return out * 0.5j


def c2(phi, psi, B: MagneticField | None = None):
    """Second-order term of the magnetic Moyal product (see module notes).

    The output at ``(x, xi)`` depends on ``B`` only through ``B(x)`` and its
    first derivatives at ``x``.
    """
    _check(phi, psi, B)
    d = phi.dim
    idx = range(d)
    terms = []
    for a, b in iproduct(idx, repeat=2):
        terms.append(_d(phi, x=(a, b)) * _d(psi, xi=(a, b)) * -0.125)
        terms.append(_d(phi, xi=(a, b)) * _d(psi, x=(a, b)) * -0.125)
        terms.append(_d(phi, x=(a,), xi=(b,)) * _d(psi, x=(b,), xi=(a,)) * 0.25)
    if B is not None and not B.is_zero:
        comps = {(j, k): B.component(j, k) for j, k in iproduct(idx, repeat=2) if j != k}
        for (j, k), bjk in comps.items():
            if bjk.is_zero:
                continue
            for a in idx:
                terms.append(_d(phi, x=(a,), xi=(k,)) * _d(psi, xi=(j, a)) * bjk * 0.25)
                terms.append(_d(phi, xi=(k, a)) * _d(psi, x=(a,), xi=(j,)) * bjk * -0.25)
            for l in idx:
                dl = bjk.partial(l)
                if dl.is_zero:
                    continue
                terms.append(_d(phi, xi=(k,)) * _d(psi, xi=(j, l)) * dl * (-_T_LINEAR / 8.0))
                terms.append(_d(phi, xi=(k, l)) * _d(psi, xi=(j,)) * dl * (_T_LINEAR / 8.0))
            for (l, m), blm in comps.items():
                if blm.is_zero:
                    continue
                terms.append(_d(phi, xi=(k, m)) * _d(psi, xi=(j, l)) * bjk * blm * -0.125)
    out = _accumulate(terms)
    if out is None:
        return phi * psi * 0.0
    return out


def c2_resolvent(z, V: ScalarPotential, B: MagneticField | None = None) -> ResolventExpansion:
    """Closed form of ``c2(p_z, p_z^{-1})``.

    Terms (``p = p_z``, sums over all index values, ``|B|^2 = sum_jk B_jk^2``)::

        p^-2 : 1/2 Delta V + 1/2 |B|^2 - 2/3 (d_j B_jk) xi_k
        p^-3 : -1/2 |grad V|^2 - (d_a d_b V) xi_a xi_b
               - 2 |B xi|^2 - 2 B_jk xi_j d_k V

    The Hessian term equals ``-2 sum_{l<=m} (1 - delta_lm/2) V_lm xi_l xi_m``.
    """
    d = V.dim
    z = complex(z)
    if B is not None and B.dim != d:
        raise ConfigurationError("B and V must share the dimension")
    e = [MultiIndex.unit(d, j) for j in range(d)]
    p2 = PolySymbol(d)
    p3 = PolySymbol(d)
    for a in range(d):
        p2 = p2 + PolySymbol.constant(d, V.derivative(e[a] + e[a]) * 0.5)
        p3 = p3 + PolySymbol.constant(d, V.derivative(e[a]) * V.derivative(e[a]) * -0.5)
        for b in range(d):
            p3 = p3 + PolySymbol.monomial(d, e[a] + e[b], V.derivative(e[a] + e[b]) * -1.0)
    if B is not None:
        for j, k in iproduct(range(d), repeat=2):
            bjk = B.component(j, k)
            if bjk.is_zero:
                continue
            p2 = p2 + PolySymbol.constant(d, bjk * bjk * 0.5)
            p2 = p2 + PolySymbol.monomial(d, e[k], bjk.partial(j) * (-2.0 / 3.0))
            p3 = p3 + PolySymbol.monomial(d, e[j], bjk * V.derivative(e[k]) * -2.0)
        for k in range(d):
            # (B xi)_k = sum_j B_kj xi_j
            bxi = PolySymbol(d)
            for j in range(d):
                bkj = B.component(k, j)
                if not bkj.is_zero:
                    bxi = bxi + PolySymbol.monomial(d, e[j], bkj)
            if not bxi.is_zero:
                p3 = p3 + bxi * bxi * -2.0
    return ResolventExpansion(V, z, {1: p2, 2: p3})


def r1(z, V: ScalarPotential, B: MagneticField | None = None) -> ResolventExpansion:
    """First parametrix correction; ``c1(p_z, p_z^{-1})`` vanishes, so does this."""
    return ResolventExpansion(V, z, {})


def r2(z, V: ScalarPotential, B: MagneticField | None = None) -> ResolventExpansion:
    """Second parametrix correction ``-p_z^{-1} c2(p_z, p_z^{-1})``."""
    return c2_resolvent(z, V, B).shift(1) * -1.0


def p22(F0: PolySymbol) -> PolySymbol:
    """``1/8 sum_jk (F_{x_j xi_k} F_{x_k xi_j} - F_{x_j x_k} F_{xi_j xi_k})``."""
    d = F0.dim
    out = PolySymbol(d)
    for j, k in iproduct(range(d), repeat=2):
        out = out + _d(F0, x=(j,), xi=(k,)) * _d(F0, x=(k,), xi=(j,))
        out = out - _d(F0, x=(j, k)) * _d(F0, xi=(j, k))
    return out * 0.125


def p23(F0: PolySymbol) -> PolySymbol:
    """``1/24 sum_jk (2 F_{x_k xi_j} F_{x_j} F_{xi_k} - F_{x_j x_k} F_{xi_j} F_{xi_k}
    - F_{xi_j xi_k} F_{x_j} F_{x_k})``."""
    d = F0.dim
    out = PolySymbol(d)
    for j, k in iproduct(range(d), repeat=2):
        out = out + _d(F0, x=(k,), xi=(j,)) * _d(F0, x=(j,)) * _d(F0, xi=(k,)) * 2.0
        out = out - _d(F0, x=(j, k)) * _d(F0, xi=(j,)) * _d(F0, xi=(k,))
        out = out - _d(F0, xi=(j, k)) * _d(F0, x=(j,)) * _d(F0, x=(k,))
    return out * (1.0 / 24.0)


def g2_symbol(g, F0: PolySymbol, x, xi):
    """Second coefficient ``g_2 = p22 g''(F0) + p23 g'''(F0)`` on a grid.

    Parameters
    ----------
    g : TestFunction
    F0 : PolySymbol
        Principal symbol without sub-principal terms.
    x, xi : ndarray, shape (d, ...)
    """
    f = np.real(F0(x, xi))
    return np.real(p22(F0)(x, xi)) * g.derivative(f, 2) + np.real(p23(F0)(x, xi)) * g.derivative(f, 3)


# ---------------------------------------------------------------------------
# composition oracle


@dataclass
class CompositionReport:
    """Relative errors of ``Op(a) Op(b)`` against truncated expansions.

    ``errors[k][i]`` uses ``c0 + ... + hbar^k c_k`` at ``hbar[i]``; slopes
    are least-squares fits of ``log error`` against ``log hbar``.
    """

    hbar: list
    errors: dict
    slopes: dict
    grid_N: list


def _apply(sym, A, hbar, grid, U, tol):
    from .quantize import build_op_kernel

    if isinstance(sym, PolySymbol):
        if sym.degree > 0 or any(not isinstance(c, ConstantField) for c in sym.terms.values()):
            raise CapabilityError("only constant polynomial symbols are quantized directly")
        return sum(c.value for c in sym.terms.values()) * U if sym.terms else 0.0 * U
    M = build_op_kernel(sym, A, hbar, grid, tol=tol)
    return M.data @ U


def _xi_extent(*symbols):
    ext = 1.0
    for s in symbols:
        if hasattr(s, "sigma"):
            ext = max(ext, float(np.max(np.abs(s.center))) + 8.0 * s.sigma)
    return ext


def composition_error(a, b, A=None, hbars=(0.4, 0.3, 0.2, 0.15), packets=None, box=2.0, tol=1e-12):
    """Compare ``Op^A(a) Op^A(b)`` with ``Op^A(c0 + hbar c1 + hbar^2 c2)``.

    Both sides act on localized wave packets, so only a box around the
    packets is discretised; the operators are quantized on a grid fine
    enough to resolve the symbols' momenta.

    Parameters
    ----------
    a, b : GaussPolySymbol or constant PolySymbol
    A : VectorPotential, optional
    hbars : sequence of float
    packets : list of (center, momentum), optional
        Wave packets ``exp(-|x - center|^2 / 0.25 + i momentum.x / hbar)``.
    box : float
        Half-width of the square box.
    """
    from .fields import curl
    from .quantize import GridSpec

    dim = a.dim
    B = curl(A) if A is not None and dim > 1 else None
    terms = [c0(a, b), c1(a, b, B), c2(a, b, B)]
    if packets is None:
        packets = [((0.0,) * dim, (0.2,) + (0.1,) * (dim - 1)), ((0.3,) + (-0.2,) * (dim - 1), (-0.3,) + (0.5,) * (dim - 1))]
    xi_max = _xi_extent(a, b)
    errors = {0: [], 1: [], 2: []}
    sizes = []
    for hb in hbars:
        h = 0.9 * np.pi * hb / xi_max
        N = max(int(np.ceil(2.0 * box / h)) + 1, 16)
        grid = GridSpec(dim, box, N, order=2)
        pts = grid.points().reshape(dim, -1)
        U = np.stack(
            [
                np.exp(-np.sum((pts - np.reshape(c, (dim, 1))) ** 2, axis=0) / 0.25 + 1j * np.dot(k, pts) / hb)
                for c, k in packets
            ],
            axis=1,
        )
        lhs = _apply(a, A, hb, grid, _apply(b, A, hb, grid, U, tol), tol)
        parts = [_apply(t, A, hb, grid, U, tol) * hb**k for k, t in enumerate(terms)]
        scale = max(np.linalg.norm(parts[0]), 1e-300)
        acc = np.zeros_like(lhs)
        for k in range(3):
            acc = acc + parts[k]
            errors[k].append(float(np.linalg.norm(lhs - acc) / scale))
        sizes.append(N)
    slopes = {}
    for k, e in errors.items():
        e = np.asarray(e)
        ok = e > 0
        slopes[k] = float(np.polyfit(np.log(np.asarray(hbars)[ok]), np.log(e[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    return CompositionReport(list(map(float, hbars)), errors, slopes, sizes)
