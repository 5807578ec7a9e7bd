"""Phase-space symbols.

Three concrete symbol types share one small algebra (sum, product, scalar
multiple, mixed derivatives ``d_x^alpha d_xi^beta`` and evaluation):

* :class:`PolySymbol` -- ``sum_alpha a_alpha(x) xi^alpha`` with smooth
  coefficient fields. Hosts ``F = |xi|^2 + V`` and ``p_z = F - z``.
* :class:`ResolventExpansion` -- ``sum_k q_k(x, xi) p_z^{-1-k}`` with
  polynomial ``q_k``. Derivatives follow the induction that proves
  ``deg q_k <= k``.
* :class:`GaussPolySymbol` -- a polynomial symbol times the Gaussian
  ``exp(-|xi - c|^2 / (2 sigma^2))``. These are the Schwartz test symbols
  used by the kernel quantization and the composition oracle; their inverse
  Fourier transform in ``xi`` is known in closed form.

``xi``-derivatives are exact; ``x``-derivatives are delegated to the
coefficient fields.
"""
from __future__ import annotations

from itertools import product as iproduct
from math import comb, factorial, prod

import numpy as np
from numpy.polynomial import hermite_e

from .errors import CapabilityError, ConfigurationError, PreconditionError
from .fields import ConstantField, Field, ScalarPotential, add_fields, multiply_fields, scale_field

__all__ = [
    "MultiIndex",
    "PolySymbol",
    "ResolventExpansion",
    "GaussPolySymbol",
    "GaussianSymbol",
    "hamiltonian_symbol",
    "pz_symbol",
    "pz_derivative",
]


class MultiIndex(tuple):
    """Exponent vector in N^d."""

    def __new__(cls, values):
        values = tuple(int(v) for v in values)
        if any(v < 0 for v in values):
            raise ValueError("multi-index entries must be nonnegative")
        return super().__new__(cls, values)

    @property
    def order(self):
        return sum(self)

    @property
    def factorial(self):
        return prod(factorial(v) for v in self)

    @classmethod
    def zero(cls, dim):
        return cls((0,) * dim)

    @classmethod
    def unit(cls, dim, j):
        return cls(tuple(1 if i == j else 0 for i in range(dim)))

    def __add__(self, other):
        return MultiIndex(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        return MultiIndex(a - b for a, b in zip(self, other))


def _is_scalar(value):
    return np.isscalar(value) and not isinstance(value, str)


def _xi_power(xi, alpha):
    out = 1.0
    for j, n in enumerate(alpha):
        if n:
            out = out * xi[j] ** n
    return out


class PolySymbol:
    """Symbol ``sum_alpha a_alpha(x) xi^alpha``.

    Parameters
    ----------
    dim : int
        Spatial dimension ``d``; phase space is ``R^d x R^d``.
    terms : dict
        Map from multi-indices (tuples of length ``d``) to coefficient
        fields or numbers.
    """

    def __init__(self, dim, terms=None):
        self.dim = int(dim)
        self.terms = {}
        for alpha, coef in (terms or {}).items():
            alpha = MultiIndex(alpha)
            if len(alpha) != self.dim:
                raise ConfigurationError("multi-index length differs from dimension")
            if not isinstance(coef, Field):
                coef = ConstantField(self.dim, coef)
            if coef.is_zero:
                continue
            if alpha in self.terms:
                coef = add_fields(self.terms[alpha], coef)
            self.terms[alpha] = coef

    @classmethod
    def constant(cls, dim, value):
        return cls(dim, {(0,) * dim: value})

    @classmethod
    def monomial(cls, dim, alpha, coef=1.0):
        return cls(dim, {tuple(alpha): coef})

    @property
    def degree(self):
        return max((a.order for a in self.terms), default=-1)

    @property
    def is_zero(self):
        return not self.terms

    def __call__(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        shape = np.broadcast_shapes(x.shape[1:], xi.shape[1:])
        out = np.zeros(shape, dtype=complex)
        for alpha, coef in self.terms.items():
            out = out + coef(x) * _xi_power(xi, alpha)
        if not np.any(out.imag):
            return out.real
        return out

    def coefficient(self, alpha):
        return self.terms.get(MultiIndex(alpha), ConstantField(self.dim, 0.0))

    def derivative(self, alpha_x=None, beta_xi=None):
        """``d_x^alpha d_xi^beta`` of the symbol, exact in ``xi``."""
        d = self.dim
        alpha_x = MultiIndex(alpha_x if alpha_x is not None else (0,) * d)
        beta_xi = MultiIndex(beta_xi if beta_xi is not None else (0,) * d)
        new = {}
        for gamma, coef in self.terms.items():
            if any(g < b for g, b in zip(gamma, beta_xi)):
                continue
            falling = prod(factorial(g) // factorial(g - b) for g, b in zip(gamma, beta_xi))
            c = coef.derivative(alpha_x) if alpha_x.order else coef
            c = scale_field(c, float(falling))
            key = gamma - beta_xi
            new[key] = add_fields(new[key], c) if key in new else c
        return PolySymbol(d, new)

    # algebra -------------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, PolySymbol):
            terms = dict(self.terms)
            for alpha, coef in other.terms.items():
                terms[alpha] = add_fields(terms[alpha], coef) if alpha in terms else coef
            return PolySymbol(self.dim, terms)
        if _is_scalar(other) or isinstance(other, Field):
            return self + PolySymbol.constant(self.dim, other)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __mul__(self, other):
        if _is_scalar(other):
            return PolySymbol(self.dim, {a: scale_field(c, other) for a, c in self.terms.items()})
        if isinstance(other, Field):
            return PolySymbol(self.dim, {a: multiply_fields(c, other) for a, c in self.terms.items()})
        if isinstance(other, PolySymbol):
            terms = {}
            for (a1, c1), (a2, c2) in iproduct(self.terms.items(), other.terms.items()):
                key = a1 + a2
                c = multiply_fields(c1, c2)
                terms[key] = add_fields(terms[key], c) if key in terms else c
            return PolySymbol(self.dim, terms)
        return NotImplemented

    def __rmul__(self, other):
        if _is_scalar(other) or isinstance(other, Field):
            return self * other
        return NotImplemented

    def __repr__(self):
        return f"PolySymbol(d={self.dim}, monomials={sorted(self.terms)})"


def hamiltonian_symbol(V: ScalarPotential) -> PolySymbol:
    """``F(x, xi) = |xi|^2 + V(x)``."""
    d = V.dim
    terms = {(0,) * d: V.field}
    for j in range(d):
        terms[tuple(MultiIndex.unit(d, j) + MultiIndex.unit(d, j))] = 1.0
    return PolySymbol(d, terms)


def pz_symbol(V: ScalarPotential, z) -> PolySymbol:
    """``p_z = F - z``."""
    return hamiltonian_symbol(V) - complex(z)


class ResolventExpansion:
    """``sum_k q_k(x, xi) p_z(x, xi)^{-1-k}`` with ``p_z = |xi|^2 + V - z``.

    Parameters
    ----------
    V : ScalarPotential
    z : complex
    terms : dict
        Map ``k -> PolySymbol``.
    """

    def __init__(self, V: ScalarPotential, z, terms=None):
        self.V = V
        self.z = complex(z)
        self.dim = V.dim
        self.terms = {}
        for k, q in (terms or {}).items():
            if _is_scalar(q):
                q = PolySymbol.constant(self.dim, q)
            if q.is_zero:
                continue
            self.terms[int(k)] = self.terms[int(k)] + q if int(k) in self.terms else q

    @classmethod
    def inverse(cls, V, z):
        """The expansion of ``p_z^{-1}`` itself."""
        return cls(V, z, {0: 1.0})

    @property
    def is_zero(self):
        return not self.terms

    def pz(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return np.sum(xi * xi, axis=0) + self.V(x) - self.z

    def __call__(self, x, xi):
        p = self.pz(x, xi)
        if np.any(p == 0):
            raise PreconditionError("p_z vanishes at an evaluation point (z in the range of F)")
        out = np.zeros(p.shape, dtype=complex)
        for k, q in self.terms.items():
            out = out + q(x, xi) * p ** (-1 - k)
        return out

    def _compatible(self, other):
        if other.V is not self.V or other.z != self.z:
            raise ConfigurationError("resolvent expansions must share V and z")

    def _step(self, j, in_xi):
        d = self.dim
        e = MultiIndex.unit(d, j)
        if in_xi:
            dp = PolySymbol.monomial(d, e, 2.0)
        else:
            dp = PolySymbol.constant(d, self.V.derivative(e))
        new = {}
        for k, q in self.terms.items():
            dq = q.derivative(None, e) if in_xi else q.derivative(e, None)
            new[k] = new[k] + dq if k in new else dq
            lowered = dp * q * float(-(1 + k))
            new[k + 1] = new[k + 1] + lowered if k + 1 in new else lowered
        return ResolventExpansion(self.V, self.z, new)

    def derivative(self, alpha_x=None, beta_xi=None):
        """``d_x^alpha d_xi^beta`` by the one-index-at-a-time recursion."""
        d = self.dim
        alpha_x = MultiIndex(alpha_x if alpha_x is not None else (0,) * d)
        beta_xi = MultiIndex(beta_xi if beta_xi is not None else (0,) * d)
        out = self
        for j, n in enumerate(beta_xi):
            for _ in range(n):
                out = out._step(j, True)
        for j, n in enumerate(alpha_x):
            for _ in range(n):
                out = out._step(j, False)
        return out

    def shift(self, n=1):
        """Multiply by ``p_z^{-n}``."""
        return ResolventExpansion(self.V, self.z, {k + n: q for k, q in self.terms.items()})

    def degree_ok(self):
        """Check the structural bound ``deg q_k <= k``."""
        return all(q.degree <= k for k, q in self.terms.items())

    def __add__(self, other):
        if isinstance(other, ResolventExpansion):
            self._compatible(other)
            terms = dict(self.terms)
            for k, q in other.terms.items():
                terms[k] = terms[k] + q if k in terms else q
            return ResolventExpansion(self.V, self.z, terms)
        return NotImplemented

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, other):
        if _is_scalar(other) or isinstance(other, (Field, PolySymbol)):
            return ResolventExpansion(self.V, self.z, {k: q * other for k, q in self.terms.items()})
        if isinstance(other, ResolventExpansion):
            self._compatible(other)
            terms = {}
            for (k1, q1), (k2, q2) in iproduct(self.terms.items(), other.terms.items()):
                k = k1 + k2 + 1
                terms[k] = terms[k] + q1 * q2 if k in terms else q1 * q2
            return ResolventExpansion(self.V, self.z, terms)
        return NotImplemented

    def __rmul__(self, other):
        if _is_scalar(other) or isinstance(other, (Field, PolySymbol)):
            return self * other
        return NotImplemented

    def __repr__(self):
        return f"ResolventExpansion(z={self.z}, powers={sorted(self.terms)})"


def pz_derivative(V: ScalarPotential, alpha, beta, z) -> ResolventExpansion:
    """Expansion of ``d_x^alpha d_xi^beta p_z^{-1}`` as ``sum_k q_k p_z^{-1-k}``.

    Raises
    ------
    CapabilityError
        If ``|alpha| > 4`` or ``|beta| > 4``, or if ``V`` lacks derivatives.
    """
    alpha = MultiIndex(alpha)
    beta = MultiIndex(beta)
    if alpha.order > 4 or beta.order > 4:
        raise CapabilityError("pz_derivative supports |alpha|, |beta| <= 4")
    return ResolventExpansion.inverse(V, z).derivative(alpha, beta)


# ---------------------------------------------------------------------------
# Gaussian test symbols


def _gauss_moment_ft(n, c, sigma, v, hbar):
    """``int xi^n exp(-(xi-c)^2/(2 sigma^2)) exp(i xi v / hbar) d xi``.

    With ``xi = c + eta`` and
    ``int eta^m e^{-eta^2/(2 s^2)} e^{i eta t} d eta
    = sqrt(2 pi) s (i s)^m He_m(s t) e^{-s^2 t^2 / 2}``.
    """
    t = v / hbar
    st = sigma * t
    base = np.sqrt(2.0 * np.pi) * sigma * np.exp(-0.5 * st * st) * np.exp(1j * c * t)
    total = np.zeros(np.shape(v), dtype=complex)
    for m in range(n + 1):
        coeffs = np.zeros(m + 1)
        coeffs[m] = 1.0
        hm = hermite_e.hermeval(st, coeffs)
        total = total + comb(n, m) * c ** (n - m) * (1j * sigma) ** m * hm
    return base * total


class GaussPolySymbol:
    """Polynomial symbol times ``exp(-|xi - c|^2 / (2 sigma^2))``.

    Parameters
    ----------
    poly : PolySymbol
    center : array_like, shape (d,)
    sigma : float
    """

    def __init__(self, poly: PolySymbol, center, sigma):
        self.poly = poly
        self.dim = poly.dim
        self.center = np.asarray(center, dtype=float).reshape(self.dim)
        self.sigma = float(sigma)
        if self.sigma <= 0:
            raise ConfigurationError("Gaussian width must be positive")

    @property
    def is_zero(self):
        return self.poly.is_zero

    def gaussian(self, xi):
        xi = np.asarray(xi, dtype=float)
        c = self.center.reshape((self.dim,) + (1,) * (xi.ndim - 1))
        return np.exp(-np.sum((xi - c) ** 2, axis=0) / (2.0 * self.sigma**2))

    def __call__(self, x, xi):
        return self.poly(x, xi) * self.gaussian(xi)

    def derivative(self, alpha_x=None, beta_xi=None):
        d = self.dim
        alpha_x = MultiIndex(alpha_x if alpha_x is not None else (0,) * d)
        beta_xi = MultiIndex(beta_xi if beta_xi is not None else (0,) * d)
        poly = self.poly.derivative(alpha_x, None) if alpha_x.order else self.poly
        for j, n in enumerate(beta_xi):
            e = MultiIndex.unit(d, j)
            # d_xi_j (P G) = (d_xi_j P - (xi_j - c_j)/sigma^2 P) G
            shift = (PolySymbol.monomial(d, e, 1.0) - self.center[j]) * (-1.0 / self.sigma**2)
            for _ in range(n):
                poly = poly.derivative(None, e) + shift * poly
        return GaussPolySymbol(poly, self.center, self.sigma)

    def _same_gaussian(self, other):
        return np.allclose(self.center, other.center, rtol=0, atol=1e-14) and abs(
            self.sigma - other.sigma
        ) <= 1e-14 * self.sigma

    def __add__(self, other):
        if isinstance(other, GaussPolySymbol):
            if other.is_zero:
                return self
            if self.is_zero:
                return other
            if not self._same_gaussian(other):
                raise CapabilityError("sums of Gaussian symbols need a common Gaussian factor")
            return GaussPolySymbol(self.poly + other.poly, self.center, self.sigma)
        return NotImplemented

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, other):
        if _is_scalar(other) or isinstance(other, (Field, PolySymbol)):
            return GaussPolySymbol(self.poly * other, self.center, self.sigma)
        if isinstance(other, GaussPolySymbol):
            s1, s2 = self.sigma**2, other.sigma**2
            s = s1 * s2 / (s1 + s2)
            c = s * (self.center / s1 + other.center / s2)
            k = np.exp(-np.sum((self.center - other.center) ** 2) / (2.0 * (s1 + s2)))
            return GaussPolySymbol(self.poly * other.poly * float(k), c, np.sqrt(s))
        return NotImplemented

    def __rmul__(self, other):
        if _is_scalar(other) or isinstance(other, (Field, PolySymbol)):
            return self * other
        return NotImplemented

    def inverse_fourier(self, x, v, hbar):
        """``(2 pi hbar)^{-d} int e^{i xi.v/hbar} phi(x, xi) d xi`` in closed form.

        Parameters
        ----------
        x, v : ndarray, shape (d, ...)
            Base points and conjugate variables; trailing shapes broadcast.
        hbar : float
        """
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        d = self.dim
        shape = np.broadcast_shapes(x.shape[1:], v.shape[1:])
        out = np.zeros(shape, dtype=complex)
        cache = {}
        for alpha, coef in self.poly.terms.items():
            factor = coef(x)
            for j in range(d):
                key = (j, alpha[j])
                if key not in cache:
                    cache[key] = _gauss_moment_ft(alpha[j], self.center[j], self.sigma, v[j], hbar)
                factor = factor * cache[key]
            out = out + factor
        return out / (2.0 * np.pi * hbar) ** d

    def envelope_radius(self, hbar, tol=1e-17):
        """Radius in ``v`` beyond which the kernel is below ``tol`` relative."""
        deg = max(self.poly.degree, 0)
        # Gaussian factor exp(-sigma^2 |v|^2 / (2 hbar^2)) times a polynomial
        # of degree ``deg`` in sigma |v| / hbar.
        r = np.sqrt(2.0 * np.log(1.0 / tol)) + deg
        return r * hbar / self.sigma

    def __repr__(self):
        return f"GaussPolySymbol(center={self.center}, sigma={self.sigma}, {self.poly!r})"


class GaussianSymbol(GaussPolySymbol):
    """``a(x) exp(-|xi - xi0|^2 / (2 w^2))`` with a real amplitude field."""

    def __init__(self, amplitude, center, width):
        if not isinstance(amplitude, Field):
            raise ConfigurationError("amplitude must be a Field")
        super().__init__(PolySymbol.constant(amplitude.dim, amplitude), center, width)
        self.amplitude = amplitude
