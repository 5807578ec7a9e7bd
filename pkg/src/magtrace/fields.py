"""Electromagnetic data: potentials, vector potentials, magnetic fields.

Every field is a smooth scalar function on R^d (d = 1 or 2) that knows its
own partial derivatives. Builtin families are written as sympy expressions
and differentiated analytically; sums, products and compositions of fields
are differentiated with the Leibniz and chain rules, so derived objects such
as ``curl(A)`` or the Agmon-modified potential carry exact derivatives too.

Points are passed as arrays of shape ``(d, ...)``; the trailing shape is
broadcast through every evaluator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import sympy as sp
from scipy.special import roots_legendre

from ._smooth import smoothstep
from .errors import CapabilityError, ConfigurationError, PreconditionError

__all__ = [
    "Field",
    "ExprField",
    "ConstantField",
    "ScalarPotential",
    "VectorPotential",
    "MagneticField",
    "GaugeFunction",
    "AgmonCutoff",
    "curl",
    "gauge_shift",
    "connecting_gauge",
    "same_field",
    "line_integral",
    "triangle_flux",
    "cutoff_modify",
    "norm_sq",
    "harmonic",
    "quartic",
    "gaussian_well",
    "zero_gauge",
    "landau_gauge",
    "symmetric_gauge",
    "gaussian_bump_gauge",
    "polynomial_gauge_function",
    "POTENTIALS",
    "GAUGES",
]

_X = sp.symbols("x1 x2", real=True)


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != dim:
        raise ConfigurationError(f"expected points with leading axis {dim}, got shape {x.shape}")
    return x


def _unit(dim, j):
    beta = [0] * dim
    beta[j] = 1
    return tuple(beta)


# ---------------------------------------------------------------------------
# generic smooth fields


class Field:
    """Smooth scalar function on R^d with partial derivatives.

    Subclasses implement ``_eval`` and ``_partial``. Derivatives are cached,
    so repeated requests for the same multi-index are cheap.
    """

    dim: int

    def __init__(self, dim):
        self.dim = int(dim)
        self._partials = {}

    def __call__(self, x):
        x = _as_points(x, self.dim)
        return self._eval(x)

    def _eval(self, x):
        raise NotImplementedError

    def _partial(self, j):
        raise NotImplementedError

    @property
    def is_zero(self):
        return False

    def partial(self, j):
        """First derivative along coordinate ``j`` (0-based)."""
        if j not in self._partials:
            self._partials[j] = self._partial(j)
        return self._partials[j]

    def derivative(self, beta):
        """Mixed partial derivative for the multi-index ``beta``."""
        out = self
        for j, n in enumerate(beta):
            for _ in range(int(n)):
                out = out.partial(j)
        return out

    def gradient(self, x):
        return np.stack([self.partial(j)(x) for j in range(self.dim)])

    def laplacian(self, x):
        return sum(self.derivative(2 * np.array(_unit(self.dim, j)))(x) for j in range(self.dim))

    # algebra -------------------------------------------------------------
    def __add__(self, other):
        return add_fields(self, as_field(other, self.dim))

    __radd__ = __add__

    def __sub__(self, other):
        return add_fields(self, scale_field(as_field(other, self.dim), -1.0))

    def __rsub__(self, other):
        return add_fields(as_field(other, self.dim), scale_field(self, -1.0))

    def __neg__(self):
        return scale_field(self, -1.0)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale_field(self, other)
        return multiply_fields(self, other)

    __rmul__ = __mul__


class ConstantField(Field):
    """A constant (possibly complex) function."""

    def __init__(self, dim, value):
        super().__init__(dim)
        self.value = value

    @property
    def is_zero(self):
        return self.value == 0

    def _eval(self, x):
        dtype = complex if isinstance(self.value, complex) else float
        return np.full(x.shape[1:], self.value, dtype=dtype)

    def _partial(self, j):
        return ConstantField(self.dim, 0.0)


class ExprField(Field):
    """Field given by a sympy expression in ``x1`` (and ``x2``).

    Parameters
    ----------
    dim : int
        Spatial dimension.
    expr : sympy expression or str
        Expression in the symbols ``x1``, ``x2``.
    max_order : int, optional
        Highest derivative order that may be requested; deeper requests raise
        :class:`CapabilityError`.
    """

    def __init__(self, dim, expr, max_order=6, _order=0):
        super().__init__(dim)
        if isinstance(expr, str):
            expr = sp.sympify(expr, locals={"x1": _X[0], "x2": _X[1]})
        expr = sp.sympify(expr)
        # accept user symbols named x1/x2 regardless of their assumptions
        names = {s.name: s for s in _X[:dim]}
        unknown = [s for s in expr.free_symbols if s.name not in names]
        if unknown:
            raise ConfigurationError(f"unknown symbols {unknown} in field expression")
        self.expr = expr.xreplace({s: names[s.name] for s in expr.free_symbols})
        self.max_order = max_order
        self._order = _order
        self._syms = _X[:dim]
        self._func = sp.lambdify(self._syms, self.expr, modules=["numpy", "scipy"])

    @property
    def is_zero(self):
        return self.expr == 0

    def _eval(self, x):
        val = self._func(*x)
        return np.broadcast_to(np.asarray(val, dtype=float), x.shape[1:]).copy()

    def _partial(self, j):
        if self._order + 1 > self.max_order:
            raise CapabilityError(
                f"derivative of order {self._order + 1} requested, only {self.max_order} available"
            )
        return ExprField(self.dim, sp.diff(self.expr, self._syms[j]), self.max_order, self._order + 1)

    def __repr__(self):
        return f"ExprField({self.expr})"


class _ScaledField(Field):
    def __init__(self, base, factor):
        super().__init__(base.dim)
        self.base = base
        self.factor = factor

    def _eval(self, x):
        return self.factor * self.base._eval(x)

    def _partial(self, j):
        return scale_field(self.base.partial(j), self.factor)


class _SumField(Field):
    def __init__(self, terms):
        super().__init__(terms[0].dim)
        self.terms = tuple(terms)

    def _eval(self, x):
        out = self.terms[0]._eval(x)
        for t in self.terms[1:]:
            out = out + t._eval(x)
        return out

    def _partial(self, j):
        return add_fields(*[t.partial(j) for t in self.terms])


class _ProductField(Field):
    def __init__(self, a, b):
        super().__init__(a.dim)
        self.a = a
        self.b = b

    def _eval(self, x):
        return self.a._eval(x) * self.b._eval(x)

    def _partial(self, j):
        return add_fields(
            multiply_fields(self.a.partial(j), self.b),
            multiply_fields(self.a, self.b.partial(j)),
        )


class _ComposedField(Field):
    """``outer^{(k)}(inner(x))`` for a 1D function ``outer(t, k)``."""

    def __init__(self, outer, inner, k=0, max_order=4):
        super().__init__(inner.dim)
        self.outer = outer
        self.inner = inner
        self.k = k
        self.max_order = max_order

    def _eval(self, x):
        return self.outer(self.inner._eval(x), self.k)

    def _partial(self, j):
        if self.k + 1 > self.max_order:
            raise CapabilityError(f"outer function has only {self.max_order} derivatives")
        nxt = _ComposedField(self.outer, self.inner, self.k + 1, self.max_order)
        return multiply_fields(nxt, self.inner.partial(j))


class CallableField(Field):
    """Field from user callables.

    Parameters
    ----------
    dim : int
        Spatial dimension.
    derivatives : dict
        Map from multi-index tuples to callables ``f(x) -> ndarray``; must
        contain the zero multi-index. Missing derivatives raise
        :class:`CapabilityError` when requested.
    """

    def __init__(self, dim, derivatives, _beta=None):
        super().__init__(dim)
        self._table = {tuple(k): v for k, v in derivatives.items()}
        self._beta = _beta if _beta is not None else (0,) * dim
        if self._beta not in self._table:
            raise CapabilityError(f"no evaluator for derivative {self._beta}")

    def _eval(self, x):
        return np.asarray(self._table[self._beta](x), dtype=float)

    def _partial(self, j):
        beta = list(self._beta)
        beta[j] += 1
        return CallableField(self.dim, self._table, tuple(beta))


def as_field(value, dim):
    if isinstance(value, Field):
        if value.dim != dim:
            raise ConfigurationError("dimension mismatch between fields")
        return value
    if isinstance(value, (str, sp.Basic)):
        return ExprField(dim, value)
    return ConstantField(dim, value)


def add_fields(*terms):
    flat = []
    for t in terms:
        if t.is_zero:
            continue
        flat.extend(t.terms if isinstance(t, _SumField) else [t])
    if not flat:
        return ConstantField(terms[0].dim, 0.0)
    if len(flat) == 1:
        return flat[0]
    return _SumField(flat)


def scale_field(f, factor):
    if factor == 0 or f.is_zero:
        return ConstantField(f.dim, 0.0)
    if factor == 1:
        return f
    if isinstance(f, ConstantField):
        return ConstantField(f.dim, factor * f.value)
    if isinstance(f, _ScaledField):
        return scale_field(f.base, factor * f.factor)
    return _ScaledField(f, factor)


def multiply_fields(a, b):
    if a.dim != b.dim:
        raise ConfigurationError("dimension mismatch between fields")
    if a.is_zero or b.is_zero:
        return ConstantField(a.dim, 0.0)
    if isinstance(a, ConstantField):
        return scale_field(b, a.value)
    if isinstance(b, ConstantField):
        return scale_field(a, b.value)
    return _ProductField(a, b)


def compose(outer, inner, max_order=4):
    """Field ``x -> outer(inner(x))`` where ``outer(t, k)`` returns derivatives."""
    return _ComposedField(outer, inner, 0, max_order)


# ---------------------------------------------------------------------------
# electromagnetic data


class ScalarPotential:
    """Electric potential ``V`` with its derivatives and global data.

    Parameters
    ----------
    field : Field
        The function ``V``.
    sigma_v : float
        ``liminf V`` at infinity (``np.inf`` for confining potentials).
    lower_bound : float
        A constant ``-C`` with ``V >= -C``.
    name : str, optional
        Label used in reports.
    """

    def __init__(self, field, sigma_v=np.inf, lower_bound=0.0, name="V"):
        self.field = field
        self.dim = field.dim
        self.sigma_v = float(sigma_v)
        self.lower_bound = float(lower_bound)
        self.name = name

    def __call__(self, x):
        return self.field(x)

    def derivative(self, beta):
        return self.field.derivative(beta)

    def gradient(self, x):
        return self.field.gradient(x)

    def laplacian(self, x):
        return self.field.laplacian(x)

    def hessian(self, x):
        d = self.dim
        rows = []
        for j in range(d):
            rows.append([self.derivative(np.add(_unit(d, j), _unit(d, k)))(x) for k in range(d)])
        return np.array(rows)

    def __repr__(self):
        return f"ScalarPotential({self.name}, d={self.dim})"


class VectorPotential:
    """Magnetic vector potential ``A = (A_1, ..., A_d)``."""

    def __init__(self, components: Sequence[Field], name="A"):
        comps = tuple(components)
        dims = {c.dim for c in comps}
        if len(dims) != 1 or len(comps) != comps[0].dim:
            raise ConfigurationError("vector potential needs d components on R^d")
        self.components = comps
        self.dim = comps[0].dim
        self.name = name

    def __call__(self, x):
        return np.stack([c(x) for c in self.components])

    def derivative(self, j, beta):
        return self.components[j].derivative(beta)

    @property
    def is_zero(self):
        return all(c.is_zero for c in self.components)


class MagneticField:
    """Antisymmetric field ``B_jk``, stored as its upper triangle.

    Parameters
    ----------
    dim : int
        Spatial dimension.
    upper : dict
        Map ``(j, k) -> Field`` for ``j < k``; missing entries are zero.
    """

    def __init__(self, dim, upper=None):
        self.dim = int(dim)
        self.upper = {}
        for (j, k), f in (upper or {}).items():
            if not j < k < dim:
                raise ConfigurationError(f"invalid component index {(j, k)}")
            self.upper[(j, k)] = f

    def component(self, j, k):
        if j == k:
            return ConstantField(self.dim, 0.0)
        if j < k:
            return self.upper.get((j, k), ConstantField(self.dim, 0.0))
        return scale_field(self.upper.get((k, j), ConstantField(self.dim, 0.0)), -1.0)

    def __call__(self, x):
        x = _as_points(x, self.dim)
        d = self.dim
        out = np.zeros((d, d) + x.shape[1:])
        for (j, k), f in self.upper.items():
            v = f(x)
            out[j, k] = v
            out[k, j] = -v
        return out

    def derivative(self, j, k, gamma):
        return self.component(j, k).derivative(gamma)

    @property
    def is_zero(self):
        return all(f.is_zero for f in self.upper.values())


class GaugeFunction:
    """Real gauge function ``phi``; the gauge change is ``A -> A + grad phi``."""

    def __init__(self, field):
        self.field = field
        self.dim = field.dim

    def __call__(self, x):
        return self.field(x)

    def gradient(self, x):
        return self.field.gradient(x)


# ---------------------------------------------------------------------------
# operations


def curl(A: VectorPotential) -> MagneticField:
    """Magnetic field ``B_jk = d_j A_k - d_k A_j`` of a vector potential."""
    d = A.dim
    upper = {}
    for j in range(d):
        for k in range(j + 1, d):
            upper[(j, k)] = A.components[k].partial(j) - A.components[j].partial(k)
    return MagneticField(d, upper)


def gauge_shift(A: VectorPotential, phi: GaugeFunction) -> VectorPotential:
    """Return ``A + grad phi``."""
    if A.dim != phi.dim:
        raise ConfigurationError("gauge function and vector potential differ in dimension")
    return VectorPotential([A.components[j] + phi.field.partial(j) for j in range(A.dim)])


def connecting_gauge(A1: VectorPotential, A2: VectorPotential, order=8) -> GaugeFunction:
    """Gauge function ``phi`` with ``A2 = A1 + grad phi`` when both share ``curl``.

    ``phi(x)`` is the line integral of ``A2 - A1`` from the origin to ``x``,
    which is path independent exactly when the curls agree.
    """
    if A1.dim != A2.dim:
        raise ConfigurationError("vector potentials differ in dimension")
    diff = VectorPotential([c2 - c1 for c1, c2 in zip(A1.components, A2.components)])
    dim = A1.dim

    def phi(x):
        x = np.asarray(x, dtype=float)
        return line_integral(diff, np.zeros_like(x), x, order=order)

    derivs = {(0,) * dim: phi}
    for j in range(dim):
        derivs[_unit(dim, j)] = diff.components[j]
    return GaugeFunction(CallableField(dim, derivs))


def same_field(A1: VectorPotential, A2: VectorPotential, points, tol=1e-10):
    """Whether ``curl A1 = curl A2`` at the sample ``points`` to ``tol``."""
    if A1.dim != A2.dim:
        return False
    B1, B2 = curl(A1), curl(A2)
    pts = np.asarray(points, dtype=float)
    return bool(np.max(np.abs(B1(pts) - B2(pts)), initial=0.0) <= tol)


def _gauss_legendre(order, a=0.0, b=1.0):
    t, w = roots_legendre(order)
    return 0.5 * (b - a) * t + 0.5 * (b + a), 0.5 * (b - a) * w


def line_integral(A: VectorPotential, x, y, order=8):
    """Integral of the 1-form ``A`` along the oriented segment ``[x, y]``.

    Gauss-Legendre with ``order`` nodes, exact for components that are
    polynomials of degree ``<= 2*order - 1`` along the segment.

    Parameters
    ----------
    A : VectorPotential
    x, y : array_like, shape (d, ...)
        Segment endpoints; trailing shapes broadcast.
    order : int, optional
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    if A.is_zero:
        return np.zeros(x.shape[1:])
    t, w = _gauss_legendre(order)
    dx = y - x
    total = np.zeros(x.shape[1:])
    for ti, wi in zip(t, w):
        pts = x + ti * dx
        vals = A(pts)
        total += wi * np.sum(vals * dx, axis=0)
    return total


def triangle_flux(B: MagneticField, x, y, z, order=8):
    """Flux of ``B`` through the triangle ``<x-y-z, x+y-z, x-y+z>`` (d = 2).

    The reference triangle is mapped onto the unit square by the collapsed
    (Duffy) coordinates ``u = s``, ``v = (1 - s) t`` and integrated with a
    tensor Gauss-Legendre rule.
    """
    if B.dim != 2:
        raise ConfigurationError("triangle_flux is implemented for d = 2")
    x, y, z = np.broadcast_arrays(*(np.asarray(p, dtype=float) for p in (x, y, z)))
    p0 = x - y - z
    e1 = 2.0 * y
    e2 = 2.0 * z
    jac = e1[0] * e2[1] - e1[1] * e2[0]
    s, ws = _gauss_legendre(order)
    acc = np.zeros(x.shape[1:])
    comp = B.component(0, 1)
    for si, wsi in zip(s, ws):
        for ti, wti in zip(s, ws):
            u, v = si, (1.0 - si) * ti
            acc += wsi * wti * (1.0 - si) * comp(p0 + u * e1 + v * e2)
    return jac * acc


def norm_sq(B: MagneticField, x, convention="full"):
    """Squared magnitude of the magnetic 2-form at ``x``.

    Parameters
    ----------
    B : MagneticField
    x : array_like, shape (d, ...)
    convention : {"full", "upper"}
        ``"full"`` is the Frobenius norm ``sum_{j,k} B_jk^2``, which is what
        the second trace coefficient requires; ``"upper"`` is
        ``sum_{j<k} B_jk^2`` (half of it).
    """
    x = _as_points(x, B.dim)
    total = np.zeros(x.shape[1:])
    for f in B.upper.values():
        total = total + f(x) ** 2
    if convention == "full":
        return 2.0 * total
    if convention == "upper":
        return total
    raise ConfigurationError(f"unknown norm convention {convention!r}")


@dataclass(frozen=True)
class AgmonCutoff:
    """Increasing ``chi`` with ``chi(t) = t`` below ``a`` and ``chi' = 0`` above ``b``.

    ``chi'(t) = 1 - S((t - a)/(b - a))`` for the smoothstep ``S``; since
    ``S(s) + S(1 - s) = 1`` the plateau value is ``(a + b)/2``.
    """

    a: float
    b: float
    nodes: int = 48

    @property
    def plateau(self):
        return 0.5 * (self.a + self.b)

    def __call__(self, t, k=0):
        t = np.asarray(t, dtype=float)
        width = self.b - self.a
        tau = np.clip((t - self.a) / width, 0.0, 1.0)
        if k == 0:
            out = np.where(t <= self.a, t, 0.0)
            mid = (t > self.a) & (t < self.b)
            out = np.where(t >= self.b, self.plateau, out)
            if np.any(mid):
                tm = tau[mid]
                r, w = roots_legendre(self.nodes)
                # int_0^tau S(s) ds by Gauss-Legendre on [0, tau]
                nodes = 0.5 * tm[:, None] * (r[None, :] + 1.0)
                integral = 0.5 * tm * (smoothstep(nodes) @ w)
                out = np.array(out, dtype=float)
                out[mid] = self.a + width * (tm - integral)
            return out
        if k == 1:
            return 1.0 - smoothstep(tau)
        return -smoothstep(tau, k - 1) / width ** (k - 1)


def cutoff_modify(V: ScalarPotential, E, ceiling=None) -> ScalarPotential:
    """Bounded modification ``V_hat = chi(V)`` that leaves ``V < (E + Sigma)/2`` untouched.

    Parameters
    ----------
    V : ScalarPotential
    E : float
        Energy below which the spectrum must be preserved.
    ceiling : float, optional
        Finite stand-in for ``Sigma_V`` when ``V`` is confining.

    Returns
    -------
    ScalarPotential
        ``chi(V)`` with ``chi(t) = t`` for ``t < (E + Sigma)/2`` and
        ``chi`` constant for ``t > (E + 2 Sigma)/3``.
    """
    sigma = V.sigma_v
    if not np.isfinite(sigma):
        if ceiling is None:
            raise PreconditionError("confining potential: a finite ceiling for Sigma_V is required")
        sigma = float(ceiling)
    if E >= sigma:
        raise PreconditionError(f"E = {E} must lie below Sigma_V = {sigma}")
    chi = AgmonCutoff(0.5 * (E + sigma), (E + 2.0 * sigma) / 3.0)
    vhat = compose(chi, V.field, max_order=5)
    out = ScalarPotential(vhat, sigma_v=chi.plateau, lower_bound=V.lower_bound, name=f"chi({V.name})")
    out.cutoff = chi
    return out


# ---------------------------------------------------------------------------
# builtin families


def _radius_sq(dim):
    return sum(s**2 for s in _X[:dim])


def harmonic(dim=1, omega=1.0) -> ScalarPotential:
    """``V = omega^2 |x|^2``."""
    return ScalarPotential(ExprField(dim, omega**2 * _radius_sq(dim)), np.inf, 0.0, "harmonic")


def quartic(dim=1, omega=1.0, lam=0.25) -> ScalarPotential:
    """``V = omega^2 |x|^2 + lam |x|^4``."""
    r2 = _radius_sq(dim)
    return ScalarPotential(ExprField(dim, omega**2 * r2 + lam * r2**2), np.inf, 0.0, "quartic")


def gaussian_well(dim=1, depth=1.0, width=1.0) -> ScalarPotential:
    """``V = -depth * exp(-|x|^2 / width^2)``; ``Sigma_V = 0``."""
    expr = -depth * sp.exp(-_radius_sq(dim) / width**2)
    return ScalarPotential(ExprField(dim, expr), 0.0, -depth, "gaussian_well")


def zero_gauge(dim=1) -> VectorPotential:
    return VectorPotential([ConstantField(dim, 0.0) for _ in range(dim)], name="zero")


def landau_gauge(b=1.0) -> VectorPotential:
    """``A = (0, b x_1)``, constant field ``B_12 = b``."""
    return VectorPotential([ConstantField(2, 0.0), ExprField(2, b * _X[0])], name="landau")


def symmetric_gauge(b=1.0) -> VectorPotential:
    """``A = (-b x_2/2, b x_1/2)``, constant field ``B_12 = b``."""
    return VectorPotential(
        [ExprField(2, -b * _X[1] / 2), ExprField(2, b * _X[0] / 2)], name="symmetric"
    )


def gaussian_bump_gauge(b=1.0, w=1.0) -> VectorPotential:
    """Gauge for ``B_12 = b exp(-|x|^2/w^2)`` with ``A_1 = 0``.

    ``A_2(x) = int_0^{x_1} B_12(s, x_2) ds``, evaluated in closed form through
    the error function.
    """
    x1, x2 = _X
    a2 = b * sp.exp(-(x2**2) / w**2) * w * sp.sqrt(sp.pi) / 2 * sp.erf(x1 / w)
    return VectorPotential([ConstantField(2, 0.0), ExprField(2, a2)], name="gaussian_bump")


def polynomial_gauge_function(dim, coeffs) -> GaugeFunction:
    """Gauge function ``sum c_alpha x^alpha`` from ``{alpha: c_alpha}``."""
    expr = sp.Integer(0)
    for alpha, c in coeffs.items():
        term = sp.Float(c)
        for s, n in zip(_X[:dim], alpha):
            term = term * s**n
        expr = expr + term
    return GaugeFunction(ExprField(dim, expr))


POTENTIALS: dict[str, Callable[..., ScalarPotential]] = {
    "harmonic": harmonic,
    "quartic": quartic,
    "gaussian_well": gaussian_well,
}

GAUGES: dict[str, Callable[..., VectorPotential]] = {
    "zero": zero_gauge,
    "landau": landau_gauge,
    "symmetric": symmetric_gauge,
    "gaussian_bump": gaussian_bump_gauge,
}
