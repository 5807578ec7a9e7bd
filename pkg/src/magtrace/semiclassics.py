"""Semiclassical trace coefficients, hbar sweeps of exact traces and fits.

``T0`` and ``T2`` are phase-space integrals evaluated with a radial
reduction in ``xi``: for ``F = |xi|^2 + V(x)`` every monomial moment
``int xi^alpha f(|xi|^2 + V) d xi`` factors into an angular moment and a
one-dimensional integral in ``r = |xi|``. The sweep computes
``(2 pi hbar)^d Tr g(H)`` on a ladder of ``hbar`` and
:func:`fit_expansion` extracts empirical coefficients from it.
"""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from math import gamma as gamma_fn

import numpy as np
from scipy.special import roots_legendre

from .errors import ConfigurationError, PreconditionError
from .fields import MagneticField, ScalarPotential, VectorPotential, curl, norm_sq
from .moyal import p22, p23
from .quantize import GridSpec, auto_grid, build_hamiltonian
from .spectral import TestFunction, eigensolve, trace_g
from .symbols import MultiIndex, PolySymbol, hamiltonian_symbol

__all__ = [
    "PhaseSpaceQuadrature",
    "angular_moment",
    "monomial_moment",
    "T0",
    "T2",
    "T2_hr",
    "GridPolicy",
    "Scenario",
    "SweepRow",
    "SweepTable",
    "hbar_sweep",
    "FitResult",
    "fit_expansion",
    "remainder_slope",
    "max_threads",
]


@dataclass(frozen=True)
class PhaseSpaceQuadrature:
    """Quadrature parameters for ``T0`` and ``T2``.

    Parameters
    ----------
    L : float, optional
        Half-width of the ``x`` box; by default the smallest box containing
        ``{V < c + w}`` plus a margin.
    nx : int, optional
        Trapezoid points per axis (default 8001 in 1D and 301 in 2D).
    r_panels, r_nodes : int
        Composite Gauss-Legendre rule for the radial integral.
    """

    L: float | None = None
    nx: int | None = None
    r_panels: int = 64
    r_nodes: int = 16

    def points_per_axis(self, dim):
        if self.nx is not None:
            return int(self.nx)
        return 8001 if dim == 1 else 301


_CHUNK = 2_000_000  # radial nodes evaluated per batch


def angular_moment(alpha):
    """``int_{S^{d-1}} omega^alpha d omega`` in closed form."""
    alpha = tuple(int(a) for a in alpha)
    if any(a % 2 for a in alpha):
        return 0.0
    d = len(alpha)
    num = 2.0
    for a in alpha:
        num *= gamma_fn((a + 1) / 2.0)
    return num / gamma_fn((sum(alpha) + d) / 2.0)


def _radial_nodes(lo, hi, panels, nodes):
    """Composite Gauss-Legendre nodes on ``[lo, hi]`` per ``x`` sample."""
    r, w = roots_legendre(nodes)
    edges = lo[..., None] + (hi - lo)[..., None] * (np.arange(panels + 1) / panels)
    a, b = edges[..., :-1, None], edges[..., 1:, None]
    pts = 0.5 * (b - a) * r + 0.5 * (a + b)
    wts = 0.5 * (b - a) * w
    shape = lo.shape + (panels * nodes,)
    return pts.reshape(shape), wts.reshape(shape)


def monomial_moment(g: TestFunction, k, Vx, n, quad: PhaseSpaceQuadrature):
    """``int_0^inf r^n g^{(k)}(r^2 + V(x)) dr`` for an array of ``V(x)`` values.

    The integration runs over ``r`` with ``r^2 + V`` inside ``supp g``; the
    integrand is smooth there, including ``n = 0`` in one dimension.
    """
    a, b = g.support
    Vx = np.asarray(Vx, dtype=float)
    flat = Vx.ravel()
    out = np.zeros(flat.shape)
    # only x with V(x) below the support contribute; chunk to bound memory
    live = np.nonzero(flat < b)[0]
    step = max(1, _CHUNK // (quad.r_panels * quad.r_nodes))
    for start in range(0, live.size, step):
        idx = live[start : start + step]
        v = flat[idx]
        hi = np.sqrt(b - v)
        lo = np.sqrt(np.clip(a - v, 0.0, None))
        r, w = _radial_nodes(lo, hi, quad.r_panels, quad.r_nodes)
        vals = g.derivative(r * r + v[:, None], k)
        out[idx] = np.sum(w * r**n * vals, axis=-1)
    return out.reshape(Vx.shape)


def _x_grid(V: ScalarPotential, g: TestFunction, quad: PhaseSpaceQuadrature):
    dim = V.dim
    top = g.support[1]
    L = quad.L
    if L is None:
        # smallest box containing {V < c + w} along the axes and diagonals
        r = np.linspace(0.0, 60.0, 60001)
        dirs = [np.eye(dim)[j] * s for j in range(dim) for s in (1.0, -1.0)]
        if dim == 2:
            dirs += [np.array([p, q]) / np.sqrt(2.0) for p in (1, -1) for q in (1, -1)]
        ext = 0.0
        for u in dirs:
            inside = np.nonzero(V(u[:, None] * r[None, :]) < top)[0]
            if inside.size == len(r):
                raise ConfigurationError("sublevel set {V < c + w} is unbounded; give an explicit box")
            ext = max(ext, r[inside[-1]] if inside.size else 0.0)
        L = 1.1 * ext + 0.05
    n = quad.points_per_axis(dim)
    axis = np.linspace(-L, L, n)
    h = axis[1] - axis[0]
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    pts = np.stack(mesh)
    return pts, h**dim, L


def _check_box(values, L):
    """Reject boxes where the integrand has not vanished at the boundary."""
    edges = [np.take(values, i, axis=ax) for ax in range(values.ndim) for i in (0, -1)]
    worst = max(float(np.max(np.abs(e))) for e in edges)
    if worst > 1e-12 * max(float(np.max(np.abs(values))), 1.0):
        raise ConfigurationError(f"x box of half-width {L} is too small: integrand is nonzero at its boundary")


def _pre(g: TestFunction, V: ScalarPotential):
    if g.support[1] >= V.sigma_v:
        raise PreconditionError("supp g must lie below Sigma_V")


def _xi_integral(g, k, Vx, alpha, quad):
    """``int xi^alpha g^{(k)}(|xi|^2 + V(x)) d xi``."""
    om = angular_moment(alpha)
    if om == 0.0:
        return np.zeros_like(Vx)
    d = len(alpha)
    return om * monomial_moment(g, k, Vx, sum(alpha) + d - 1, quad)


def T0(g: TestFunction, V: ScalarPotential, quad: PhaseSpaceQuadrature | None = None):
    """``int int g(|xi|^2 + V(x)) dx d xi``."""
    quad = quad or PhaseSpaceQuadrature()
    _pre(g, V)
    pts, dv, L = _x_grid(V, g, quad)
    Vx = V(pts)
    inner = _xi_integral(g, 0, Vx, (0,) * V.dim, quad)
    _check_box(inner, L)
    return float(np.sum(inner) * dv)


def T2(
    g: TestFunction,
    V: ScalarPotential,
    B: MagneticField | None = None,
    quad: PhaseSpaceQuadrature | None = None,
    convention="full",
):
    """``-1/12 int int g''(|xi|^2 + V) [Delta V + |B|^2] dx d xi``.

    ``convention`` selects the norm of the 2-form, see :func:`norm_sq`.
    """
    quad = quad or PhaseSpaceQuadrature()
    _pre(g, V)
    pts, dv, L = _x_grid(V, g, quad)
    Vx = V(pts)
    weight = V.laplacian(pts)
    if B is not None:
        weight = weight + norm_sq(B, pts, convention)
    inner = _xi_integral(g, 2, Vx, (0,) * V.dim, quad)
    _check_box(inner, L)
    return float(-np.sum(weight * inner) * dv / 12.0)


def _hessian_contraction(F0: PolySymbol) -> PolySymbol:
    d = F0.dim
    out = PolySymbol(d)
    for j in range(d):
        for k in range(d):
            ej, ek = MultiIndex.unit(d, j), MultiIndex.unit(d, k)
            z = MultiIndex.zero(d)
            out = out + F0.derivative(z, ej + ek) * F0.derivative(ej + ek, z)
            out = out - F0.derivative(ek, ej) * F0.derivative(ej, ek)
    return out


def _poly_phase_integral(P: PolySymbol, g, k, V, quad):
    """``int int P(x, xi) g^{(k)}(|xi|^2 + V) dx d xi`` monomial by monomial."""
    pts, dv, L = _x_grid(V, g, quad)
    Vx = V(pts)
    total = np.zeros(Vx.shape)
    for alpha, coef in P.terms.items():
        moment = _xi_integral(g, k, Vx, alpha, quad)
        total = total + coef(pts) * moment
    _check_box(total, L)
    return float(np.sum(total) * dv)


def T2_hr(g: TestFunction, V: ScalarPotential, quad: PhaseSpaceQuadrature | None = None):
    """Non-magnetic second coefficient in the Hessian-contraction form.

    ``-1/24 int int g''(F0) sum_jk (d_xi_j d_xi_k F0 d_x_j d_x_k F0
    - d_x_j d_xi_k F0 d_xi_j d_x_k F0)``. The contraction is formed
    symbolically from ``F0 = |xi|^2 + V`` and integrated monomial by monomial.
    """
    quad = quad or PhaseSpaceQuadrature()
    _pre(g, V)
    F0 = hamiltonian_symbol(V)
    return -_poly_phase_integral(_hessian_contraction(F0), g, 2, V, quad) / 24.0


def T2_weyl(g: TestFunction, V: ScalarPotential, quad: PhaseSpaceQuadrature | None = None):
    """Second coefficient from the ``g''`` and ``g'''`` Weyl-calculus terms.

    ``int int (g''(F0) p22 + g'''(F0) p23)``, with the polynomials of
    :func:`magtrace.moyal.p22` and :func:`magtrace.moyal.p23`; integrating
    by parts in ``xi`` brings it to the form of :func:`T2`.
    """
    quad = quad or PhaseSpaceQuadrature()
    _pre(g, V)
    F0 = hamiltonian_symbol(V)
    two = _poly_phase_integral(p22(F0), g, 2, V, quad)
    three = _poly_phase_integral(p23(F0), g, 3, V, quad)
    return two + three


# ---------------------------------------------------------------------------
# sweeps


def max_threads():
    """Worker cap from ``MAGTRACE_THREADS`` (default 1)."""
    raw = os.environ.get("MAGTRACE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"MAGTRACE_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


@dataclass(frozen=True)
class GridPolicy:
    """How a grid is chosen per ``hbar``.

    ``mode="auto"`` calls :func:`magtrace.quantize.auto_grid`; ``"fixed"``
    uses ``L`` and ``N`` as given for every ``hbar``.
    """

    mode: str = "auto"
    order: int = 4
    L: float | None = None
    N: int | None = None
    tol: float = 1e-10
    decay: float = 18.0
    max_points: int | None = None

    def grid(self, V: ScalarPotential, hbar, E_cap) -> GridSpec:
        if self.mode == "fixed":
            if self.L is None or self.N is None:
                raise ConfigurationError("fixed grid policy needs L and N")
            return GridSpec(V.dim, self.L, self.N, self.order)
        if self.mode != "auto":
            raise ConfigurationError(f"unknown grid mode {self.mode!r}")
        return auto_grid(
            V, hbar, E_cap, order=self.order, tol=self.tol, decay=self.decay,
            max_points=self.max_points, L=self.L,
        )


@dataclass
class Scenario:
    """A magnetic Schrodinger operator together with ``g``, an ``hbar`` ladder and a grid policy."""

    name: str
    V: ScalarPotential
    A: VectorPotential | None
    g: TestFunction
    hbars: tuple
    E_cap: float
    policy: GridPolicy = field(default_factory=GridPolicy)
    description: str = ""

    @property
    def dim(self):
        return self.V.dim

    @property
    def B(self):
        return None if self.A is None else curl(self.A)

    def with_gauge(self, A):
        return replace(self, A=A)


@dataclass(frozen=True)
class SweepRow:
    hbar: float
    value: float
    grid_N: int
    grid_L: float
    n_eigs: int
    flags: tuple = ()
    error: str | None = None


@dataclass
class SweepTable:
    """Rows ``(hbar, (2 pi hbar)^d Tr g(H))`` with strictly decreasing ``hbar``."""

    dim: int
    rows: list = field(default_factory=list)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: -r.hbar)
        hb = [r.hbar for r in self.rows]
        if len(set(hb)) != len(hb):
            raise ConfigurationError("hbar values in a sweep must be distinct")

    @property
    def hbar(self):
        return np.array([r.hbar for r in self.rows if r.error is None])

    @property
    def values(self):
        return np.array([r.value for r in self.rows if r.error is None])

    @property
    def failed(self):
        return [r for r in self.rows if r.error is not None]

    def __len__(self):
        return len(self.rows)


def _sweep_row(sc: Scenario, hb, E_cap):
    try:
        grid = sc.policy.grid(sc.V, hb, E_cap)
        H = build_hamiltonian(sc.V, sc.A, hb, grid, E_cap=E_cap)
        spec = eigensolve(H, E_cap)
        val = (2.0 * np.pi * hb) ** sc.dim * trace_g(spec, sc.g)
        flags = tuple(grid.notes) + tuple(spec.flags)
        return SweepRow(float(hb), float(val), grid.N, grid.L, len(spec), flags)
    except (PreconditionError, MemoryError) as exc:
        return SweepRow(float(hb), float("nan"), 0, 0.0, 0, ("failed",), str(exc))


def hbar_sweep(sc: Scenario, hbars=None, g: TestFunction | None = None, E_cap=None, threads=None):
    """``(2 pi hbar)^d Tr g(H)`` for each ``hbar``; rows are independent."""
    hbars = sc.hbars if hbars is None else tuple(hbars)
    if g is not None:
        sc = replace(sc, g=g)
    E_cap = sc.E_cap if E_cap is None else E_cap
    if sc.g.support[1] > E_cap:
        raise PreconditionError("supp g must lie below E_cap")
    if not hbars:
        return SweepTable(sc.dim, [])
    n = min(threads or max_threads(), len(hbars))
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(lambda hb: _sweep_row(sc, hb, E_cap), hbars))
    else:
        rows = [_sweep_row(sc, hb, E_cap) for hb in hbars]
    return SweepTable(sc.dim, rows)


# ---------------------------------------------------------------------------
# fitting


@dataclass
class FitResult:
    """Least-squares coefficients ``T_j`` of ``value ~ sum_j hbar^j T_j``.

    ``residual`` is ``sqrt(RSS / (n - p))``, comparable across fits with a
    different number of parameters; it is ``nan`` without spare rows.
    """

    powers: tuple
    coefficients: dict
    covariance: np.ndarray
    residual: float
    condition: float
    remainder_slope: float
    hbar: np.ndarray
    values: np.ndarray
    dropped: int = 0
    warnings: list = field(default_factory=list)

    def __getitem__(self, j):
        return self.coefficients.get(j, 0.0)


def remainder_slope(hbar, values, T0_ref, T2_ref=0.0):
    """Log-log slope of ``|value - T0 - hbar^2 T2|`` against ``hbar``."""
    hbar = np.asarray(hbar, float)
    rem = np.abs(np.asarray(values, float) - T0_ref - hbar**2 * T2_ref)
    ok = rem > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(hbar[ok]), np.log(rem[ok]), 1)[0])


def _design(hbar, powers):
    return np.stack([hbar**p for p in powers], axis=1)


def fit_expansion(table, J, even_only=False, cond_limit=1e10):
    """Fit ``value(hbar) ~ sum_{j<=J} hbar^j T_j``.

    Parameters
    ----------
    table : SweepTable or tuple of arrays
        A sweep or ``(hbar, values)``.
    J : int
        Highest power.
    even_only : bool
        Restrict to even ``j``.
    cond_limit : float
        Rows with the largest ``hbar`` are dropped while the design's
        condition number exceeds this.

    Raises
    ------
    PreconditionError
        With fewer than ``J + 2`` rows.
    """
    if isinstance(table, SweepTable):
        hbar, values = table.hbar, table.values
    else:
        hbar, values = (np.asarray(a, dtype=float) for a in table)
    order = np.argsort(-hbar)
    hbar, values = hbar[order], values[order]
    if len(hbar) < J + 2:
        raise PreconditionError(f"fit to order {J} needs at least {J + 2} rows, got {len(hbar)}")
    powers = tuple(j for j in range(J + 1) if not even_only or j % 2 == 0)
    notes = []
    dropped = 0
    X = _design(hbar, powers)
    cond = float(np.linalg.cond(X))
    while cond > cond_limit and len(hbar) > len(powers):
        warnings.warn(f"ill-conditioned fit (cond {cond:.3g}); dropping the largest hbar row")
        notes.append(f"dropped hbar={hbar[0]!r} for conditioning")
        hbar, values = hbar[1:], values[1:]
        dropped += 1
        X = _design(hbar, powers)
        cond = float(np.linalg.cond(X))
    coef, *_ = np.linalg.lstsq(X, values, rcond=None)
    resid = values - X @ coef
    dof = len(hbar) - len(powers)
    if dof > 0:
        s2 = float(resid @ resid) / dof
        cov = s2 * np.linalg.inv(X.T @ X)
        residual = float(np.sqrt(s2))
    else:
        cov = np.full((len(powers), len(powers)), np.nan)
        residual = float("nan")
    coeffs = {p: float(c) for p, c in zip(powers, coef)}
    slope = remainder_slope(hbar, values, coeffs.get(0, 0.0), coeffs.get(2, 0.0))
    return FitResult(powers, coeffs, cov, residual, cond, slope, hbar, values, dropped, notes)
