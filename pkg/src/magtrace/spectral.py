"""Spectra, traces ``Tr g(H)`` and the Helffer-Sjostrand functional calculus.

Two independent routes to ``g(H)`` are provided: the spectral theorem
applied to eigenpairs from :func:`eigensolve`, and the resolvent integral

    g(H) = -1/pi  int int  dbar g~(lambda, mu) (lambda + i mu - H)^{-1}

over an almost-analytic extension ``g~`` (:func:`hs_apply`). The
comparison of spectra under a cut-off potential (:func:`agmon_compare`)
lives here as well.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla
from numpy.polynomial import hermite_e
from scipy.special import roots_legendre

from ._smooth import bump_derivative, smoothstep
from .errors import ConfigurationError, PreconditionError
from .fields import ScalarPotential, VectorPotential, cutoff_modify
from .quantize import MagneticOperatorMatrix, auto_grid, build_hamiltonian

__all__ = [
    "TestFunction",
    "AlmostAnalyticExtension",
    "SpectralData",
    "eigensolve",
    "trace_g",
    "spectral_apply",
    "hs_apply",
    "hs_apply_extrapolated",
    "AgmonReport",
    "agmon_compare",
    "PROFILES",
]

PROFILES = ("bump", "gauss")


class TestFunction:
    """Smooth compactly supported test function on the energy axis.

    Parameters
    ----------
    center : float
        Centre ``c`` of the support.
    half_width : float
        Half-width ``w``; the support is ``[c - w, c + w]``.
    profile : {"bump", "gauss"}
        ``"bump"`` is ``exp(-1/(1 - s^2))`` with ``s = (t - c)/w``.
        ``"gauss"`` is ``exp(-(t - c)^2 / (2 scale^2))`` times a smooth window
        equal to one on ``|t - c| <= inner * w`` and vanishing beyond ``w``.
    scale : float, optional
        Gaussian scale of the ``"gauss"`` profile.
    inner : float, optional
        Plateau fraction of the ``"gauss"`` window.
    """

    __test__ = False  # not a pytest class

    def __init__(self, center, half_width, profile="bump", scale=None, inner=0.75):
        if half_width <= 0:
            raise ConfigurationError("half-width must be positive")
        if profile not in PROFILES:
            raise ConfigurationError(f"unknown profile {profile!r}; known: {', '.join(PROFILES)}")
        self.center = float(center)
        self.half_width = float(half_width)
        self.profile = profile
        if profile == "gauss":
            if scale is None or scale <= 0:
                raise ConfigurationError("the gauss profile needs a positive scale")
            if not 0 < inner < 1:
                raise ConfigurationError("inner fraction must lie in (0, 1)")
        self.scale = None if scale is None else float(scale)
        self.inner = float(inner)

    @property
    def support(self):
        return self.center - self.half_width, self.center + self.half_width

    def __call__(self, t):
        return self.derivative(t, 0)

    def derivative(self, t, k):
        """``g^{(k)}(t)``, exact up to rounding."""
        t = np.asarray(t, dtype=float)
        if self.profile == "bump":
            return bump_derivative((t - self.center) / self.half_width, k) / self.half_width**k
        return self._gauss_derivative(t, k)

    def _gauss_derivative(self, t, k):
        c, w, s = self.center, self.half_width, self.scale
        tau = (t - c) / s
        base = np.exp(-0.5 * tau * tau)
        w_in = self.inner * w
        sgn = np.where(t >= c, 1.0, -1.0)
        sigma = (w - np.abs(t - c)) / (w - w_in)
        out = np.zeros_like(t)
        for j in range(k + 1):
            coeffs = np.zeros(j + 1)
            coeffs[j] = 1.0
            # d^j/dt^j exp(-tau^2/2) = (-1)^j He_j(tau) exp(-tau^2/2) / s^j
            gj = (-1) ** j * hermite_e.hermeval(tau, coeffs) * base / s**j
            m = k - j
            if m == 0:
                win = smoothstep(sigma)
            else:
                win = smoothstep(sigma, m) * (-sgn / (w - w_in)) ** m
            out = out + comb(k, j) * gj * win
        return out

    def integral(self, k=0, nodes=400):
        """``int g^{(k)}`` over the support by Gauss-Legendre quadrature."""
        a, b = self.support
        r, wts = roots_legendre(nodes)
        t = 0.5 * (b - a) * r + 0.5 * (a + b)
        return 0.5 * (b - a) * float(np.dot(wts, self.derivative(t, k)))

    def __repr__(self):
        extra = f", scale={self.scale}" if self.profile == "gauss" else ""
        return f"TestFunction(c={self.center}, w={self.half_width}, {self.profile}{extra})"


class AlmostAnalyticExtension:
    """Taylor extension with a ``mu`` cut-off.

    ``g~(lambda, mu) = chi(mu) sum_{k<=N} g^{(k)}(lambda) (i mu)^k / k!`` with
    ``chi = 1`` on ``|mu| <= mu_cut/2`` and ``chi = 0`` for ``|mu| >= mu_cut``.
    Then ``dbar g~ = 1/2 [chi g^{(N+1)} (i mu)^N / N!
    + i chi' sum_{k<=N} g^{(k)} (i mu)^k / k!]``, which is ``O(|mu|^N)``.
    """

    def __init__(self, g: TestFunction, order=3, mu_cut=1.0):
        self.g = g
        self.order = int(order)
        self.mu_cut = float(mu_cut)

    def chi(self, mu, k=0):
        half = 0.5 * self.mu_cut
        s = (np.abs(mu) - half) / half
        if k == 0:
            return 1.0 - smoothstep(s)
        return -np.sign(mu) * smoothstep(s, 1) / half

    def __call__(self, lam, mu):
        lam, mu = np.broadcast_arrays(np.asarray(lam, float), np.asarray(mu, float))
        total = np.zeros(lam.shape, dtype=complex)
        for k in range(self.order + 1):
            total = total + self.g.derivative(lam, k) * (1j * mu) ** k / factorial(k)
        return self.chi(mu) * total

    def dbar(self, lam, mu):
        lam, mu = np.broadcast_arrays(np.asarray(lam, float), np.asarray(mu, float))
        n = self.order
        taylor = np.zeros(lam.shape, dtype=complex)
        for k in range(n + 1):
            taylor = taylor + self.g.derivative(lam, k) * (1j * mu) ** k / factorial(k)
        top = self.g.derivative(lam, n + 1) * (1j * mu) ** n / factorial(n)
        return 0.5 * (self.chi(mu) * top + 1j * self.chi(mu, 1) * taylor)


@dataclass
class SpectralData:
    """Eigenvalues ``<= E_cap`` in ascending order, with provenance."""

    eigenvalues: np.ndarray
    E_cap: float
    eigenvectors: np.ndarray | None = None
    hbar: float | None = None
    grid: object = None
    flags: list = field(default_factory=list)

    def __len__(self):
        return len(self.eigenvalues)


def _band_width(A):
    coo = A.tocoo()
    return int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0


def _lower_estimate(A):
    diag = A.diagonal().real
    off = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
    return float(np.min(diag - off))


def eigensolve(M, E_cap, vectors=False, method="auto", dense_limit=3000):
    """All eigenvalues ``<= E_cap`` of a Hermitian matrix.

    Parameters
    ----------
    M : MagneticOperatorMatrix, sparse matrix or ndarray
    E_cap : float
    vectors : bool, optional
        Also return eigenvectors.
    method : {"auto", "dense", "banded", "sparse"}
        ``"auto"`` uses a banded solver for narrow bands, dense LAPACK for
        small matrices and shift-invert Lanczos otherwise.
    """
    hbar = grid = None
    flags = []
    if isinstance(M, MagneticOperatorMatrix):
        hbar, grid, flags = M.hbar, M.grid, list(M.flags)
        A = M.data
    else:
        A = sps.csr_matrix(M) if not sps.issparse(M) else M.tocsr()
    n = A.shape[0]
    scale = abs(A).max() if A.nnz else 1.0
    herm = abs(A - A.conj().T)
    if herm.nnz and herm.max() > 1e-12 * max(scale, 1e-300):
        raise PreconditionError("eigensolve needs a Hermitian matrix")
    bw = _band_width(A)
    if method == "auto":
        if bw <= 16 and n > dense_limit:
            method = "banded"
        elif n <= dense_limit:
            method = "dense"
        else:
            method = "sparse"
    if method == "dense":
        res = sla.eigh(A.toarray(), subset_by_value=(-np.inf, E_cap), eigvals_only=not vectors)
    elif method == "banded":
        ab = np.zeros((bw + 1, n), dtype=A.dtype)
        coo = sps.triu(A).tocoo()
        ab[bw + coo.row - coo.col, coo.col] = coo.data
        lo = _lower_estimate(A) - 1.0
        res = sla.eig_banded(ab, lower=False, eigvals_only=not vectors, select="v", select_range=(lo, E_cap))
    elif method == "sparse":
        res = _sparse_lowest(A, E_cap, vectors, growth=float(grid.dim) if grid is not None else 2.0)
    else:
        raise ConfigurationError(f"unknown eigensolver method {method!r}")
    if vectors:
        vals, vecs = res
    else:
        vals, vecs = res, None
    vals = np.asarray(vals, dtype=float)
    order = np.argsort(vals)
    vals = vals[order]
    if vecs is not None:
        vecs = vecs[:, order]
    if vals.size and abs(vals[-1] - E_cap) <= 1e-9 * max(1.0, abs(E_cap)):
        flags.append("eigenvalue at E_cap")
    return SpectralData(vals, float(E_cap), vecs, hbar, grid, flags)


def _sparse_lowest(A, E_cap, vectors, k0=48, growth=2.0):
    n = A.shape[0]
    eye = sps.identity(n, format="csc", dtype=A.dtype)
    # locate the bottom of the spectrum from the Gershgorin bound, then shift
    # slightly below it so that the wanted eigenvalues dominate the inverse
    floor = _lower_estimate(A) - 1.0
    lu0 = spla.splu((A - floor * eye).tocsc())
    op0 = spla.LinearOperator(A.shape, matvec=lu0.solve, dtype=A.dtype)
    bottom = float(np.min(spla.eigsh(A, k=1, sigma=floor, OPinv=op0, tol=1e-8, return_eigenvectors=False).real))
    span = max(E_cap - bottom, 1.0)
    sigma = bottom - 0.01 * span
    lu = spla.splu((A - sigma * eye).tocsc())
    op = spla.LinearOperator(A.shape, matvec=lu.solve, dtype=A.dtype)
    k = min(k0, n - 2)
    while True:
        res = spla.eigsh(
            A, k=k, sigma=sigma, which="LM", OPinv=op, tol=0, return_eigenvectors=vectors
        )
        vals = res[0] if vectors else res
        vals = np.sort(np.real(vals))
        if vals[-1] > E_cap or k >= n - 2:
            break
        # counting functions grow like (E - E_0)^growth for confined
        # problems in two dimensions; aim past E_cap with a margin
        ratio = (E_cap - bottom) / max(vals[-1] - bottom, 1e-12)
        k = min(max(2 * k, int(1.15 * k * ratio**growth) + 16), n - 2)
    if vectors:
        w, v = res
        keep = np.real(w) <= E_cap
        return np.real(w[keep]), v[:, keep]
    return vals[vals <= E_cap]


def trace_g(s: SpectralData, g: TestFunction):
    """``sum_n g(E_n)`` over the retained eigenvalues."""
    if g.support[1] > s.E_cap:
        raise PreconditionError(
            f"supp g reaches {g.support[1]} above E_cap = {s.E_cap}; the trace would miss eigenvalues"
        )
    return float(np.sum(g(s.eigenvalues)))


def spectral_apply(s: SpectralData, g: TestFunction):
    """``sum_n g(E_n) |v_n><v_n|`` from stored eigenvectors."""
    if s.eigenvectors is None:
        raise PreconditionError("eigenvectors were not computed")
    v = s.eigenvectors
    return (v * g(s.eigenvalues)) @ v.conj().T


def _resolvent_solver(M):
    A = M.data if isinstance(M, MagneticOperatorMatrix) else sps.csr_matrix(M)
    n = A.shape[0]
    bw = _band_width(A)
    eye = np.eye(n, dtype=complex)
    if bw < n // 4:
        ab = np.zeros((2 * bw + 1, n), dtype=complex)
        coo = A.tocoo()
        ab[bw + coo.row - coo.col, coo.col] = -coo.data
        diag_row = bw

        def solve(z):
            band = ab.copy()
            band[diag_row] += z
            return sla.solve_banded((bw, bw), band, eye, check_finite=False)

        return solve
    dense = A.toarray()

    def solve(z):
        return sla.solve(z * eye - dense, eye, check_finite=False)

    return solve


def _hs_band(solve, ext, mu_lo, mu_hi, nodes=8, lam_panel=1.0, min_panels=64, mu_nodes=16):
    """``-1/pi`` times the integral over ``mu_lo <= mu <= mu_hi`` (upper half)."""
    a, b = ext.g.support
    r, w = roots_legendre(nodes)
    rm, wmq = roots_legendre(mu_nodes)
    total = None
    # geometric sub-panels in mu with ratio at most 2
    n_mu = max(1, int(np.ceil(np.log2(mu_hi / mu_lo))))
    edges = mu_lo * (mu_hi / mu_lo) ** (np.arange(n_mu + 1) / n_mu)
    for m0, m1 in zip(edges[:-1], edges[1:]):
        mus = 0.5 * (m1 - m0) * rm + 0.5 * (m1 + m0)
        wmu = 0.5 * (m1 - m0) * wmq
        for mu, wm in zip(mus, wmu):
            # panels no wider than lam_panel * mu resolve the resolvent peaks;
            # the floor resolves the derivatives of g themselves
            n_lam = max(min_panels, int(np.ceil((b - a) / (lam_panel * mu))))
            lam_edges = np.linspace(a, b, n_lam + 1)
            lams = (0.5 * np.diff(lam_edges)[:, None] * r[None, :] + 0.5 * (lam_edges[1:] + lam_edges[:-1])[:, None]).ravel()
            wl = (0.5 * np.diff(lam_edges)[:, None] * w[None, :]).ravel()
            vals = ext.dbar(lams, np.full_like(lams, mu))
            for lam, wlam, val in zip(lams, wl, vals):
                if val == 0:
                    continue
                term = (wm * wlam * val) * solve(lam + 1j * mu)
                total = term if total is None else total + term
    if total is None:
        return 0.0
    return -total / np.pi


def hs_apply(M, ext: AlmostAnalyticExtension, eps=0.005, nodes=8, lam_panel=1.0):
    """``g(M)`` from the resolvent integral over ``|mu| >= eps``.

    The lower half plane contributes the adjoint of the upper one because
    ``dbar g~(lambda, -mu)`` is the conjugate of ``dbar g~(lambda, mu)``; the
    sum of the two is Hermitian by construction.

    Raises
    ------
    ConfigurationError
        If ``eps`` is not below the cut-off ``mu_cut``.
    """
    if not 0 < eps < ext.mu_cut:
        raise ConfigurationError("eps must lie in (0, mu_cut)")
    solve = _resolvent_solver(M)
    upper = _hs_band(solve, ext, eps, ext.mu_cut, nodes, lam_panel)
    n = M.shape[0]
    if np.isscalar(upper):
        return np.zeros((n, n), dtype=complex)
    return upper + upper.conj().T


def hs_apply_extrapolated(M, ext: AlmostAnalyticExtension, eps=(0.02, 0.01, 0.005), nodes=8, lam_panel=1.0):
    """Evaluate :func:`hs_apply` on an ``eps`` ladder and extrapolate ``eps -> 0``.

    The omitted strip ``|mu| < eps`` contributes ``O(eps^(N+1))``; the
    extrapolation fits ``A + sum_p c_p eps^p`` for ``p = N+1, N+2, ...``.

    Returns
    -------
    extrapolated : ndarray
    per_eps : list of ndarray
    """
    eps = sorted(eps, reverse=True)
    solve = _resolvent_solver(M)
    n = M.shape[0]
    # nested bands: [eps_0, mu_cut], [eps_1, eps_0], ...
    acc = _hs_band(solve, ext, eps[0], ext.mu_cut, nodes, lam_panel)
    acc = np.zeros((n, n), dtype=complex) + acc
    per = [acc + acc.conj().T]
    for hi, lo in zip(eps[:-1], eps[1:]):
        band = _hs_band(solve, ext, lo, hi, nodes, lam_panel)
        acc = acc + band
        per.append(acc + acc.conj().T)
    if len(eps) == 1:
        return per[0], per
    powers = [ext.order + 1 + j for j in range(len(eps) - 1)]
    design = np.array([[1.0] + [e**p for p in powers] for e in eps])
    weights = np.linalg.solve(design.T, np.eye(len(eps))[:, 0])
    extrap = sum(wt * m for wt, m in zip(weights, per))
    return extrap, per


@dataclass
class AgmonReport:
    """``Delta(hbar) = |Tr g(H) - Tr g(H_hat)|`` and its fit against ``1/hbar``."""

    hbar: list
    delta: list
    trace: list
    slope: float
    intercept: float
    plateau: float
    notes: list = field(default_factory=list)


def agmon_compare(
    V: ScalarPotential,
    A: VectorPotential | None,
    E,
    g: TestFunction,
    hbar_list,
    ceiling=None,
    order=4,
    grid_tol=1e-10,
    max_points=None,
):
    """Compare ``Tr g(H)`` for ``V`` and for the cut-off potential ``chi(V)``.

    Both operators are discretised on the same grid per ``hbar``, so grid
    errors cancel in the difference.
    """
    if g.support[1] >= E:
        raise PreconditionError("supp g must lie below E")
    Vhat = cutoff_modify(V, E, ceiling=ceiling)
    plateau = Vhat.sigma_v
    e_cap = 0.5 * (g.support[1] + E)
    deltas, traces, notes = [], [], []
    for hb in hbar_list:
        # the modified operator decays at rate sqrt(plateau - E) only, so the
        # box follows Vhat; resolution follows the energies inside supp g
        grid = auto_grid(Vhat, hb, e_cap, order=order, tol=grid_tol, max_points=max_points)
        t1 = trace_g(eigensolve(build_hamiltonian(V, A, hb, grid), e_cap), g)
        t2 = trace_g(eigensolve(build_hamiltonian(Vhat, A, hb, grid), e_cap), g)
        deltas.append(abs(t1 - t2))
        traces.append(t1)
        notes.extend(grid.notes)
    inv = 1.0 / np.asarray(hbar_list, dtype=float)
    logd = np.log(np.maximum(np.asarray(deltas), 1e-300))
    if len(hbar_list) >= 2:
        slope, intercept = np.polyfit(inv, logd, 1)
    else:
        slope, intercept = float("nan"), float("nan")
    return AgmonReport(list(map(float, hbar_list)), deltas, traces, float(slope), float(intercept), plateau, notes)
