"""Gauge-covariant discretisation on a Dirichlet box.

The magnetic Schrodinger operator ``sum_j (hbar D_j - A_j)^2 + V`` is
discretised by central finite differences whose hops carry the Peierls
phase ``exp(-(i/hbar) int_[x,y] A)``. Every hop, including the long hops of
the higher-order stencils, integrates ``A`` along the full segment, so a
gauge change ``A -> A + grad phi`` is exactly a diagonal unitary
conjugation of the matrix whenever the line integrals are exact.

Gaussian test symbols are quantized through the magnetic Weyl kernel
``h^d exp(-(i/hbar) int_[x,y] A) F^-1[phi]((x+y)/2, x-y)``.

Matrices are stored sparse (CSR); :meth:`MagneticOperatorMatrix.dense`
converts when a dense array is needed.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from math import factorial

import numpy as np
import scipy.sparse as sps

from .errors import ConfigurationError
from .fields import GaugeFunction, ScalarPotential, VectorPotential, line_integral
from .symbols import GaussPolySymbol, _gauss_moment_ft

__all__ = [
    "GridSpec",
    "MagneticOperatorMatrix",
    "stencil_weights",
    "build_hamiltonian",
    "build_op_kernel",
    "gauge_conjugate",
    "auto_grid",
    "dump_matrix",
    "load_matrix",
    "DEFAULT_MAX_ROWS",
]

DEFAULT_MAX_ROWS = 400_000
_MAGIC = b"MAGTRACE"


def stencil_weights(order):
    """Central weights ``c_0, ..., c_m`` of the order-``2m`` second derivative.

    ``c_k = 2 (-1)^(k+1) (m!)^2 / (k^2 (m-k)! (m+k)!)`` for ``k >= 1`` and
    ``c_0 = -2 sum_k c_k``. Order 4 gives ``[-5/2, 4/3, -1/12]``.
    """
    if order % 2 or order < 2:
        raise ConfigurationError(f"stencil order must be even and >= 2, got {order}")
    m = order // 2
    ck = [
        2.0 * (-1) ** (k + 1) * factorial(m) ** 2 / (k * k * factorial(m - k) * factorial(m + k))
        for k in range(1, m + 1)
    ]
    return np.array([-2.0 * sum(ck)] + ck)


def stencil_error_constant(order):
    """Leading relative symbol error ``c (k h)^order`` of the stencil."""
    m = order // 2
    return 2.0 * factorial(m) ** 2 / factorial(2 * m + 2)


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``N`` points per axis on ``[-L, L]^d``.

    Parameters
    ----------
    dim : int
        1 or 2.
    L : float
        Half-width of the box.
    N : int
        Points per dimension, ``N >= 8``.
    order : int
        Stencil order (2, 4, 6 or 8).
    """

    dim: int
    L: float
    N: int
    order: int = 4
    notes: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigurationError("only d = 1 and d = 2 are supported")
        if self.N < 8:
            raise ConfigurationError("a grid needs at least 8 points per dimension")
        if self.L <= 0:
            raise ConfigurationError("box half-width must be positive")
        if self.order not in (2, 4, 6, 8):
            raise ConfigurationError(f"unsupported stencil order {self.order}")

    @property
    def h(self):
        return 2.0 * self.L / (self.N - 1)

    @property
    def size(self):
        return self.N**self.dim

    @property
    def axis(self):
        return np.linspace(-self.L, self.L, self.N)

    def points(self):
        """Grid points, shape ``(d, N^d)``; the last axis varies fastest."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh])

    def multi_index(self):
        mesh = np.meshgrid(*([np.arange(self.N)] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh])

    def flat(self, idx):
        out = idx[0]
        for j in range(1, self.dim):
            out = out * self.N + idx[j]
        return out

    def scaled(self, factor):
        """Grid with the box enlarged by ``factor`` at the same spacing."""
        n = int(round((self.N - 1) * factor)) + 1
        return GridSpec(self.dim, self.h * (n - 1) / 2.0, n, self.order)


class MagneticOperatorMatrix:
    """Operator matrix on a grid together with its provenance."""

    def __init__(self, data, grid: GridSpec, hbar, flags=()):
        self.data = sps.csr_matrix(data) if not sps.issparse(data) else data.tocsr()
        self.grid = grid
        self.hbar = float(hbar)
        self.flags = tuple(flags)

    @property
    def shape(self):
        return self.data.shape

    def dense(self):
        return self.data.toarray()

    def hermitian_defect(self):
        """``max |M - M^H| / max |M|``."""
        diff = self.data - self.data.conj().T
        scale = abs(self.data).max() if self.data.nnz else 1.0
        return (abs(diff).max() if diff.nnz else 0.0) / (scale or 1.0)

    def is_hermitian(self, tol=1e-12):
        return self.hermitian_defect() <= tol

    def __matmul__(self, other):
        if isinstance(other, MagneticOperatorMatrix):
            return MagneticOperatorMatrix(self.data @ other.data, self.grid, self.hbar)
        return self.data @ other

    def __sub__(self, other):
        return MagneticOperatorMatrix(self.data - other.data, self.grid, self.hbar)

    def __add__(self, other):
        return MagneticOperatorMatrix(self.data + other.data, self.grid, self.hbar)


def _check_rows(grid, max_rows):
    if grid.size > max_rows:
        raise ConfigurationError(
            f"grid with {grid.size} rows exceeds the memory cap of {max_rows} rows"
        )


def build_hamiltonian(
    V: ScalarPotential,
    A: VectorPotential | None,
    hbar,
    grid: GridSpec,
    E_cap=None,
    max_rows=DEFAULT_MAX_ROWS,
    quad_order=8,
) -> MagneticOperatorMatrix:
    """Peierls finite-difference matrix of ``sum_j (hbar D_j - A_j)^2 + V``.

    Parameters
    ----------
    V : ScalarPotential
    A : VectorPotential or None
    hbar : float
    grid : GridSpec
    E_cap : float, optional
        Highest energy of interest; used for the resolution check
        ``h <= hbar / sqrt(E_cap - min V)``, which only records a flag.
    max_rows : int, optional
        Memory cap on ``N^d``.
    quad_order : int, optional
        Gauss-Legendre order of the link-phase line integrals.
    """
    if hbar <= 0:
        raise ConfigurationError("hbar must be positive")
    if V.dim != grid.dim or (A is not None and A.dim != grid.dim):
        raise ConfigurationError("field and grid dimensions differ")
    _check_rows(grid, max_rows)
    d, N, h = grid.dim, grid.N, grid.h
    pts = grid.points()
    idx = grid.multi_index()
    weights = stencil_weights(grid.order)
    scale = -(hbar**2) / h**2
    vdiag = V(pts)
    flags = []
    if E_cap is not None:
        pmax2 = E_cap - float(np.min(vdiag))
        if pmax2 > 0 and h > hbar / np.sqrt(pmax2):
            flags.append("resolution")
    rows = [np.arange(grid.size)]
    cols = [np.arange(grid.size)]
    vals = [(scale * weights[0] * d + vdiag).astype(complex)]
    for j in range(d):
        for k in range(1, len(weights)):
            ok = idx[j] + k < N
            src = grid.flat(idx[:, ok])
            shifted = idx[:, ok].copy()
            shifted[j] += k
            dst = grid.flat(shifted)
            x = pts[:, src]
            y = pts[:, dst]
            if A is None or A.is_zero:
                phase = np.ones(src.size, dtype=complex)
            else:
                phase = np.exp(-1j / hbar * line_integral(A, x, y, order=quad_order))
            hop = scale * weights[k] * phase
            rows += [src, dst]
            cols += [dst, src]
            vals += [hop, np.conj(hop)]
    data = sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    ).tocsr()
    return MagneticOperatorMatrix(data, grid, hbar, flags)


def _half_grid_values(symbol: GaussPolySymbol, grid: GridSpec):
    # Midpoints (x + y)/2 of grid points lie on the grid of spacing h/2.
    n2 = 2 * grid.N - 1
    ax = np.linspace(-grid.L, grid.L, n2)
    mesh = np.meshgrid(*([ax] * grid.dim), indexing="ij")
    mid = np.stack([m.ravel() for m in mesh])
    coeffs = {alpha: np.asarray(c(mid), dtype=complex) for alpha, c in symbol.poly.terms.items()}
    return n2, coeffs


def build_op_kernel(
    symbol: GaussPolySymbol,
    A: VectorPotential | None,
    hbar,
    grid: GridSpec,
    tol=1e-17,
    hermitian=False,
    max_rows=DEFAULT_MAX_ROWS,
    quad_order=8,
) -> MagneticOperatorMatrix:
    """Magnetic Weyl quantization of a Gaussian-type symbol.

    Entries are ``h^d exp(-(i/hbar) int_[x,y] A) F^-1[phi]((x+y)/2, x-y)``
    with the closed-form inverse Fourier transform of the symbol. Entries
    whose Gaussian envelope in ``x - y`` falls below ``tol`` are dropped.

    Parameters
    ----------
    symbol : GaussPolySymbol
    A : VectorPotential or None
    hbar : float
    grid : GridSpec
    tol : float, optional
        Relative envelope threshold for sparsification.
    hermitian : bool, optional
        Symmetrize ``(M + M^H)/2``; valid for real symbols.
    """
    _check_rows(grid, max_rows)
    d, N, h = grid.dim, grid.N, grid.h
    radius = symbol.envelope_radius(hbar, tol)
    m = min(int(np.floor(radius / h)), N - 1)
    n2, coeffs = _half_grid_values(symbol, grid)
    idx = grid.multi_index()
    pts = grid.points()
    offsets = np.stack(
        [o.ravel() for o in np.meshgrid(*([np.arange(-m, m + 1)] * d), indexing="ij")]
    )
    keep = np.sum((offsets * h) ** 2, axis=0) <= radius**2
    offsets = offsets[:, keep]
    vall = offsets * h
    factors = {}
    for alpha in coeffs:
        fac = np.ones(offsets.shape[1], dtype=complex)
        for j in range(d):
            fac = fac * _gauss_moment_ft(alpha[j], symbol.center[j], symbol.sigma, vall[j], hbar)
        factors[alpha] = fac / (2.0 * np.pi * hbar) ** d
    rows, cols, vals = [], [], []
    for n_off, o in enumerate(offsets.T):
        # row x, column y = x - o h, so that v = x - y = o h
        yidx = idx - o[:, None]
        ok = np.all((yidx >= 0) & (yidx < N), axis=0)
        if not np.any(ok):
            continue
        xi_ = idx[:, ok]
        yi_ = yidx[:, ok]
        mid = xi_ + yi_  # index on the half grid
        mflat = mid[0]
        for j in range(1, d):
            mflat = mflat * n2 + mid[j]
        kern = np.zeros(mflat.size, dtype=complex)
        for alpha, cvals in coeffs.items():
            kern += cvals[mflat] * factors[alpha][n_off]
        src = grid.flat(xi_)
        dst = grid.flat(yi_)
        if A is not None and not A.is_zero and np.any(o):
            phase = np.exp(-1j / hbar * line_integral(A, pts[:, src], pts[:, dst], order=quad_order))
            kern = kern * phase
        rows.append(src)
        cols.append(dst)
        vals.append(h**d * kern)
    data = sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    ).tocsr()
    flags = []
    if hermitian:
        defect = abs(data - data.conj().T).max() / max(abs(data).max(), 1e-300)
        if defect > 1e-10:
            flags.append(f"symmetrization defect {defect:.3g}")
        data = 0.5 * (data + data.conj().T)
    return MagneticOperatorMatrix(data, grid, hbar, flags)


def gauge_conjugate(M: MagneticOperatorMatrix, phi: GaugeFunction, hbar=None, grid=None):
    """``D M D^H`` with ``D = diag(exp(i phi(x) / hbar))``."""
    grid = grid or M.grid
    hbar = M.hbar if hbar is None else hbar
    if grid.size != M.shape[0] or phi.dim != grid.dim:
        raise ConfigurationError("gauge function, grid and matrix do not match")
    dvec = np.exp(1j * phi(grid.points()) / hbar)
    D = sps.diags(dvec)
    return MagneticOperatorMatrix(D @ M.data @ D.conj(), grid, hbar, M.flags)


def _ray_extent(V, dim, E, hbar, decay, rmax=60.0):
    """Smallest radius where the WKB decay exponent beyond ``V = E`` reaches ``decay``."""
    dirs = [np.eye(dim)[j] * s for j in range(dim) for s in (1.0, -1.0)]
    if dim == 2:
        dirs += [np.array([a, b]) / np.sqrt(2.0) for a in (1, -1) for b in (1, -1)]
    r = np.linspace(0.0, rmax, 24001)
    need = 0.0
    for u in dirs:
        vals = V(u[:, None] * r[None, :])
        excess = np.sqrt(np.clip(vals - E, 0.0, None))
        action = np.concatenate([[0.0], np.cumsum(0.5 * (excess[1:] + excess[:-1]) * np.diff(r))]) / hbar
        # forbidden region measured from the outermost turning point
        allowed = np.nonzero(vals <= E)[0]
        start = action[allowed[-1]] if allowed.size else 0.0
        hit = np.nonzero(action - start >= decay)[0]
        if not hit.size:
            return rmax
        need = max(need, r[hit[0]])
    return need


def auto_grid(
    V: ScalarPotential,
    hbar,
    E_cap,
    order=4,
    tol=1e-10,
    decay=18.0,
    max_points=None,
    L=None,
    E_resolve=None,
):
    """Grid resolving all states up to ``E_resolve`` (default ``E_cap``).

    The box half-width makes the WKB decay factor ``exp(-decay)`` at the
    boundary for energy ``E_cap``. The spacing targets a relative stencil
    error ``tol`` at the largest local momentum ``sqrt(E_resolve - min V)``.
    ``max_points`` caps ``N``; a note is recorded when the cap binds.
    """
    dim = V.dim
    if L is None:
        L = _ray_extent(V, dim, E_cap, hbar, decay)
    e_res = E_cap if E_resolve is None else E_resolve
    probe = np.linspace(-L, L, 401)
    mesh = np.meshgrid(*([probe] * dim), indexing="ij")
    vmin = float(np.min(V(np.stack([m.ravel() for m in mesh]))))
    pmax = np.sqrt(max(e_res - vmin, 1e-12))
    kh = (tol / stencil_error_constant(order)) ** (1.0 / order)
    h = hbar * kh / pmax
    N = int(np.ceil(2.0 * L / h)) + 1
    notes = []
    if max_points is not None and N > max_points:
        N = int(max_points)
        notes.append("points capped")
    return GridSpec(dim, float(L), max(N, 8), order, tuple(notes))


def dump_matrix(path, M: MagneticOperatorMatrix):
    """Write ``M`` densely: 32-byte header then little-endian complex pairs.

    Header: 8-byte magic, int32 ``d``, int32 ``N``, float64 ``hbar``,
    8 reserved bytes.
    """
    header = _MAGIC + struct.pack("<iid", M.grid.dim, M.grid.N, M.hbar) + b"\0" * 8
    body = np.ascontiguousarray(M.dense(), dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body.tobytes())


def load_matrix(path, L=1.0, order=4):
    """Read a matrix written by :func:`dump_matrix`.

    The header does not store the box size, so ``L`` and ``order`` are
    supplied by the caller.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _MAGIC:
        raise ConfigurationError("not a matrix dump")
    dim, N, hbar = struct.unpack("<iid", raw[8:24])
    n = N**dim
    data = np.frombuffer(raw[32:], dtype="<c16").reshape(n, n)
    return MagneticOperatorMatrix(data, GridSpec(dim, L, N, order), hbar)
