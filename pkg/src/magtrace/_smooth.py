"""Smooth one-variable building blocks shared across modules.

The bump ``exp(-1/(1-s^2))`` and the smoothstep built from ``exp(-1/s)``
both come with exact derivatives, evaluated in a way that stays finite
near the edges of their transition regions.
"""
from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import expit

__all__ = [
    "bump",
    "bump_derivative",
    "smoothstep",
    "set_partitions",
]


def set_partitions(n):
    """Yield every partition of ``range(n)`` as a list of tuples."""
    if n == 0:
        yield []
        return
    for part in set_partitions(n - 1):
        # put element n-1 in an existing block or in a block of its own
        for i in range(len(part)):
            yield part[:i] + [part[i] + (n - 1,)] + part[i + 1:]
        yield part + [(n - 1,)]


@lru_cache(maxsize=None)
def _bump_numerators(kmax):
    # d^k/ds^k exp(phi) = P_k(s) / q^{2k} exp(phi), q = 1 - s^2, phi = -1/q.
    # Differentiating gives P_{k+1} = P_k' q^2 + 4 k s P_k q - 2 s P_k.
    q = np.array([1.0, 0.0, -1.0])
    s = np.array([0.0, 1.0])
    polys = [np.array([1.0])]
    for k in range(kmax):
        pk = polys[-1]
        term1 = P.polymul(P.polyder(pk), P.polymul(q, q)) if len(pk) > 1 else np.zeros(1)
        term2 = P.polymul(P.polymul(4.0 * k * s, pk), q)
        term3 = P.polymul(-2.0 * s, pk)
        polys.append(P.polyadd(P.polyadd(term1, term2), term3))
    return tuple(polys)


def bump(s):
    """Standard bump ``exp(-1/(1-s^2))`` on ``|s| < 1``, zero elsewhere."""
    return bump_derivative(s, 0)


def bump_derivative(s, k):
    """k-th derivative of the standard bump with respect to ``s``.

    Parameters
    ----------
    s : array_like
        Evaluation points.
    k : int
        Derivative order, ``k >= 0``.

    Returns
    -------
    ndarray
        Values of the derivative; exactly zero for ``|s| >= 1``.
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    q = 1.0 - si * si
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        val = np.exp(-1.0 / q)
        if k > 0:
            pk = _bump_numerators(k)[k]
            val = val * P.polyval(si, pk) / q ** (2 * k)
    out[inside] = np.where(np.isfinite(val), val, 0.0)
    return out


@lru_cache(maxsize=None)
def _logistic_derivative_terms(k):
    # L(u) = 1/(1+e^u), M = 1 - L; d/du L = -L M, d/du M = L M.
    # k-th derivative of L as {(a, b): coef} meaning sum coef L^a M^b.
    terms = {(1, 0): 1.0}
    for _ in range(k):
        new = {}
        for (a, b), c in terms.items():
            if a:
                new[(a, b + 1)] = new.get((a, b + 1), 0.0) - a * c
            if b:
                new[(a + 1, b)] = new.get((a + 1, b), 0.0) + b * c
        terms = {key: v for key, v in new.items() if v != 0.0}
    return terms


def _logistic_derivative(u, k):
    L = expit(-u)
    M = expit(u)
    out = np.zeros_like(u)
    for (a, b), c in _logistic_derivative_terms(k).items():
        out = out + c * L**a * M**b
    return out


def _u_derivative(s, k):
    # u(s) = 1/s - 1/(1-s)
    if k == 0:
        return 1.0 / s - 1.0 / (1.0 - s)
    return (-1) ** k * factorial(k) / s ** (k + 1) - factorial(k) / (1.0 - s) ** (k + 1)


def smoothstep(s, k=0):
    """Smooth step ``S`` rising from 0 at ``s <= 0`` to 1 at ``s >= 1``.

    ``S(s) = f(s) / (f(s) + f(1 - s))`` with ``f(s) = exp(-1/s)``, so that
    ``S(s) + S(1 - s) = 1``. Derivatives of any order are computed with
    Faa di Bruno's formula through the logistic form ``1/(1 + exp(u))``,
    ``u = 1/s - 1/(1-s)``, which avoids overflow.

    Parameters
    ----------
    s : array_like
        Evaluation points.
    k : int, optional
        Derivative order.
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    if k == 0:
        out[s >= 1.0 - 2e-3] = 1.0
    # outside this window S is 0 or 1 to far below double precision
    mask = (s > 2e-3) & (s < 1.0 - 2e-3)
    si = s[mask]
    if si.size:
        if k == 0:
            out[mask] = expit(-_u_derivative(si, 0))
        else:
            u = _u_derivative(si, 0)
            du = {j: _u_derivative(si, j) for j in range(1, k + 1)}
            acc = np.zeros_like(si)
            for part in set_partitions(k):
                term = _logistic_derivative(u, len(part))
                for block in part:
                    term = term * du[len(block)]
                acc = acc + term
            out[mask] = acc
    return out
