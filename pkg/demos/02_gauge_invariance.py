"""Landau and symmetric gauges give unitarily equivalent Peierls matrices.

Both gauges describe the constant field b. The connecting gauge function is
a line integral of their difference; conjugating by exp(i phi / hbar)
maps one matrix onto the other entry by entry.
"""
import numpy as np

from magtrace.fields import connecting_gauge, harmonic, landau_gauge, symmetric_gauge
from magtrace.quantize import GridSpec, build_hamiltonian, gauge_conjugate
from magtrace.scenarios import fock_darwin_levels
from magtrace.spectral import eigensolve

b, hbar, E_cap = 1.0, 0.5, 5.0
V = harmonic(2)
grid = GridSpec(2, 5.0, 60, order=4)
A1, A2 = landau_gauge(b), symmetric_gauge(b)

H1 = build_hamiltonian(V, A1, hbar, grid)
H2 = build_hamiltonian(V, A2, hbar, grid)
phi = connecting_gauge(A1, A2)
print("max |D H1 D^* - H2| =", abs(gauge_conjugate(H1, phi).data - H2.data).max())

e1 = eigensolve(H1, E_cap).eigenvalues
e2 = eigensolve(H2, E_cap).eigenvalues
exact = fock_darwin_levels(hbar, b, E_cap)
print("levels   Landau         symmetric      closed form")
for a, c, e in zip(e1, e2, exact):
    print(f"         {a:.10f}   {c:.10f}   {e:.10f}")
print("max relative gauge gap", np.max(np.abs(e1 - e2) / e1))
