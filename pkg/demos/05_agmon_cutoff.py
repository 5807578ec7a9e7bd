"""Flattening V above an energy window barely changes Tr g(H).

chi(V) agrees with V where V < (E + Sigma)/2; the eigenfunctions with
energies in supp g tunnel into the modified region only with amplitude
exp(-c / hbar), so the trace difference collapses as hbar decreases.
"""
from magtrace.fields import harmonic
from magtrace.spectral import TestFunction, agmon_compare

rep = agmon_compare(harmonic(1), None, 1.0, TestFunction(0.55, 0.35), (0.2, 0.1, 0.05), ceiling=3.0, order=8)
for h, d in zip(rep.hbar, rep.delta):
    print(f"hbar {h:.2f}: Delta = {d:.3e}")
print(f"log Delta ~ {rep.slope:.2f} / hbar")
