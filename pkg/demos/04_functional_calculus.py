"""g(H) by the Helffer-Sjostrand formula against the spectral theorem.

The almost-analytic extension of g is integrated against resolvents in
bands |Im z| > eps; extrapolating eps -> 0 removes the cut-off error.
"""
import numpy as np

from magtrace.fields import harmonic
from magtrace.quantize import GridSpec, build_hamiltonian
from magtrace.spectral import AlmostAnalyticExtension, TestFunction, eigensolve, hs_apply_extrapolated, spectral_apply

H = build_hamiltonian(harmonic(1), None, 0.2, GridSpec(1, 4.0, 120, order=4))
g = TestFunction(0.55, 0.35)
G = spectral_apply(eigensolve(H, 5.0, vectors=True), g)

ext = AlmostAnalyticExtension(g, order=3)
eps = (0.02, 0.01, 0.005)
X, per = hs_apply_extrapolated(H, ext, eps)
for e, P in zip(eps, per):
    print(f"eps {e:.3f}: relative Frobenius distance {np.linalg.norm(P - G) / np.linalg.norm(G):.2e}")
print(f"extrapolated: {np.linalg.norm(X - G) / np.linalg.norm(G):.2e}")
