"""Recover the first two trace coefficients of an anharmonic oscillator.

The scaled trace (2 pi hbar) Tr g(H) is computed from finite-difference
spectra at a ladder of hbar values, fitted by an even polynomial in hbar and
compared with the phase-space integrals T0 and T2.
"""
import numpy as np

from magtrace.fields import quartic
from magtrace.semiclassics import T0, T2, T2_hr, GridPolicy, Scenario, fit_expansion, hbar_sweep
from magtrace.spectral import TestFunction

V = quartic(1, lam=0.25)
g = TestFunction(0.0, 6.5, "gauss", scale=1.0)
hbars = (0.4, 0.35, 0.3, 0.25, 0.2, 0.15, 0.1, 0.075)

table = hbar_sweep(Scenario("anharmonic", V, None, g, hbars, 6.5, GridPolicy(order=8)))
for row in table.rows:
    print(f"hbar {row.hbar:6.3f}  N {row.grid_N:5d}  value {row.value:.12f}")

fit = fit_expansion(table, 6, even_only=True)
t0, t2 = T0(g, V), T2(g, V)
print(f"T0 fit {fit[0]:.8f}  quadrature {t0:.8f}")
print(f"T2 fit {fit[2]:.6f}  quadrature {t2:.6f}  Hessian form {T2_hr(g, V):.6f}")
print(f"relative T2 error {abs(fit[2] - t2) / abs(t2):.2e}")

# the remainder after the first two terms shrinks like hbar^4
rem = np.abs(table.values - t0 - table.hbar**2 * t2)
print("log-log remainder slope", np.polyfit(np.log(table.hbar), np.log(rem), 1)[0])
