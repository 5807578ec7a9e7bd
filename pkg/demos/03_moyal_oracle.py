"""Check the composition expansion against exact operator products.

Op(a) Op(b) is applied to wave packets and compared with Op(c0 + hbar c1 +
hbar^2 c2). Each extra term raises the observed order by one; in one
dimension the check runs in seconds.
"""
import sympy as sp

from magtrace.fields import ExprField
from magtrace.moyal import composition_error
from magtrace.symbols import GaussianSymbol

x1 = sp.Symbol("x1")
a = GaussianSymbol(ExprField(1, sp.exp(-((x1 - 0.2) ** 2) / 4.5)), [0.3], 1.0)
b = GaussianSymbol(ExprField(1, (1 + 0.3 * x1) * sp.exp(-(x1**2) / 4.5)), [-0.1], 1.0)

rep = composition_error(a, b, None, hbars=(0.4, 0.3, 0.2, 0.15))
for k in range(3):
    errs = "  ".join(f"{e:.2e}" for e in rep.errors[k])
    print(f"through c{k}: {errs}   slope {rep.slopes[k]:.2f}")
