"""Semiclassical trace asymptotics for magnetic Schrodinger operators.

Modules
-------
fields
    Scalar and vector potentials, magnetic 2-forms and gauge functions.
symbols
    Polynomial and Gaussian phase-space symbols and resolvent parametrices.
moyal
    Magnetic Moyal composition coefficients and a matrix-level oracle.
quantize
    Peierls finite-difference Hamiltonians and magnetic Weyl quantization.
spectral
    Eigensolvers, ``Tr g(H)``, Helffer-Sjostrand calculus, Agmon comparison.
semiclassics
    Phase-space quadrature of ``T_0``, ``T_2``, hbar sweeps and fits.
cli
    ``magtrace`` command line tool.
"""
from .errors import CapabilityError, ConfigurationError, MagtraceError, PreconditionError

__version__ = "0.1.0"

__all__ = [
    "MagtraceError",
    "ConfigurationError",
    "PreconditionError",
    "CapabilityError",
    "__version__",
]
