"""Named scenarios and closed-form spectra used as oracles.

A scenario is a plain dictionary of defaults (potential family, gauge,
test function, ``hbar`` ladder, grid policy, options and tolerances). A
configuration names a scenario and may override any of its entries;
:func:`resolve` merges the two and :class:`ScenarioConfig` builds the
library objects.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .fields import GAUGES, POTENTIALS, ScalarPotential, VectorPotential
from .semiclassics import GridPolicy, Scenario
from .spectral import TestFunction

__all__ = [
    "REGISTRY",
    "ScenarioConfig",
    "resolve",
    "harmonic_levels",
    "fock_darwin_levels",
]

_BUMP = {"center": 0.55, "half_width": 0.35, "profile": "bump"}
_GAUSS = {"center": 0.0, "half_width": 6.5, "profile": "gauss", "scale": 1.0, "inner": 0.75}

REGISTRY = {
    "harmonic1d": {
        "description": "V = x^2, no field, narrow bump g on [0.2, 0.9], order-4 grid",
        "potential": {"family": "harmonic", "params": {"dim": 1}},
        "gauge": None,
        "g": _BUMP,
        "hbar": [0.2, 0.15, 0.1, 0.075, 0.05, 0.025],
        "E_cap": 1.2,
        "grid": {"mode": "auto", "order": 4},
        "options": {"fit_J": 2, "even_only": True},
        "tolerances": {"T0": 1e-3, "T2_abs": 1e-3, "remainder_order": 3.5},
    },
    "anharmonic1d": {
        "description": "V = x^2 + x^4/4, no field, windowed Gaussian g",
        "potential": {"family": "quartic", "params": {"dim": 1, "lam": 0.25}},
        "gauge": None,
        "g": _GAUSS,
        "hbar": [0.4, 0.35, 0.3, 0.25, 0.2, 0.15, 0.1, 0.075],
        "E_cap": 6.5,
        "grid": {"mode": "auto", "order": 8},
        "options": {"fit_J": 6, "even_only": True},
        "tolerances": {"T0": 1e-3, "T2": 0.02},
    },
    "magnetic2d": {
        "description": "V = |x|^2 in 2D, constant field b in the Landau gauge, windowed Gaussian g",
        "potential": {"family": "harmonic", "params": {"dim": 2}},
        "gauge": {"family": "landau", "params": {"b": 1.0}},
        "g": _GAUSS,
        "hbar": [0.4, 0.35, 0.3, 0.25, 0.2, 0.15],
        "E_cap": 6.5,
        "grid": {"mode": "auto", "order": 8, "max_points": 110},
        "options": {"fit_J": 4, "even_only": True},
        "tolerances": {"T0": 1e-3, "T2": 0.05},
    },
    "gauge2d": {
        "description": "Landau against symmetric gauge for b = 1 on a shared grid",
        "potential": {"family": "harmonic", "params": {"dim": 2}},
        "gauge": {"family": "landau", "params": {"b": 1.0}},
        "g": {"center": 2.5, "half_width": 2.0, "profile": "bump"},
        "hbar": [0.5],
        "E_cap": 5.0,
        "grid": {"mode": "fixed", "order": 4, "L": 5.0, "N": 60},
        "options": {"other_gauge": {"family": "symmetric", "params": {"b": 1.0}}},
        "tolerances": {"eigenvalues": 1e-9, "trace": 1e-9, "conjugation": 1e-10},
    },
    "moyal2d": {
        "description": "Composition of two Gaussian symbols under a constant field",
        "potential": {"family": "harmonic", "params": {"dim": 2}},
        "gauge": {"family": "landau", "params": {"b": 1.0}},
        "g": _BUMP,
        "hbar": [0.4, 0.3, 0.2, 0.15],
        "E_cap": 1.0,
        "grid": {"mode": "auto", "order": 2},
        "options": {"amplitude_width": 1.5, "symbol_width": 1.0, "box": 2.0},
        "tolerances": {"slope": 2.5, "slope_without_c2": 2.3},
    },
    "hs1d": {
        "description": "Helffer-Sjostrand route on the 1D harmonic oscillator",
        "potential": {"family": "harmonic", "params": {"dim": 1}},
        "gauge": None,
        "g": _BUMP,
        "hbar": [0.2],
        "E_cap": 5.0,
        "grid": {"mode": "fixed", "order": 4, "L": 4.0, "N": 120},
        "options": {"order": 3, "mu_cut": 1.0, "eps": [0.02, 0.01, 0.005]},
        "tolerances": {"frobenius": 1e-3},
    },
    "agmon1d": {
        "description": "Cut-off potential chi(V) against V = x^2 below E = 1",
        "potential": {"family": "harmonic", "params": {"dim": 1}},
        "gauge": None,
        "g": _BUMP,
        "hbar": [0.2, 0.1, 0.05],
        "E_cap": 1.0,
        "grid": {"mode": "auto", "order": 8},
        "options": {"E": 1.0, "ceiling": 3.0, "decay_power": 6, "reference_hbar": 0.1},
        "tolerances": {"delta": 1e-6},
    },
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve(config: dict) -> "ScenarioConfig":
    """Merge a configuration onto its registry entry.

    Raises
    ------
    ConfigurationError
        If the scenario name is not registered.
    """
    name = config.get("scenario")
    if name not in REGISTRY:
        raise ConfigurationError(f"unknown scenario {name!r}; registered: {', '.join(sorted(REGISTRY))}")
    keys = ("potential", "gauge", "g", "hbar", "E_cap", "grid", "options", "tolerances")
    overrides = {k: config[k] for k in keys if k in config}
    merged = _merge(REGISTRY[name], overrides)
    return ScenarioConfig(name, merged, int(config.get("seed", 0)))


def _family(kind, registry, spec):
    fam = spec.get("family")
    if fam not in registry:
        raise ConfigurationError(f"unknown {kind} family {fam!r}; known: {', '.join(sorted(registry))}")
    try:
        return registry[fam](**spec.get("params", {}))
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {kind} {fam!r}: {exc}") from exc


@dataclass
class ScenarioConfig:
    """A resolved scenario with builders for the library objects."""

    name: str
    data: dict
    seed: int = 0

    def potential(self) -> ScalarPotential:
        return _family("potential", POTENTIALS, self.data["potential"])

    def gauge(self, spec=None) -> VectorPotential | None:
        spec = self.data["gauge"] if spec is None else spec
        if spec is None:
            return None
        return _family("gauge", GAUGES, spec)

    def test_function(self) -> TestFunction:
        g = dict(self.data["g"])
        return TestFunction(
            g["center"], g["half_width"], g.get("profile", "bump"), g.get("scale"), g.get("inner", 0.75)
        )

    def policy(self) -> GridPolicy:
        grid = self.data["grid"]
        known = {"mode", "order", "L", "N", "tol", "decay", "max_points"}
        return GridPolicy(**{k: v for k, v in grid.items() if k in known})

    @property
    def hbar(self):
        return tuple(float(h) for h in self.data["hbar"])

    @property
    def options(self):
        return self.data.get("options", {})

    @property
    def tolerances(self):
        return self.data.get("tolerances", {})

    def scenario(self) -> Scenario:
        V = self.potential()
        A = self.gauge()
        if A is not None and A.dim != V.dim:
            raise ConfigurationError("gauge and potential differ in dimension")
        return Scenario(
            self.name, V, A, self.test_function(), self.hbar, float(self.data["E_cap"]),
            self.policy(), self.data.get("description", ""),
        )


def harmonic_levels(hbar, count, omega=1.0):
    """Eigenvalues ``hbar omega (2n + 1)`` of ``-hbar^2 d^2 + omega^2 x^2``."""
    return hbar * omega * (2.0 * np.arange(count) + 1.0)


def fock_darwin_levels(hbar, b, E_cap, omega=1.0):
    """Eigenvalues below ``E_cap`` of ``(hbar D - A)^2 + omega^2 |x|^2`` with constant field ``b``.

    With ``Omega = sqrt(omega^2 + b^2/4)`` the levels are
    ``hbar [(2 Omega - b)(n1 + 1/2) + (2 Omega + b)(n2 + 1/2)]``.
    """
    big = np.sqrt(omega**2 + 0.25 * b * b)
    lo, hi = 2.0 * big - abs(b), 2.0 * big + abs(b)
    n1 = np.arange(int(E_cap / (hbar * lo)) + 2)
    n2 = np.arange(int(E_cap / (hbar * hi)) + 2)
    E = hbar * (lo * (n1[:, None] + 0.5) + hi * (n2[None, :] + 0.5))
    E = np.sort(E.ravel())
    return E[E <= E_cap]
