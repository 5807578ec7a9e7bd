"""Command line entry point: ``magtrace <command> --config path [--out dir] [--seed n]``.

Commands read one JSON configuration naming a registered scenario, run a
verification and write machine-readable reports into the output directory.
Exit codes: 0 when every check passes, 1 when a check fails, 2 for
configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import sympy as sp

from .errors import CapabilityError, ConfigurationError, PreconditionError
from .fields import ExprField, connecting_gauge, same_field
from .moyal import composition_error
from .quantize import build_hamiltonian, dump_matrix, gauge_conjugate
from .scenarios import REGISTRY, ScenarioConfig, resolve
from .semiclassics import T0, T2, T2_hr, fit_expansion, hbar_sweep
from .spectral import (
    AlmostAnalyticExtension,
    agmon_compare,
    eigensolve,
    hs_apply_extrapolated,
    spectral_apply,
    trace_g,
)
from .symbols import GaussPolySymbol, PolySymbol

__all__ = ["main", "load_config", "COMMANDS"]

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


# ---------------------------------------------------------------------------
# configuration


def _schema():
    text = resources.files("magtrace").joinpath("config.schema.json").read_text()
    return json.loads(text)


def _line_of(text, path):
    """Best-effort line number of the JSON element at ``path``."""
    pos = 0
    for part in path:
        if isinstance(part, str):
            hit = text.find(f'"{part}"', pos)
            if hit < 0:
                break
            pos = hit
        else:
            # array index: skip to the opening bracket, then count commas
            hit = text.find("[", pos)
            if hit < 0:
                break
            pos = hit + 1
            depth, count = 0, 0
            while pos < len(text) and count < part:
                ch = text[pos]
                if ch in "[{":
                    depth += 1
                elif ch in "]}":
                    depth -= 1
                elif ch == "," and depth == 0:
                    count += 1
                pos += 1
    return text.count("\n", 0, pos) + 1


def load_config(path) -> tuple[dict, str]:
    """Read and validate a configuration file.

    Raises
    ------
    ConfigurationError
        With the offending line in the message.
    """
    import jsonschema

    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    validator = jsonschema.Draft7Validator(_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        line = _line_of(text, list(err.absolute_path))
        where = "/".join(map(str, err.absolute_path)) or "<root>"
        raise ConfigurationError(f"{path}:{line}: at {where}: {err.message}")
    return data, text


# ---------------------------------------------------------------------------
# output helpers


def _clean(obj):
    """Convert numpy scalars and arrays for JSON output."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_table(path, header, rows, delimiter=","):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _check(value, tol, kind="max"):
    ok = bool(value <= tol) if kind == "max" else bool(value >= tol)
    return {"value": value, "tolerance": tol, "kind": kind, "pass": ok}


# ---------------------------------------------------------------------------
# commands


def cmd_trace_sweep(cfg: ScenarioConfig, out: Path):
    sc = cfg.scenario()
    table = hbar_sweep(sc)
    _write_table(
        out / "sweep.csv",
        ["hbar", "value", "grid_N", "flags"],
        [[r.hbar, r.value, r.grid_N, ";".join(r.flags)] for r in table.rows],
    )
    opts, tol = cfg.options, cfg.tolerances
    J = int(opts.get("fit_J", 2))
    even = bool(opts.get("even_only", True))
    B = sc.B
    quad = {"T0": T0(sc.g, sc.V), "T2": T2(sc.g, sc.V, B)}
    if B is None:
        quad["T2_hr"] = T2_hr(sc.g, sc.V)
    report = {"scenario": cfg.name, "seed": cfg.seed, "quadrature": quad, "rows_failed": len(table.failed)}
    checks = {}
    try:
        fit = fit_expansion(table, J, even)
    except PreconditionError as exc:
        report["fit_error"] = str(exc)
        fit = None
    if fit is not None:
        report["fit"] = {
            "powers": list(fit.powers),
            "coefficients": {str(k): v for k, v in fit.coefficients.items()},
            "covariance": fit.covariance,
            "residual": fit.residual,
            "condition": fit.condition,
            "remainder_order": fit.remainder_slope,
            "dropped_rows": fit.dropped,
            "warnings": fit.warnings,
        }
        t0 = quad["T0"]
        checks["T0"] = _check(abs(fit[0] - t0) / abs(t0), float(tol.get("T0", 1e-3)))
        if 2 in fit.powers:
            t2 = quad["T2"]
            if "T2" in tol and t2 != 0:
                checks["T2"] = _check(abs(fit[2] - t2) / abs(t2), float(tol["T2"]))
            elif "T2_abs" in tol:
                checks["T2_abs"] = _check(abs(fit[2] - t2), float(tol["T2_abs"]))
        if "remainder_order" in tol:
            checks["remainder_order"] = _check(fit.remainder_slope, float(tol["remainder_order"]), "min")
        rem = np.abs(fit.values - fit[0] - fit.hbar**2 * fit[2])
        _write_table(
            out / "plotdata.tsv",
            ["log_hbar", "log_residual"],
            [[float(np.log(h)), float(np.log(r)) if r > 0 else float("-inf")] for h, r in zip(fit.hbar, rem)],
            delimiter="\t",
        )
    else:
        _write_table(out / "plotdata.tsv", ["log_hbar", "log_residual"], [], delimiter="\t")
    report["checks"] = checks
    report["pass"] = bool(fit is not None and not table.failed and all(c["pass"] for c in checks.values()))
    _write_json(out / "fit.json", report)
    return report["pass"]


def cmd_gauge_check(cfg: ScenarioConfig, out: Path):
    V = cfg.potential()
    A1 = cfg.gauge()
    other = cfg.options.get("other_gauge")
    if A1 is None or other is None:
        raise ConfigurationError("gauge-check needs 'gauge' and 'options.other_gauge'")
    A2 = cfg.gauge(other)
    rng = np.random.default_rng(cfg.seed)
    probe = rng.uniform(-3.0, 3.0, size=(V.dim, 64))
    if not same_field(A1, A2, probe):
        raise ConfigurationError("the two gauges have different magnetic fields")
    policy = cfg.policy()
    E_cap = float(cfg.data["E_cap"])
    g = cfg.test_function()
    tol = cfg.tolerances
    rows, worst = [], {"eigenvalues": 0.0, "trace": 0.0, "conjugation": 0.0}
    for hb in cfg.hbar:
        grid = policy.grid(V, hb, E_cap)
        H1 = build_hamiltonian(V, A1, hb, grid)
        H2 = build_hamiltonian(V, A2, hb, grid)
        s1, s2 = eigensolve(H1, E_cap), eigensolve(H2, E_cap)
        n = min(len(s1), len(s2))
        gap = float(np.max(np.abs(s1.eigenvalues[:n] - s2.eigenvalues[:n]) / np.abs(s1.eigenvalues[:n]), initial=0.0))
        if len(s1) != len(s2):
            gap = float("inf")
        t1, t2 = trace_g(s1, g), trace_g(s2, g)
        tgap = abs(t1 - t2) / max(abs(t1), 1e-300)
        conj = gauge_conjugate(H1, connecting_gauge(A1, A2))
        cgap = float(abs(conj.data - H2.data).max()) if (conj.data - H2.data).nnz else 0.0
        rows.append([hb, grid.N, len(s1), gap, tgap, cgap])
        worst["eigenvalues"] = max(worst["eigenvalues"], gap)
        worst["trace"] = max(worst["trace"], tgap)
        worst["conjugation"] = max(worst["conjugation"], cgap)
        if cfg.options.get("dump_matrices"):
            dump_matrix(out / f"H_{hb!r}_a.bin", H1)
            dump_matrix(out / f"H_{hb!r}_b.bin", H2)
    _write_table(out / "gauge.csv", ["hbar", "grid_N", "n_eigs", "eig_rel_gap", "trace_rel_gap", "conj_max_gap"], rows)
    checks = {k: _check(v, float(tol.get(k, 1e-9))) for k, v in worst.items()}
    ok = all(c["pass"] for c in checks.values())
    _write_json(out / "gauge.json", {"scenario": cfg.name, "seed": cfg.seed, "checks": checks, "pass": ok})
    return ok


def moyal_symbols(dim, amplitude_width=1.5, symbol_width=1.0):
    """The two Gaussian symbols composed by ``moyal-check``."""
    x = sp.symbols("x1 x2")[:dim]
    w2 = 2.0 * amplitude_width**2
    shift_a = [0.2] + [0.0] * (dim - 1)
    shift_b = [0.0] + [0.3] * (dim - 1)
    ra = sum((xi - s) ** 2 for xi, s in zip(x, shift_a))
    rb = sum((xi - s) ** 2 for xi, s in zip(x, shift_b))
    amp_a = ExprField(dim, sp.exp(-ra / w2))
    amp_b = ExprField(dim, (1 + 0.3 * x[0]) * sp.exp(-rb / w2))
    ca = [0.3] + [-0.2] * (dim - 1)
    cb = [-0.1] + [0.25] * (dim - 1)
    a = GaussPolySymbol(PolySymbol.constant(dim, amp_a), ca, symbol_width)
    b = GaussPolySymbol(PolySymbol.constant(dim, amp_b), cb, symbol_width)
    return a, b


def cmd_moyal_check(cfg: ScenarioConfig, out: Path):
    V = cfg.potential()
    A = cfg.gauge()
    opts, tol = cfg.options, cfg.tolerances
    if opts.get("constant_symbols"):
        a = PolySymbol.constant(V.dim, 2.0)
        b = PolySymbol.constant(V.dim, -0.5)
    else:
        a, b = moyal_symbols(V.dim, float(opts.get("amplitude_width", 1.5)), float(opts.get("symbol_width", 1.0)))
    rep = composition_error(a, b, A, cfg.hbar, box=float(opts.get("box", 2.0)))
    _write_table(
        out / "moyal.csv",
        ["hbar", "grid_N", "error_c0", "error_c1", "error_c2"],
        [[h, n, e0, e1, e2] for h, n, e0, e1, e2 in zip(rep.hbar, rep.grid_N, rep.errors[0], rep.errors[1], rep.errors[2])],
    )
    if opts.get("constant_symbols"):
        checks = {"zero_error": _check(max(rep.errors[2]), 1e-12)}
    else:
        checks = {
            "slope": _check(rep.slopes[2], float(tol.get("slope", 2.5)), "min"),
            "slope_without_c2": _check(rep.slopes[1], float(tol.get("slope_without_c2", 2.3))),
        }
    ok = all(c["pass"] for c in checks.values())
    _write_json(out / "moyal.json", {"scenario": cfg.name, "seed": cfg.seed, "slopes": rep.slopes, "checks": checks, "pass": ok})
    return ok


def cmd_hs_check(cfg: ScenarioConfig, out: Path):
    V = cfg.potential()
    A = cfg.gauge()
    g = cfg.test_function()
    opts, tol = cfg.options, cfg.tolerances
    E_cap = float(cfg.data["E_cap"])
    rows, worst = [], 0.0
    for hb in cfg.hbar:
        grid = cfg.policy().grid(V, hb, E_cap)
        H = build_hamiltonian(V, A, hb, grid)
        sdata = eigensolve(H, E_cap, vectors=True)
        G = spectral_apply(sdata, g)
        ext = AlmostAnalyticExtension(g, int(opts.get("order", 3)), float(opts.get("mu_cut", 1.0)))
        eps = tuple(float(e) for e in opts.get("eps", (0.02, 0.01, 0.005)))
        Gx, per = hs_apply_extrapolated(H, ext, eps)
        ref = max(np.linalg.norm(G), 1e-300)
        dists = [float(np.linalg.norm(P - G) / ref) for P in per]
        final = float(np.linalg.norm(Gx - G) / ref)
        if np.linalg.norm(G) == 0:
            final = float(np.linalg.norm(Gx))
        for e, d in zip(eps, dists):
            rows.append([hb, e, d])
        rows.append([hb, 0.0, final])
        worst = max(worst, final)
    _write_table(out / "hs.csv", ["hbar", "eps", "rel_frobenius"], rows)
    checks = {"frobenius": _check(worst, float(tol.get("frobenius", 1e-3)))}
    ok = checks["frobenius"]["pass"]
    _write_json(out / "hs.json", {"scenario": cfg.name, "seed": cfg.seed, "checks": checks, "pass": ok})
    return ok


def cmd_agmon_check(cfg: ScenarioConfig, out: Path):
    V = cfg.potential()
    A = cfg.gauge()
    g = cfg.test_function()
    opts, tol = cfg.options, cfg.tolerances
    policy = cfg.policy()
    rep = agmon_compare(
        V, A, float(opts.get("E", 1.0)), g, cfg.hbar, ceiling=opts.get("ceiling"), order=policy.order,
        grid_tol=policy.tol, max_points=policy.max_points,
    )
    _write_table(out / "agmon.csv", ["hbar", "delta", "trace"], [[h, d, t] for h, d, t in zip(rep.hbar, rep.delta, rep.trace)])
    power = float(opts.get("decay_power", 6))
    hb = np.asarray(rep.hbar)
    dl = np.asarray(rep.delta)
    order = np.argsort(-hb)
    hb, dl = hb[order], dl[order]
    ratios = [float(dl[i + 1] / dl[i]) if dl[i] > 0 else float("nan") for i in range(len(hb) - 1)]
    limits = [float((hb[i + 1] / hb[i]) ** power) for i in range(len(hb) - 1)]
    ref = float(opts.get("reference_hbar", hb[-1]))
    checks = {}
    # decay is judged from the reference hbar downwards
    judged = [r / l for i, (r, l) in enumerate(zip(ratios, limits)) if hb[i] <= ref + 1e-12]
    if judged:
        checks["decay"] = _check(max(judged), 1.0)
    at = [d for h, d in zip(hb, dl) if abs(h - ref) <= 1e-12]
    if at:
        checks["delta"] = _check(at[0], float(tol.get("delta", 1e-6)))
    ok = bool(checks) and all(c["pass"] for c in checks.values())
    _write_json(
        out / "agmon.json",
        {"scenario": cfg.name, "seed": cfg.seed, "slope_in_inverse_hbar": rep.slope, "ratios": ratios,
         "ratio_limits": limits, "plateau": rep.plateau, "checks": checks, "pass": ok},
    )
    return ok


COMMANDS = {
    "trace-sweep": cmd_trace_sweep,
    "gauge-check": cmd_gauge_check,
    "moyal-check": cmd_moyal_check,
    "hs-check": cmd_hs_check,
    "agmon-check": cmd_agmon_check,
}


def _parser():
    p = argparse.ArgumentParser(prog="magtrace", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--seed", type=int, default=None, help="seed for randomized checks (overrides the config)")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        data, _ = load_config(args.config)
        if args.seed is not None:
            data["seed"] = args.seed
        cfg = resolve(data)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ok = COMMANDS[args.command](cfg, out)
    except (ConfigurationError, CapabilityError) as exc:
        print(f"magtrace: configuration error: {exc}", file=sys.stderr)
        if isinstance(exc, ConfigurationError) and "unknown scenario" in str(exc):
            for name in sorted(REGISTRY):
                print(f"  {name}: {REGISTRY[name]['description']}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        print(f"magtrace: check could not run: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"magtrace {args.command}: {'PASS' if ok else 'FAIL'} ({args.out})")
    return EXIT_PASS if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
