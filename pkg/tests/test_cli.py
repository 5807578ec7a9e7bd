import csv
import json

import pytest

from magtrace.cli import COMMANDS, load_config, main
from magtrace.errors import ConfigurationError
from magtrace.scenarios import REGISTRY, resolve


def _write(tmp_path, text, name="cfg.json"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_every_scenario_resolves():
    for name in REGISTRY:
        cfg = resolve({"scenario": name})
        cfg.potential()
        cfg.test_function()
        cfg.policy()


def test_override_merges_nested():
    cfg = resolve({"scenario": "hs1d", "grid": {"N": 64}, "tolerances": {"frobenius": 0.5}})
    assert cfg.policy().N == 64
    assert cfg.policy().L == 4.0
    assert cfg.tolerances["frobenius"] == 0.5


def test_schema_error_points_at_line(tmp_path):
    p = _write(tmp_path, '{\n  "scenario": "hs1d",\n  "grid": {\n    "order": 3\n  }\n}\n')
    with pytest.raises(ConfigurationError, match=r"cfg.json:4: at grid/order"):
        load_config(p)


def test_invalid_json_reports_position(tmp_path):
    p = _write(tmp_path, '{\n  "scenario": "hs1d",\n}\n')
    with pytest.raises(ConfigurationError, match=r"cfg.json:3:"):
        load_config(p)


def test_unknown_scenario_exit_code(tmp_path, capsys):
    p = _write(tmp_path, '{"scenario": "nope"}')
    assert main(["hs-check", "--config", str(p), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    for name in REGISTRY:
        assert name in err


def test_unknown_key_exit_code(tmp_path):
    p = _write(tmp_path, '{"scenario": "hs1d", "colour": 1}')
    assert main(["hs-check", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_commands_registered():
    assert set(COMMANDS) == {"trace-sweep", "gauge-check", "moyal-check", "hs-check", "agmon-check"}


def test_gauge_check_end_to_end(tmp_path):
    p = _write(tmp_path, '{"scenario": "gauge2d", "options": {"dump_matrices": true}}')
    out = tmp_path / "out"
    assert main(["gauge-check", "--config", str(p), "--out", str(out), "--seed", "7"]) == 0
    rep = json.loads((out / "gauge.json").read_text())
    assert rep["pass"] and rep["seed"] == 7
    assert rep["checks"]["conjugation"]["value"] <= 1e-10
    assert len(list(out.glob("H_*.bin"))) == 2


def test_gauge_check_rejects_different_fields(tmp_path):
    p = _write(tmp_path, '{"scenario": "gauge2d", "options": {"other_gauge": {"family": "symmetric", "params": {"b": 2.0}}}}')
    assert main(["gauge-check", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_trace_sweep_outputs(tmp_path):
    cfg = {
        "scenario": "harmonic1d",
        "hbar": [0.2, 0.15, 0.1, 0.075],
        "g": {"center": 1.5, "half_width": 1.2},
        "E_cap": 3.0,
        "grid": {"order": 8},
        "tolerances": {"T0": 1e-3, "T2_abs": 1e-2},
    }
    p = _write(tmp_path, json.dumps(cfg))
    out = tmp_path / "o"
    code = main(["trace-sweep", "--config", str(p), "--out", str(out)])
    rep = json.loads((out / "fit.json").read_text())
    assert code == (0 if rep["pass"] else 1)
    assert rep["checks"]["T0"]["pass"]
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["hbar"]) for r in rows] == [0.2, 0.15, 0.1, 0.075]
    # floats are written with full precision
    assert all(len(r["value"]) > 12 for r in rows)
    lines = (out / "plotdata.tsv").read_text().splitlines()
    assert lines[0] == "log_hbar\tlog_residual"
    assert len(lines) == 5


def test_agmon_check_outputs(tmp_path):
    p = _write(tmp_path, '{"scenario": "agmon1d"}')
    assert main(["agmon-check", "--config", str(p), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "agmon.json").read_text())
    assert rep["checks"]["delta"]["value"] <= 1e-6
    assert rep["plateau"] == pytest.approx(13.0 / 6.0)


def test_moyal_check_constant_symbols(tmp_path):
    p = _write(tmp_path, '{"scenario": "moyal2d", "hbar": [0.4, 0.3], "options": {"constant_symbols": true}}')
    assert main(["moyal-check", "--config", str(p), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "moyal.csv").exists()


def test_missing_config_file(tmp_path):
    assert main(["hs-check", "--config", str(tmp_path / "none.json")]) == 2
