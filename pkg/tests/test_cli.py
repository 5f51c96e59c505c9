import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steinpert.cli import CONFIG_SCHEMA, ConfigError, ExperimentConfig, main, run
from steinpert.models import markov_indicator_table

ROOT = Path(__file__).resolve().parents[1]


def _write(tmp_path, obj, name="config.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return p


def _run(tmp_path, obj, *extra):
    cfg = _write(tmp_path, obj)
    out = tmp_path / "out.csv"
    code = main(["--config", str(cfg), "--output", str(out), *extra])
    return code, out


def _rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_schema_shipped_in_docs():
    assert json.loads((ROOT / "docs" / "config.schema.json").read_text()) == CONFIG_SCHEMA


def test_print_schema(capsys):
    assert main(["--print-schema"]) == 0
    assert json.loads(capsys.readouterr().out) == CONFIG_SCHEMA


def test_records(tmp_path):
    code, out = _run(tmp_path, {"command": "records", "parameters": {"n": [200, 50, 100], "s": 4}})
    assert code == 0
    rows = _rows(out)
    assert [r["n"] for r in rows[::3]] == ["50", "100", "200"]
    assert all(0 < float(r["ratio"]) <= 1 for r in rows)


def test_gamma_unit_jumps(tmp_path):
    code, out = _run(tmp_path, {"command": "gamma", "parameters": {"lam": 3.0, "mu": {"1": 1.0}, "probes": 5}})
    assert code == 0
    for r in _rows(out):
        assert float(r["gamma_upper"]) == 0.0 and float(r["gamma_empirical"]) == 0.0
        assert r["contraction_ok"] == "true"


def test_bp_verify(tmp_path):
    table = markov_indicator_table(0.1, 0.6, 5).tolist()
    code, out = _run(tmp_path, {"command": "bp-verify", "parameters": {"model": {"n": 5, "probs": table}}})
    assert code == 0
    rows = _rows(out)
    assert all(float(r["eta1_minimal"]) <= float(r["eta1_independent"]) for r in rows)


def test_bp_verify_theta_too_large(tmp_path):
    table = markov_indicator_table(0.3, 0.6, 4).tolist()
    code, out = _run(tmp_path, {"command": "bp-verify", "parameters": {"model": {"n": 4, "probs": table}}})
    assert code == 2 and not out.exists()


def test_markov_jump_json(tmp_path):
    cfg = {"command": "markov-jump", "parameters": {"N": [25], "z": 0.2, "alpha": 1.0}}
    code, out = _run(tmp_path, cfg, "--format", "json")
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["command"] == "markov-jump"
    checked = [r for r in doc["rows"] if r["holds"] is not None]
    assert len(checked) == 4 and all(r["holds"] for r in checked)


def test_normal_appendix(tmp_path):
    cfg = {"command": "normal-appendix", "parameters": {"psis": [0.25], "zs": [0.0], "lipschitz_probes": 1, "bounded_probes": 1}}
    code, out = _run(tmp_path, cfg)
    assert code == 0 and all(r["holds"] == "true" for r in _rows(out))


@pytest.mark.parametrize("text", ["{not json", json.dumps({"command": "records", "parameters": {"n": [50], "bogus": 1}}),
                                  json.dumps({"command": "nope"}), json.dumps({"command": "records", "extra": 1})])
def test_bad_config_exit_2(tmp_path, text):
    code, out = _run(tmp_path, text)
    assert code == 2 and not out.exists()
    assert not list(tmp_path.glob(".out.csv*"))


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "absent.json")]) == 2


def test_violation_exit_1(tmp_path, capsys):
    cfg = {"command": "stein-check", "parameters": {"lams": [1.0], "norms": ["sup"], "probes": 20, "bound_scale": 0.01}}
    code, out = _run(tmp_path, cfg)
    assert code == 1 and out.exists()
    assert "bound violated" in capsys.readouterr().err


def test_byte_identical_reruns(tmp_path):
    cfg = {"command": "gamma", "parameters": {"lam": 2.0, "mu": {"1": 0.8, "2": 0.2}, "probes": 30}, "seed": 9}
    a = _run(tmp_path, cfg)[1].read_bytes()
    b = _run(tmp_path, cfg)[1].read_bytes()
    assert a == b


def test_jobs_do_not_change_bytes(tmp_path):
    cfg = {"command": "stein-check", "parameters": {"lams": [0.5, 5.0], "norms": ["sup", "l1"], "probes": 10}}
    serial = _run(tmp_path, cfg)[1].read_bytes()
    parallel = _run(tmp_path, cfg, "--jobs", "2")[1].read_bytes()
    assert serial == parallel


def test_seed_flag_overrides_config():
    cfg = ExperimentConfig.from_obj({"command": "gamma", "parameters": {"lam": 1.0, "mu": {"1": 1.0}}, "seed": 3}, seed=5)
    assert cfg.seed == 5 and cfg.output_format == "csv"


def test_precondition_is_config_error():
    cfg = ExperimentConfig.from_obj({"command": "records", "parameters": {"n": [4]}})
    with pytest.raises(ConfigError):
        run(cfg)


@settings(max_examples=15)
@given(st.floats(0.05, 2.0))
def test_exit_code_contract(scale):
    obj = {"command": "gamma", "parameters": {"lam": 2.0, "mu": {"1": 0.8, "2": 0.2}, "probes": 20, "bound_scale": scale}}
    status, _, table = run(ExperimentConfig.from_obj(obj))
    expected = any(r["gamma_empirical"] > r["gamma_upper"] * scale * (1 + 1e-9) + 1e-12 for r in table.rows)
    assert status == (1 if expected else 0)


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, {"command": "gamma", "parameters": {"lam": 1.0, "mu": {"1": 1.0}, "probes": 2}})
    res = subprocess.run([sys.executable, "-m", "steinpert", "--config", str(cfg)], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("norm,gamma_upper")
