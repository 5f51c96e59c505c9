import importlib.util
import sys
from pathlib import Path

SCRIPTS = Path(__file__).resolve().parents[1] / "scripts"


def _load(name):
    spec = importlib.util.spec_from_file_location(name, SCRIPTS / f"{name}.py")
    mod = importlib.util.module_from_spec(spec)
    sys.modules[name] = mod
    spec.loader.exec_module(mod)
    return mod


def test_records_grid():
    mod = _load("records_grid")
    rows = mod.run(mod.RecordsGridConfig(ns=(25,)))
    assert len(rows) == 3 and all(r["ratio"] <= 1 for r in rows)


def test_magic_factors():
    mod = _load("magic_factors")
    res = mod.run(mod.MagicFactorConfig(lams=(2.0,), probes=5))
    assert res and all(r.violations == 0 for r in res)
