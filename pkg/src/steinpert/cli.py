"""Batch front-end: ``steinpert --config run.json [--output out.csv] ...``.

Exit status: 0 when every asserted bound holds, 1 when some bound is
violated (the offending rows go to stderr), 2 for configuration errors.
Nothing is written on exit 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import jsonschema

from .distances import MetricKind, distance
from .lattice import CompoundPoissonSpec, PreconditionError
from .models import (
    BernoulliSumModel,
    MarkovJumpModel,
    TruncationError,
    bp_approximation,
    bp_error_bounds,
    eta1_terms,
    exact_sum_pmf,
    markov_jump_equilibrium,
    records_experiment,
)
from .normal import bound_matrix
from .stein import NormKind, perturbation_report, stein_factor_sweep

COMMANDS = ("records", "bp-verify", "gamma", "stein-check", "normal-appendix", "markov-jump")

_scale = {"type": "number", "exclusiveMinimum": 0}
_norms = {"type": "array", "items": {"enum": [k.value for k in NormKind]}, "minItems": 1, "uniqueItems": True}


def _params(props: dict, required: Sequence[str] = ()) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props, "required": list(required)}


PARAMETER_SCHEMAS = {
    "records": _params(
        {
            "n": {"type": "array", "items": {"type": "integer", "minimum": 4}, "minItems": 1},
            "s": {"type": "integer", "minimum": 4},
            "metrics": {
                "type": "array",
                "items": {"enum": ["total_variation", "point", "wasserstein"]},
                "minItems": 1,
                "uniqueItems": True,
            },
            "L": {"type": "integer", "minimum": 1},
            "bound_scale": _scale,
        },
        ["n"],
    ),
    "bp-verify": _params(
        {
            "model": {
                "oneOf": [
                    {"type": "string"},
                    {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["n", "probs"],
                        "properties": {
                            "n": {"type": "integer", "minimum": 1, "maximum": 20},
                            "probs": {"type": "array", "items": {"type": "number", "minimum": 0}},
                        },
                    },
                ]
            },
            "bound_scale": _scale,
        },
        ["model"],
    ),
    "gamma": _params(
        {
            "lam": {"type": "number", "exclusiveMinimum": 0},
            "mu": {
                "type": "object",
                "patternProperties": {"^-?[1-9][0-9]*$": {"type": "number"}},
                "additionalProperties": False,
                "minProperties": 1,
            },
            "norms": _norms,
            "probes": {"type": "integer", "minimum": 1},
            "bound_scale": _scale,
        },
        ["lam", "mu"],
    ),
    "stein-check": _params(
        {
            "lams": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
            "norms": _norms,
            "probes": {"type": "integer", "minimum": 1},
            "bound_scale": _scale,
        },
        ["lams"],
    ),
    "normal-appendix": _params(
        {
            "psis": {"type": "array", "items": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}, "minItems": 1},
            "zs": {"type": "array", "items": {"type": "number"}},
            "lipschitz_probes": {"type": "integer", "minimum": 0},
            "bounded_probes": {"type": "integer", "minimum": 0},
            "bound_scale": _scale,
        },
        ["psis"],
    ),
    "markov-jump": _params(
        {
            "N": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
            "z": {"type": "number", "minimum": 0},
            "alpha": {"type": "number", "minimum": 0},
            "bound_scale": _scale,
        },
        ["N", "z", "alpha"],
    ),
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "steinpert experiment config",
    "type": "object",
    "additionalProperties": False,
    "required": ["command"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "parameters": {"type": "object"},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"path": {"type": "string"}, "format": {"enum": ["csv", "json"]}},
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    },
    "allOf": [
        {"if": {"properties": {"command": {"const": c}}}, "then": {"properties": {"parameters": s}}}
        for c, s in PARAMETER_SCHEMAS.items()
    ],
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    parameters: dict
    output_path: str | None
    output_format: str
    seed: int

    @classmethod
    def from_obj(cls, obj: Any, output: str | None = None, fmt: str | None = None, seed: int | None = None) -> "ExperimentConfig":
        try:
            jsonschema.validate(obj, CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            raise ConfigError(f"invalid config at {path}: {e.message}") from None
        out = obj.get("output", {})
        path = output if output is not None else out.get("path")
        if fmt is None:
            fmt = out.get("format") or ("json" if path and path.endswith(".json") else "csv")
        return cls(
            obj["command"],
            dict(obj.get("parameters", {})),
            path,
            fmt,
            int(seed if seed is not None else obj.get("seed", 0)),
        )


@dataclass
class Table:
    columns: list[str]
    rows: list[dict]
    key: list[str]

    def sort(self) -> None:
        self.rows.sort(key=lambda r: tuple(_sort_key(r[k]) for k in self.key))

    @property
    def violations(self) -> list[dict]:
        return [r for r in self.rows if r.get("holds") is False]


def _sort_key(v):
    return (0, v, "") if isinstance(v, (int, float)) else (1, 0, str(v))


def _holds(value: float, bound: float, scale: float) -> bool:
    return bool(value <= bound * scale * (1 + 1e-9) + 1e-12)


def _map(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# commands


def _records_cell(args) -> list[dict]:
    n, s, metrics, L, scale = args
    out = []
    for r in records_experiment(n, s, metrics, L):
        out.append(
            {"n": n, "metric": r.metric.value, "actual": r.actual, "bound": r.bound, "ratio": r.ratio,
             "holds": _holds(r.actual, r.bound, scale)}
        )
    return out


def run_records(p: dict, seed: int, jobs: int) -> Table:
    metrics = p.get("metrics", ["total_variation", "point", "wasserstein"])
    s = p.get("s", 4)
    for n in p["n"]:
        if n < s:
            raise ConfigError(f"n = {n} is below s = {s}")
    cells = [(n, s, metrics, p.get("L"), p.get("bound_scale", 1.0)) for n in sorted(set(p["n"]))]
    rows = [r for cell in _map(_records_cell, cells, jobs) for r in cell]
    return Table(["n", "metric", "actual", "bound", "ratio", "holds"], rows, ["n", "metric"])


def run_bp_verify(p: dict, seed: int, jobs: int) -> Table:
    try:
        model = BernoulliSumModel.from_json(p["model"])
    except (OSError, json.JSONDecodeError, ValueError) as e:
        raise ConfigError(f"cannot load joint table: {e}") from None
    scale = p.get("bound_scale", 1.0)
    e_ind, e_min = eta1_terms(model)
    bounds = bp_error_bounds(model, eta=e_ind)
    exact = exact_sum_pmf(model)
    approx = bp_approximation(model)
    rows = []
    for kind in (MetricKind.TOTAL_VARIATION, MetricKind.POINT, MetricKind.WASSERSTEIN):
        actual = distance(exact, approx, kind)
        b = bounds.for_metric(kind)
        rows.append(
            {"metric": kind.value, "actual": actual, "bound": b, "ratio": actual / b if b > 0 else math.inf,
             "eta1_independent": e_ind, "eta1_minimal": e_min, "theta1": bounds.theta1,
             "holds": _holds(actual, b, scale)}
        )
    cols = ["metric", "actual", "bound", "ratio", "eta1_independent", "eta1_minimal", "theta1", "holds"]
    return Table(cols, rows, ["metric"])


def run_gamma(p: dict, seed: int, jobs: int) -> Table:
    try:
        spec = CompoundPoissonSpec(p["lam"], {int(k): v for k, v in p["mu"].items()})
    except ValueError as e:
        raise ConfigError(str(e)) from None
    scale = p.get("bound_scale", 1.0)
    rows = []
    for nm in p.get("norms", [k.value for k in NormKind]):
        rep = perturbation_report(spec, nm, p.get("probes", 200), seed)
        rows.append(
            {"norm": rep.norm.value, "gamma_upper": rep.gamma_upper, "gamma_empirical": rep.gamma_empirical,
             "A": rep.A, "contraction_ok": rep.contraction_ok,
             "holds": _holds(rep.gamma_empirical, rep.gamma_upper, scale)}
        )
    return Table(["norm", "gamma_upper", "gamma_empirical", "A", "contraction_ok", "holds"], rows, ["norm"])


def _stein_cell(args) -> list[dict]:
    lam, nm, probes, seed, scale = args
    return [
        {"lam": r.lam, "norm": r.norm.value, "quantity": r.quantity, "probes": r.probes,
         "worst_ratio": r.worst_ratio, "violations": r.violations, "holds": r.violations == 0}
        for r in stein_factor_sweep(lam, nm, probes, seed, scale)
    ]


def run_stein_check(p: dict, seed: int, jobs: int) -> Table:
    norms = p.get("norms", [k.value for k in NormKind])
    cells = [(lam, nm, p.get("probes", 1000), seed, p.get("bound_scale", 1.0)) for lam in p["lams"] for nm in norms]
    rows = [r for c in _map(_stein_cell, cells, jobs) for r in c]
    cols = ["lam", "norm", "quantity", "probes", "worst_ratio", "violations", "holds"]
    return Table(cols, rows, ["lam", "norm", "quantity"])


def _normal_cell(args) -> list[dict]:
    psi, zs, nl, nb, seed, scale = args
    rows = []
    for i, rep in enumerate(bound_matrix((psi,), zs, nl, nb, seed)):
        for line in rep.lines:
            rows.append(
                {"psi": psi, "probe": i, "h": rep.label, "line": line.line, "estimate": line.estimate,
                 "bound": line.bound,
                 "holds": bool(line.estimate <= line.bound * scale * (1 + 1e-6) + line.slack)}
            )
        rows.append(
            {"psi": psi, "probe": i, "h": rep.label, "line": "ode residual", "estimate": rep.ode_residual,
             "bound": 1e-8, "holds": _holds(rep.ode_residual, 1e-8, scale)}
        )
    return rows


def run_normal_appendix(p: dict, seed: int, jobs: int) -> Table:
    cells = [
        (psi, tuple(p.get("zs", [-2.0, -1.0, 0.0, 1.0, 2.0])), p.get("lipschitz_probes", 5),
         p.get("bounded_probes", 5), seed, p.get("bound_scale", 1.0))
        for psi in sorted(set(p["psis"]))
    ]
    rows = [r for c in _map(_normal_cell, cells, jobs) for r in c]
    return Table(["psi", "probe", "h", "line", "estimate", "bound", "holds"], rows, ["psi", "probe", "line"])


def _markov_cell(args) -> list[dict]:
    N, z, alpha, scale = args
    m = MarkovJumpModel(N, z, alpha)
    eq = markov_jump_equilibrium(m)
    base = {"N": N, "z": z, "alpha": alpha}
    checks = [
        ("abs_E_w", abs(eq.mean_w), alpha * z),
        ("second_moment_w", eq.second_moment_w, m.second_moment_bound()),
        ("balance_residual", eq.balance_residual, 1e-10),
        ("top_mass", eq.top_mass, 1e-10),
    ]
    rows = [dict(base, quantity=q, value=v, bound=b, holds=_holds(v, b, scale)) for q, v, b in checks]
    for q, v in eq.d1_ingredients().items():
        rows.append(dict(base, quantity=q, value=v, bound=None, holds=None))
    rows.append(dict(base, quantity="truncation", value=eq.truncation, bound=None, holds=None))
    return rows


def run_markov_jump(p: dict, seed: int, jobs: int) -> Table:
    cells = [(N, p["z"], p["alpha"], p.get("bound_scale", 1.0)) for N in sorted(set(p["N"]))]
    rows = [r for c in _map(_markov_cell, cells, jobs) for r in c]
    return Table(["N", "z", "alpha", "quantity", "value", "bound", "holds"], rows, ["N", "quantity"])


RUNNERS = {
    "records": run_records,
    "bp-verify": run_bp_verify,
    "gamma": run_gamma,
    "stein-check": run_stein_check,
    "normal-appendix": run_normal_appendix,
    "markov-jump": run_markov_jump,
}


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not isinstance(v, bool):
        if math.isfinite(v):
            return float(f"{v:.12g}")
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def render(table: Table, command: str, fmt: str) -> str:
    if fmt == "json":
        rows = [{c: _json_value(r.get(c)) for c in table.columns} for r in table.rows]
        return json.dumps({"command": command, "columns": table.columns, "rows": rows}, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_fmt(r.get(c)) for c in table.columns])
    return buf.getvalue()


def _write_atomic(path: str, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(config: ExperimentConfig, jobs: int = 1) -> tuple[int, str, Table]:
    """Execute a validated config; returns (exit status, rendered text, table)."""
    try:
        table = RUNNERS[config.command](config.parameters, config.seed, jobs)
    except (PreconditionError, TruncationError) as e:
        raise ConfigError(str(e)) from None
    table.sort()
    text = render(table, config.command, config.output_format)
    return (1 if table.violations else 0), text, table


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="steinpert", description="Run a perturbation-bound experiment from a JSON config.")
    ap.add_argument("--config", help="path to the experiment config (JSON)")
    ap.add_argument("--output", help="output path; defaults to the config's output.path, else stdout")
    ap.add_argument("--format", choices=["csv", "json"], help="output format (default csv)")
    ap.add_argument("--seed", type=int, help="random seed for probe-based commands")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for grid cells")
    ap.add_argument("--print-schema", action="store_true", help="print the config JSON schema and exit")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    if args.print_schema:
        print(json.dumps(CONFIG_SCHEMA, indent=2))
        return 0
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        obj = json.loads(Path(args.config).read_text())
        config = ExperimentConfig.from_obj(obj, args.output, args.format, args.seed)
        status, text, table = run(config, args.jobs)
    except (OSError, json.JSONDecodeError, ConfigError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    if config.output_path:
        _write_atomic(config.output_path, text)
    else:
        sys.stdout.write(text)
    for r in table.violations:
        print("bound violated: " + ", ".join(f"{c}={_fmt(r.get(c))}" for c in table.columns), file=sys.stderr)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
