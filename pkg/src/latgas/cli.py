"""Command-line front end.

Runs are described by a key = value config file (one key per line, ``#``
comments); the subcommand selects the workflow and a few flags can
override file keys, so a config file is a complete, reproducible record
of an experiment.  Results are emitted as CSV or JSON with numbers at 17
significant digits; identical inputs produce byte-identical output.

Exit codes: 0 success, 1 verification failure, 2 invalid config or model.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

from . import exact, models
from .lattice import validate_model
from .measure import default_workers, run_ensemble
from .simulate import RunControl

MODES = ("simulate", "exact", "verify-law", "profile", "ising-tau", "scan")
MODELS = ("ising", "tasep", "custom-table")

LAW_COLUMNS = [
    "mode",
    "model",
    "params",
    "rho",
    "phi",
    "tau",
    "rho_hat",
    "phi_hat",
    "tau_hat",
    "stderr_tau",
    "n_jumps",
    "seed",
    "verdict",
    "tau_closed",
]


class ConfigError(Exception):
    """Invalid run configuration; ``errors`` lists one message per problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    """A fully validated run description."""

    model: str = ""
    mode: str = ""
    L: int | None = None
    alpha: float | None = None
    beta: float | None = None
    V: float = 0.0
    mu: float = 0.0
    alpha_00: float = 1.0
    alpha_10: float = 1.0
    alpha_01: float = 1.0
    alpha_11: float = 1.0
    kawasaki_scale: float = 1.0
    table: str | None = None
    max_jumps: int | None = None
    max_time: float | None = None
    seed: int = 0
    replicas: int = 8
    drain: bool = True
    out: str | None = None
    format: str = "csv"
    scan_L: list = field(default_factory=list)


def _parse_bool(raw):
    low = raw.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_int_list(raw):
    return [int(part) for part in raw.split(",") if part.strip()]


_PARSERS = {
    "model": str,
    "mode": str,
    "L": int,
    "alpha": float,
    "beta": float,
    "V": float,
    "mu": float,
    "alpha_00": float,
    "alpha_10": float,
    "alpha_01": float,
    "alpha_11": float,
    "kawasaki_scale": float,
    "table": str,
    "max_jumps": int,
    "max_time": float,
    "seed": int,
    "replicas": int,
    "drain": _parse_bool,
    "out": str,
    "format": str,
    "scan_L": _parse_int_list,
}

_POSITIVE = (
    "alpha",
    "beta",
    "alpha_00",
    "alpha_10",
    "alpha_01",
    "alpha_11",
    "kawasaki_scale",
    "max_time",
)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a key = value config document.

    Raises ConfigError carrying every schema problem found, each message
    prefixed with the offending line number.
    """
    errors = []
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _PARSERS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = _PARSERS[key](value)
        except ValueError:
            errors.append(f"line {lineno}: invalid value for {key}: {value!r}")
            continue
        lines[key] = lineno

    def where(key):
        return f"line {lines[key]}" if key in lines else "config"

    for key in _POSITIVE:
        if values.get(key) is not None and values[key] <= 0:
            errors.append(f"{where(key)}: {key} must be > 0, got {values[key]}")
    for key in ("L", "max_jumps", "replicas"):
        if values.get(key) is not None and values[key] < 1:
            errors.append(f"{where(key)}: {key} must be >= 1, got {values[key]}")
    if values.get("seed") is not None and values["seed"] < 0:
        errors.append(f"{where('seed')}: seed must be >= 0")

    model = values.get("model")
    if model is None:
        errors.append("config: missing required key 'model'")
    elif model not in MODELS:
        errors.append(f"{where('model')}: unknown model {model!r}; choose from {MODELS}")
    mode = values.get("mode")
    if mode is not None and mode not in MODES:
        errors.append(f"{where('mode')}: unknown mode {mode!r}; choose from {MODES}")
    fmt = values.get("format")
    if fmt is not None and fmt not in ("csv", "json"):
        errors.append(f"{where('format')}: format must be csv or json")

    if model == "tasep":
        for key in ("L", "alpha", "beta"):
            if values.get(key) is None:
                errors.append(f"config: tasep requires key {key!r}")
    elif model == "ising":
        if values.get("L") is None:
            errors.append("config: ising requires key 'L'")
    elif model == "custom-table":
        if values.get("table") is None:
            errors.append("config: custom-table requires key 'table'")

    if values.get("max_jumps") is not None and values.get("max_time") is not None:
        errors.append("config: set at most one of max_jumps / max_time")

    if errors:
        raise ConfigError(errors)
    cfg = RunConfig()
    for key, value in values.items():
        setattr(cfg, key, value)
    return cfg


# ---------------------------------------------------------------------------
# model construction and reporting
# ---------------------------------------------------------------------------


def build_model(cfg: RunConfig):
    if cfg.model == "tasep":
        return models.tasep_model(models.TasepParams(cfg.L, cfg.alpha, cfg.beta))
    if cfg.model == "ising":
        return models.ising_model(
            models.IsingParams(
                cfg.L,
                cfg.V,
                cfg.mu,
                cfg.alpha_00,
                cfg.alpha_10,
                cfg.alpha_01,
                cfg.alpha_11,
                cfg.kawasaki_scale,
            )
        )
    if cfg.model == "custom-table":
        with open(cfg.table, encoding="utf-8") as fh:
            return models.TableModel.from_dict(json.load(fh))
    raise ConfigError([f"unknown model {cfg.model!r}"])


def _params_string(cfg: RunConfig) -> str:
    if cfg.model == "tasep":
        parts = [("L", cfg.L), ("alpha", cfg.alpha), ("beta", cfg.beta)]
    elif cfg.model == "ising":
        parts = [
            ("L", cfg.L),
            ("V", cfg.V),
            ("mu", cfg.mu),
            ("alpha_00", cfg.alpha_00),
            ("alpha_10", cfg.alpha_10),
            ("alpha_01", cfg.alpha_01),
            ("alpha_11", cfg.alpha_11),
            ("kawasaki_scale", cfg.kawasaki_scale),
        ]
    else:
        parts = [("table", cfg.table)]
    return ";".join(f"{k}={_fmt(v)}" for k, v in parts)


def _fmt(value) -> str:
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


@dataclass
class Report:
    columns: list
    rows: list


def render(report: Report, fmt: str) -> str:
    """Render a report as CSV or JSON text (deterministic for equal input)."""
    if fmt == "csv":
        lines = [",".join(report.columns)]
        for row in report.rows:
            lines.append(",".join(_fmt(row.get(c)) for c in report.columns))
        return "\n".join(lines) + "\n"
    if fmt == "json":
        out = []
        for row in report.rows:
            items = []
            for c in report.columns:
                v = row.get(c)
                if v is None:
                    items.append(f'"{c}": null')
                elif isinstance(v, bool):
                    items.append(f'"{c}": {str(v).lower()}')
                elif isinstance(v, float):
                    items.append(f'"{c}": {v:.17g}')
                elif isinstance(v, int):
                    items.append(f'"{c}": {v}')
                else:
                    items.append(f'"{c}": {json.dumps(v)}')
            out.append("    {" + ", ".join(items) + "}")
        body = ",\n".join(out)
        return '{\n  "rows": [\n' + body + "\n  ]\n}\n"
    raise ConfigError([f"unknown format {fmt!r}"])


def emit_results(report: Report, fmt: str, path: str | None) -> str:
    """Serialize a report and write it to ``path`` (or stdout when None)."""
    text = render(report, fmt)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# workflows
# ---------------------------------------------------------------------------


def _control(cfg: RunConfig) -> RunControl:
    max_jumps, max_time = cfg.max_jumps, cfg.max_time
    if max_jumps is None and max_time is None:
        max_jumps = 100_000
    return RunControl(
        max_jumps=max_jumps, max_time=max_time, drain=cfg.drain, seed=cfg.seed
    )


def _validated_model(cfg: RunConfig):
    model = build_model(cfg)
    report = validate_model(model)
    if not report.ok:
        raise ConfigError(["model failed validation: " + report.summary()])
    return model


def _law_row(cfg: RunConfig, **kw) -> dict:
    row = {c: None for c in LAW_COLUMNS}
    row["mode"] = cfg.mode
    row["model"] = cfg.model
    row["params"] = _params_string(cfg)
    row["seed"] = cfg.seed
    row.update(kw)
    return row


def _closed_form_tau(cfg: RunConfig):
    if cfg.model == "ising":
        return models.ising_tau_exact(
            models.IsingParams(
                cfg.L,
                cfg.V,
                cfg.mu,
                cfg.alpha_00,
                cfg.alpha_10,
                cfg.alpha_01,
                cfg.alpha_11,
                cfg.kawasaki_scale,
            )
        ).tau
    if cfg.model == "tasep":
        return models.tasep_tau_exact(models.TasepParams(cfg.L, cfg.alpha, cfg.beta))
    return None


def run_simulate(cfg: RunConfig, workers=None) -> Report:
    model = _validated_model(cfg)
    ens = run_ensemble(model, _control(cfg), cfg.replicas, workers=workers)
    pooled = ens.pooled
    row = _law_row(
        cfg,
        rho_hat=pooled.rho_hat,
        phi_hat=pooled.phi_hat,
        tau_hat=pooled.tau_hat,
        stderr_tau=pooled.stderr_tau,
        n_jumps=sum(s.n_jumps for s in ens.summaries),
    )
    return Report(LAW_COLUMNS, [row])


def run_exact(cfg: RunConfig) -> Report:
    model = _validated_model(cfg)
    sol = exact.exact_law(model)
    row = _law_row(
        cfg,
        rho=sol.rho,
        phi=sol.phi,
        tau=sol.tau,
        tau_closed=_closed_form_tau(cfg),
    )
    return Report(LAW_COLUMNS, [row])


def run_verify_law(cfg: RunConfig, workers=None) -> Report:
    """Exact law vs drained simulation, with a 3-standard-error verdict on tau."""
    model = _validated_model(cfg)
    sol = exact.exact_law(model)
    ens = run_ensemble(model, _control(cfg), cfg.replicas, workers=workers)
    pooled = ens.pooled
    ok = not math.isnan(pooled.stderr_tau) and (
        abs(pooled.tau_hat - sol.tau) <= 3.0 * pooled.stderr_tau
    )
    row = _law_row(
        cfg,
        rho=sol.rho,
        phi=sol.phi,
        tau=sol.tau,
        rho_hat=pooled.rho_hat,
        phi_hat=pooled.phi_hat,
        tau_hat=pooled.tau_hat,
        stderr_tau=pooled.stderr_tau,
        n_jumps=sum(s.n_jumps for s in ens.summaries),
        verdict="pass" if ok else "fail",
        tau_closed=_closed_form_tau(cfg),
    )
    return Report(LAW_COLUMNS, [row])


def run_profile(cfg: RunConfig) -> Report:
    if cfg.model != "tasep":
        raise ConfigError(["profile mode requires model = tasep"])
    params = models.TasepParams(cfg.L, cfg.alpha, cfg.beta)
    dens = models.tasep_density(params)
    rows = [
        {"mode": "profile", "model": "tasep", "params": _params_string(cfg),
         "site": x + 1, "density": float(d)}
        for x, d in enumerate(dens)
    ]
    return Report(["mode", "model", "params", "site", "density"], rows)


def run_ising_tau(cfg: RunConfig) -> Report:
    if cfg.model != "ising":
        raise ConfigError(["ising-tau mode requires model = ising"])
    sol = models.ising_tau_exact(
        models.IsingParams(
            cfg.L,
            cfg.V,
            cfg.mu,
            cfg.alpha_00,
            cfg.alpha_10,
            cfg.alpha_01,
            cfg.alpha_11,
            cfg.kawasaki_scale,
        )
    )
    row = {
        "mode": "ising-tau",
        "model": "ising",
        "params": _params_string(cfg),
        "tau": sol.tau,
        "t_plus": sol.t_plus,
        "t_minus": sol.t_minus,
        "r_plus": sol.r_plus,
        "r_minus": sol.r_minus,
    }
    return Report(
        ["mode", "model", "params", "tau", "t_plus", "t_minus", "r_plus", "r_minus"],
        [row],
    )


def run_scan(cfg: RunConfig) -> Report:
    if cfg.model != "tasep":
        raise ConfigError(["scan mode requires model = tasep"])
    if not cfg.scan_L:
        raise ConfigError(["scan mode requires key 'scan_L' (comma-separated sizes)"])
    rows = []
    r = models.tasep_r_coefficient(cfg.alpha, cfg.beta)
    for L in cfg.scan_L:
        if L < 2:
            raise ConfigError([f"scan_L entries must be >= 2, got {L}"])
        tau = models.tasep_tau_exact(models.TasepParams(L, cfg.alpha, cfg.beta))
        rows.append(
            {
                "mode": "scan",
                "model": "tasep",
                "params": _params_string(cfg),
                "L": L,
                "tau": tau,
                "tau_over_L": tau / L,
                "r_coeff": r,
            }
        )
    return Report(
        ["mode", "model", "params", "L", "tau", "tau_over_L", "r_coeff"], rows
    )


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_argparser():
    parser = argparse.ArgumentParser(
        prog="latgas",
        description="Lattice-gas simulation, residence-time tracking, and exact checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in [
        ("simulate", "run trajectories and report the sample-path estimators"),
        ("exact", "dense small-lattice solve of rho, phi, tau"),
        ("verify-law", "compare simulation against the exact law rho = phi tau"),
        ("profile", "closed-form density profile of the exclusion process"),
        ("ising-tau", "closed-form residence time of the Ising ring gas"),
        ("scan", "tau / L versus the asymptotic coefficient over a size grid"),
    ]:
        p = sub.add_parser(name, help=doc)
        p.add_argument("config", help="path to a key = value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--replicas", type=int, help="override the replica count")
        p.add_argument("--jumps", type=int, help="override max_jumps")
        p.add_argument("--time", type=float, help="override max_time")
        p.add_argument("--out", help="override the output path")
        p.add_argument("--format", choices=("csv", "json"), help="override the format")
        p.add_argument(
            "--workers",
            type=int,
            help="replica processes (default: LATGAS_WORKERS or 1)",
        )
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    cfg.mode = args.command
    if args.seed is not None:
        cfg.seed = args.seed
    if args.replicas is not None:
        cfg.replicas = args.replicas
    if args.jumps is not None:
        cfg.max_jumps, cfg.max_time = args.jumps, None
    if args.time is not None:
        cfg.max_time, cfg.max_jumps = args.time, None
    if args.out is not None:
        cfg.out = args.out
    if args.format is not None:
        cfg.format = args.format
    return cfg


def main(argv=None) -> int:
    args = _build_argparser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        print(f"latgas: cannot read config: {err}", file=sys.stderr)
        return 2
    workers = args.workers if args.workers is not None else default_workers()
    try:
        cfg = _apply_overrides(parse_config(text), args)
        if cfg.mode == "simulate":
            report = run_simulate(cfg, workers=workers)
        elif cfg.mode == "exact":
            report = run_exact(cfg)
        elif cfg.mode == "verify-law":
            report = run_verify_law(cfg, workers=workers)
        elif cfg.mode == "profile":
            report = run_profile(cfg)
        elif cfg.mode == "ising-tau":
            report = run_ising_tau(cfg)
        else:
            report = run_scan(cfg)
        emit_results(report, cfg.format, cfg.out)
    except ConfigError as err:
        for msg in err.errors:
            print(f"latgas: {msg}", file=sys.stderr)
        return 2
    except (ValueError, OSError, exact.StateSpaceCapError) as err:
        print(f"latgas: {err}", file=sys.stderr)
        return 2
    if cfg.mode == "verify-law" and report.rows[0]["verdict"] != "pass":
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
