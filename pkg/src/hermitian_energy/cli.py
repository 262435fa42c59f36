"""Command-line front end.

Subcommands: ``verify`` (run the property suite), ``eval`` (one functional for
one scenario), ``converge`` (residual of a check against lattice size) and
``gauduchon`` (solve for the Gauduchon conformal factor).

Configuration is a YAML mapping; every field is optional::

    grid: {n: 16}
    metric: {family: all, amplitude: null, seed: 7, profile: sin}
    phi: {family: random, band: 3, amplitude: 0.05, seed: 11, normalize_sup: true, samples: 20}
    path: {kind: both, detour_seed: 101, Q: 24}
    tolerances: {identity_rel: 1.0e-9, positivity_margin: 1.0e-6}
    checks: all            # or a list of check names
    output: {format: json, path: null}   # null writes to stdout

``--set section.key=value`` overrides single fields (values are parsed as YAML).

Exit codes: 0 success, 1 failed checks, 2 configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import platform
import sys
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np
import scipy
import yaml

from . import __version__
from . import functionals as fn
from .grid import MAX_POINTS, MIN_POINTS
from .metrics import GauduchonSolveError, PROFILES, solve_gauduchon_factor
from .verify import (
    CHECK_NAMES,
    METRIC_FAMILIES,
    PHI_FAMILIES,
    Scenario,
    ScenarioError,
    convergence_study,
    run_suite,
)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

CSV_COLUMNS = ("check", "scenario", "lhs", "rhs", "residual", "tol", "pass")
CONVERGE_COLUMNS = ("n", "residual", "lhs", "rhs", "pass")


class ConfigError(ValueError):
    """Invalid configuration text or value."""


def _even_n(v):
    if v % 2 or not MIN_POINTS <= v <= MAX_POINTS:
        return f"must be an even integer in [{MIN_POINTS}, {MAX_POINTS}]"


def _choice(options):
    def check(v):
        if v not in options:
            return f"must be one of {', '.join(map(str, options))}"
    return check


def _range(lo, hi=None, lo_open=False):
    def check(v):
        if (v <= lo if lo_open else v < lo) or (hi is not None and v >= hi):
            bound = f"({lo}" if lo_open else f"[{lo}"
            return f"must lie in {bound}, {hi if hi is not None else 'inf'})"
    return check


_INT, _FLOAT, _BOOL, _STR = int, float, bool, str

# section -> key -> (type, default, validator, nullable)
SCHEMA = {
    "grid": {"n": (_INT, 16, _even_n, False)},
    "metric": {
        "family": (_STR, "all", _choice(("all",) + METRIC_FAMILIES), False),
        "amplitude": (_FLOAT, None, _range(0.0, 1.0), True),
        "seed": (_INT, 7, _range(0), False),
        "profile": (_STR, "sin", _choice(tuple(PROFILES)), False),
    },
    "phi": {
        "family": (_STR, "random", _choice(PHI_FAMILIES), False),
        "band": (_INT, 3, _range(0), False),
        "amplitude": (_FLOAT, 0.05, _range(0.0, 1.0), False),
        "seed": (_INT, 11, _range(0), False),
        "normalize_sup": (_BOOL, True, None, False),
        "samples": (_INT, 20, _range(1, 1001), False),
    },
    "path": {
        "kind": (_STR, "both", _choice(("linear", "poly", "trig", "both")), False),
        "detour_seed": (_INT, 101, _range(0), False),
        "Q": (_INT, fn.DEFAULT_NODES, _range(2, 201), False),
    },
    "tolerances": {
        "identity_rel": (_FLOAT, 1e-9, _range(0.0, 1.0, lo_open=True), False),
        "positivity_margin": (_FLOAT, 1e-6, _range(0.0, 1.0), False),
    },
    "output": {
        "format": (_STR, "json", _choice(("json", "csv")), False),
        "path": (_STR, None, None, True),
    },
}


@dataclass
class Config:
    data: dict

    def __getitem__(self, key):
        return self.data[key]

    def __eq__(self, other):
        return isinstance(other, Config) and self.data == other.data

    @property
    def checks(self) -> list[str]:
        c = self.data["checks"]
        return list(CHECK_NAMES) if c == "all" else list(c)

    def scenario(self, family: str | None = None) -> Scenario:
        d = self.data
        fam = family or d["metric"]["family"]
        if fam == "all":
            fam = "generic"
        return Scenario(
            n=d["grid"]["n"],
            metric_family=fam,
            metric_amplitude=d["metric"]["amplitude"],
            metric_seed=d["metric"]["seed"],
            metric_profile=d["metric"]["profile"],
            phi_family=d["phi"]["family"],
            phi_band=d["phi"]["band"],
            phi_amplitude=d["phi"]["amplitude"],
            phi_seed=d["phi"]["seed"],
            normalize_sup=d["phi"]["normalize_sup"],
            samples=d["phi"]["samples"],
            path_kind=d["path"]["kind"],
            detour_seed=d["path"]["detour_seed"],
            nodes=d["path"]["Q"],
            identity_rel=d["tolerances"]["identity_rel"],
            positivity_margin=d["tolerances"]["positivity_margin"],
        )

    def to_text(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=False)


def default_config() -> Config:
    data = {sec: {k: spec[1] for k, spec in keys.items()} for sec, keys in SCHEMA.items()}
    data["checks"] = "all"
    return Config(data)


def _coerce(where: str, spec, value):
    typ, _, validator, nullable = spec
    if value is None:
        if nullable:
            return None
        raise ConfigError(f"{where}: may not be null")
    if typ is _BOOL:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
    elif typ is _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
    elif typ is _FLOAT:
        if isinstance(value, str):
            # YAML 1.1 reads exponents without a decimal point ("1e-9") as strings
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{where}: must be finite")
    elif not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string, got {value!r}")
    if validator is not None:
        problem = validator(value)
        if problem:
            raise ConfigError(f"{where}: {problem}, got {value!r}")
    return value


def _validate_checks(value):
    if value == "all":
        return "all"
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list) or not value:
        raise ConfigError("checks: expected 'all' or a non-empty list of check names")
    for name in value:
        if name not in CHECK_NAMES:
            raise ConfigError(f"checks: unknown check {name!r}; known: {', '.join(CHECK_NAMES)}")
    return list(value)


def validate(raw: dict | None) -> Config:
    """Fill defaults into a parsed mapping and validate every field."""
    cfg = default_config()
    if raw is None:
        return cfg
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    for section, body in raw.items():
        if section == "checks":
            cfg.data["checks"] = _validate_checks(body)
            continue
        if section not in SCHEMA:
            raise ConfigError(f"unknown section {section!r}; known: {', '.join(list(SCHEMA) + ['checks'])}")
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"{section}: expected a mapping")
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise ConfigError(
                    f"{section}: unknown key {key!r}; known: {', '.join(SCHEMA[section])}"
                )
            cfg.data[section][key] = _coerce(f"{section}.{key}", SCHEMA[section][key], value)
    return cfg


def parse_config(text: str) -> Config:
    """Parse YAML config text; errors carry the line and column when available."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"config parse error: {where}{problem}") from None
    return validate(raw)


def apply_override(cfg: Config, assignment: str) -> Config:
    """Apply ``section.key=value`` (or ``checks=...``) and revalidate."""
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, text = assignment.split("=", 1)
    try:
        value = yaml.safe_load(text) if text else None
    except yaml.YAMLError:
        raise ConfigError(f"--set {key}: cannot parse value {text!r}") from None
    data = copy.deepcopy(cfg.data)
    parts = key.strip().split(".")
    if parts == ["checks"]:
        data["checks"] = value
    elif len(parts) == 2:
        section, field = parts
        if section not in data or not isinstance(data[section], dict):
            raise ConfigError(f"--set: unknown section {section!r}")
        data[section][field] = value
    else:
        raise ConfigError(f"--set: expected section.key, got {key!r}")
    return validate(data)


def load_config(path: str | None, overrides) -> Config:
    if path is None or path == "default":
        cfg = default_config()
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
        except UnicodeDecodeError:
            raise ConfigError(f"config {path!r} is not UTF-8 text") from None
        cfg = parse_config(text)
    for assignment in overrides or ():
        cfg = apply_override(cfg, assignment)
    return cfg


# --- output ---------------------------------------------------------------------


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        return _clean(value.item())
    return value


def versions() -> dict:
    return {
        "hermitian_energy": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def report_json(cfg: Config, rows: list[dict], extra: dict | None = None) -> str:
    meta = {
        "config": cfg.data,
        "versions": versions(),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        meta.update(extra)
    return json.dumps(_clean({"meta": meta, "results": rows}), indent=2, allow_nan=False) + "\n"


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def table_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _emit(cfg: Config, text: str):
    path = cfg["output"]["path"]
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# --- subcommands -----------------------------------------------------------------


def cmd_verify(cfg: Config, args) -> int:
    report = run_suite(cfg.scenario(), cfg.checks, family=cfg["metric"]["family"])
    rows = [r.row() for r in report.results]
    if cfg["output"]["format"] == "csv":
        _emit(cfg, table_csv(rows, CSV_COLUMNS))
    else:
        extra = {"aubin_yau_constants": report.constants}
        if args.timing:
            extra["timing"] = report.timing
        _emit(cfg, report_json(cfg, rows, extra))
    passed = len(rows) - report.failures
    print(f"{passed}/{len(rows)} checks passed", file=sys.stderr)
    for r in report.results:
        if not r.passed:
            reason = r.detail.get("error", f"residual {r.residual:.3e} > tol {r.tol:.1e}")
            print(f"FAIL {r.check} [{r.scenario}]: {reason}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_eval(cfg: Config, args) -> int:
    s = cfg.scenario()
    phi = s.potential(args.index)
    value = fn.evaluate(args.functional, s.metric(), phi)
    row = {"functional": args.functional, "scenario": s.fingerprint,
           "value": value.value, "imag_leak": value.imag_leak, "V": value.meta["V"]}
    if cfg["output"]["format"] == "csv":
        _emit(cfg, table_csv([row], tuple(row)))
    else:
        _emit(cfg, report_json(cfg, [row]))
    return EXIT_OK


def cmd_converge(cfg: Config, args) -> int:
    try:
        sizes = [int(x) for x in args.sizes.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--sizes: expected comma-separated integers, got {args.sizes!r}") from None
    for n in sizes:
        problem = _even_n(n)
        if problem:
            raise ConfigError(f"--sizes: {n} {problem}")
    family = cfg["metric"]["family"]
    s = cfg.scenario("gauduchon_torus" if family == "all" else family)
    rows = convergence_study(args.check, sizes, s)
    for row in rows:
        row["check"] = args.check
    if cfg["output"]["format"] == "csv":
        _emit(cfg, table_csv(rows, CONVERGE_COLUMNS))
    else:
        _emit(cfg, report_json(cfg, rows, {"scenario": s.fingerprint}))
    return EXIT_OK


def cmd_gauduchon(cfg: Config, args) -> int:
    s = cfg.scenario()
    m = s.metric()
    sol = solve_gauduchon_factor(m, tol=args.tol, max_iter=args.max_iter)
    if args.save:
        np.save(args.save, sol.u.values)
    row = {"metric": m.label, "n": s.n, "residual": sol.residual, "sweeps": sol.iterations,
           "min_u": sol.u.min(), "max_u": sol.u.max(), "mean_u": float(np.mean(sol.u.values))}
    if cfg["output"]["format"] == "csv":
        _emit(cfg, table_csv([row], tuple(row)))
    else:
        _emit(cfg, report_json(cfg, [row]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="YAML config file, or 'default' for built-in defaults")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one field, e.g. grid.n=8")
    parser = argparse.ArgumentParser(
        prog="hermitian-energy",
        description="Energy functionals on Hermitian metrics of a flat complex 2-torus.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="{verify,eval,converge,gauduchon}")
    sub.required = True

    p = sub.add_parser("verify", parents=[common], help="run the property suite")
    p.add_argument("--timing", action="store_true", help="add wall times to the JSON meta block")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("eval", parents=[common], help="evaluate one functional")
    p.add_argument("--functional", required=True, choices=sorted(fn.FUNCTIONALS))
    p.add_argument("--index", type=int, default=0, help="which seeded potential (default 0)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("converge", parents=[common], help="residual of a check versus n")
    p.add_argument("--check", default="err_gauduchon_zero", choices=CHECK_NAMES)
    p.add_argument("--sizes", default="8,16,32", help="ascending comma-separated grid sizes")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("gauduchon", parents=[common], help="solve for the Gauduchon factor")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=20)
    p.add_argument("--save", metavar="FILE.npy", help="save the factor u")
    p.set_defaults(func=cmd_gauduchon)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = load_config(args.config, args.overrides)
        return args.func(cfg, args)
    except (ConfigError, ScenarioError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (fn.InadmissiblePotentialError, fn.ImaginaryLeakError, GauduchonSolveError,
            ArithmeticError) as exc:
        print(f"numerical abort: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
