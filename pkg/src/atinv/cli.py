"""Command line interface: ``atinv invariant|sweep|distinguish|verify``.

Configuration is a JSON file; rationals may be given as numbers, strings
(``"1/2"``) or ``{"num": p, "den": q}``. Reports are written as sorted-key JSON
so identical configurations give byte-identical output.

Exit codes: 0 success, 2 configuration error, 3 requested precision not met,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import __version__
from .engine import CertifiedValue, WitnessRule, invariant
from .families import Divisible, FamilySpec, Rational, SpecError, as_ratio, spec_from_dict
from .massloss import ProbeRule, dyadic_limit, massloss_invariant
from .verify import DEFAULT_SEED, SUITES, run_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECISION = 3
EXIT_VERIFY = 4
CONFIG_VERSION = 1
RANDOMIZED_SUITES = ("variance", "moment-bounds")


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


# -- configuration ---------------------------------------------------------------


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    version = cfg.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    return cfg


def _positive_int(cfg: dict, key: str, default: int) -> int:
    v = cfg.get(key, default)
    if not isinstance(v, int) or v <= 0:
        raise ConfigError(f"{key} must be a positive integer")
    return v


def _limits(cfg: dict) -> dict:
    return {"k_max": _positive_int(cfg, "k_max", 64), "l_max": _positive_int(cfg, "l_max", 32),
            "d_max": _positive_int(cfg, "d_max", 256)}


def _spec(cfg: dict, key: str = "spec") -> FamilySpec:
    if key not in cfg:
        raise ConfigError(f"config needs a {key!r} entry")
    return spec_from_dict(cfg[key])


def _witness(cfg: dict) -> WitnessRule:
    return WitnessRule.from_dict(cfg.get("witness"))


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# -- invariant -------------------------------------------------------------------


def cmd_invariant(cfg: dict, out: Optional[str] = None) -> int:
    spec = _spec(cfg)
    witness = _witness(cfg)
    value = invariant(spec, witness, **_limits(cfg))
    tol = cfg.get("tolerance")
    precise = tol is None or value.width <= float(tol)
    report = {
        "command": "invariant",
        "version": __version__,
        "spec": spec.to_dict(),
        "witness": witness.bind(spec).to_dict(),
        "limits": _limits(cfg),
        "tolerance": tol,
        "result": value.to_dict(),
        "precision_met": precise,
    }
    _emit(dumps(report), out)
    return EXIT_OK if precise else EXIT_PRECISION


# -- sweep -----------------------------------------------------------------------


def _with_r(spec: FamilySpec, r: Fraction) -> FamilySpec:
    if isinstance(spec, (Divisible, Rational)):
        return spec.with_r(r)
    raise ConfigError("sweeps need a divisible or rational family")


def _sweep_row(args: tuple) -> dict:
    spec_dict, witness_dict, limits, r_json, tol = args
    r = as_ratio(r_json)
    try:
        spec = _with_r(spec_from_dict(spec_dict), r)
        v = invariant(spec, WitnessRule.from_dict(witness_dict), **limits)
    except (SpecError, ValueError, OverflowError, MemoryError) as exc:
        return {"r": float(r), "value": "", "lower": "", "upper": "", "status": f"error: {exc}"}
    status = "ok" if tol is None or v.width <= tol else "imprecise"
    return {"r": float(r), "value": v.value, "lower": v.lower, "upper": v.upper, "status": status}


def sweep_rows(cfg: dict, workers: int = 1) -> list:
    spec = _spec(cfg)
    grid = cfg.get("r_grid")
    if not grid:
        raise ConfigError("sweep needs a nonempty r_grid")
    grid = [as_ratio(r) for r in grid]
    if any(r <= 0 for r in grid):
        raise ConfigError("r_grid values must be positive")
    _with_r(spec, grid[0])
    tol = cfg.get("tolerance")
    jobs = [(spec.to_dict(), cfg.get("witness"), _limits(cfg), {"num": r.numerator, "den": r.denominator},
             None if tol is None else float(tol)) for r in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_row, jobs))
    return [_sweep_row(j) for j in jobs]


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["r", "value", "lower", "upper", "status"], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def write_svg(rows: list, path: str, log_y: bool = False) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "atinv"
    good = [row for row in rows if row["status"] != "" and not str(row["status"]).startswith("error")]
    fig, ax = plt.subplots(figsize=(6, 4))
    rs = [row["r"] for row in good]
    ax.fill_between(rs, [row["lower"] for row in good], [row["upper"] for row in good], alpha=0.3, label="bracket")
    ax.plot(rs, [row["value"] for row in good], marker="o", label="invariant")
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("r")
    ax.set_ylabel("invariant")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_sweep(cfg: dict, out: Optional[str] = None, workers: int = 1, svg: bool = False) -> int:
    rows = sweep_rows(cfg, workers)
    _emit(rows_to_csv(rows), out)
    if svg:
        target = str(Path(out).with_suffix(".svg")) if out else "sweep.svg"
        write_svg(rows, target, bool(cfg.get("log_y", False)))
    return EXIT_OK if all(row["status"] == "ok" for row in rows) else EXIT_PRECISION


# -- distinguish -----------------------------------------------------------------


def _disjoint(a: CertifiedValue, b: CertifiedValue) -> bool:
    return a.upper < b.lower or b.upper < a.lower


def _pair_family(spec: FamilySpec) -> bool:
    if not isinstance(spec, Rational) or not spec.gen.is_constant:
        return False
    h = spec.gen.tail
    return h.support() == [0, 1] and h[0] == h[1] and spec.scale.constant_value is not None


def _massloss(a: Fraction, spec: Rational) -> CertifiedValue:
    if spec.scale.constant_value == 2:
        return dyadic_limit(a, spec.r)
    return massloss_invariant(ProbeRule("signed", a, spec.scale), spec)


def distinguish(spec_a: FamilySpec, spec_b: FamilySpec, witness: WitnessRule, limits: dict) -> dict:
    """Compare invariants; the verdict is ``distinguished`` only for disjoint certified brackets."""
    ev_a = invariant(spec_a, witness, **limits)
    ev_b = invariant(spec_b, witness, **limits)
    report = {
        "evaluation": {"a": ev_a.to_dict(), "b": ev_b.to_dict(), "disjoint": _disjoint(ev_a, ev_b)},
    }
    separated = report["evaluation"]["disjoint"]
    if _pair_family(spec_a) and _pair_family(spec_b) and spec_a.scale == spec_b.scale:
        a = spec_a.r
        ml_a, ml_b = _massloss(a, spec_a), _massloss(a, spec_b)
        report["massloss"] = {"probe": {"kind": "signed", "a": {"num": a.numerator, "den": a.denominator}},
                              "a": ml_a.to_dict(), "b": ml_b.to_dict(), "disjoint": _disjoint(ml_a, ml_b)}
        separated = separated or report["massloss"]["disjoint"]
    report["verdict"] = "distinguished" if separated else "inconclusive"
    return report


def cmd_distinguish(cfg: dict, out: Optional[str] = None) -> int:
    spec_a, spec_b = _spec(cfg, "spec_a"), _spec(cfg, "spec_b")
    report = {"command": "distinguish", "version": __version__, "spec_a": spec_a.to_dict(), "spec_b": spec_b.to_dict()}
    report |= distinguish(spec_a, spec_b, _witness(cfg), _limits(cfg))
    _emit(dumps(report), out)
    return EXIT_OK


# -- verify ----------------------------------------------------------------------


def cmd_verify(cfg: dict, suites: Optional[list] = None, out: Optional[str] = None) -> int:
    names = suites or cfg.get("suites") or ["all"]
    if names == ["all"]:
        names = sorted(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suite(s) {unknown}; choose from {sorted(SUITES)}")
    seed = cfg.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    results = {}
    for name in names:
        kw = {"seed": seed} if name in RANDOMIZED_SUITES else {}
        results[name] = run_suite(name, **kw)
    failed = [n for n in names if not results[n]["pass"]]
    report = {"command": "verify", "version": __version__, "seed": seed, "suites": results, "failed": failed}
    _emit(dumps(report), out)
    if failed:
        detail = results[failed[0]].get("first_violations") or results[failed[0]].get("checks")
        print(f"verification failed in {failed[0]}: {detail}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atinv", description="Evaluation and mass-loss invariants of AT systems.")
    parser.add_argument("--version", action="version", version=f"atinv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("invariant", "sweep", "distinguish", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
        if name == "sweep":
            p.add_argument("--svg", action="store_true", help="also write an SVG curve next to --out")
        if name == "verify":
            p.add_argument("suites", nargs="*", help=f"suites to run: {', '.join(sorted(SUITES))} or all")
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be positive")
        if args.command != "verify" and args.config is None:
            raise ConfigError(f"{args.command} needs --config")
        cfg = load_config(args.config)
        if args.command == "invariant":
            return cmd_invariant(cfg, args.out)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.workers, args.svg)
        if args.command == "distinguish":
            return cmd_distinguish(cfg, args.out)
        return cmd_verify(cfg, args.suites, args.out)
    except (ConfigError, SpecError, KeyError, TypeError, ValueError) as exc:
        print(f"atinv: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
