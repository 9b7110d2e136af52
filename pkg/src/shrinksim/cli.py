"""Command-line entry point: ``shrinksim run | scenario | check``.

Settings are read from an optional INI file and then overridden by flags::

    [study]
    master_seed = 20190417
    runs_per_scenario = 200
    dev_pool_size = 200000
    validation_size = 100000
    bootstrap_reps = 200
    parallelism = 1
    output_dir = results
    methods = ML, LU, BU, Ridge, PML, Lasso, AdaptiveLasso, Garrote, Firth

    [scenarios]
    predictor_set = FiveTrue, TenTrue
    rho = 0, 0.5
    event_rate = 0.1
    epv = 3, 5, 10

Exit status: 0 success, 1 failed acceptance check, 2 bad usage or
configuration, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import fields

from .errors import ConfigurationError
from .glm import Method
from .harness import HarnessConfig, run_study

_INT_KEYS = {"master_seed", "runs_per_scenario", "dev_pool_size", "validation_size",
             "bootstrap_reps", "parallelism", "intercept_mc_size", "cv_folds"}
_FLOAT_KEYS = {"lambda_min", "separation_epsilon"}
_FILTER_KEYS = {"epv": int, "predictor_set": str, "rho": float, "event_rate": float}


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]


def load_config_file(path) -> dict:
    """Read an INI file into HarnessConfig keyword arguments."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigurationError(f"cannot read configuration file {path}")
    known = {f.name for f in fields(HarnessConfig)}
    out: dict = {}
    if parser.has_section("study"):
        for key, raw in parser.items("study"):
            if key not in known or key == "scenario_filter":
                raise ConfigurationError(f"unknown [study] key {key!r}")
            try:
                if key in _INT_KEYS:
                    out[key] = int(raw)
                elif key in _FLOAT_KEYS:
                    out[key] = float(raw)
                elif key == "methods":
                    out[key] = tuple(Method(m) for m in _split(raw))
                else:
                    out[key] = raw
            except ValueError as exc:
                raise ConfigurationError(f"[study] {key} = {raw!r}: {exc}") from exc
    if parser.has_section("scenarios"):
        flt = {}
        for key, raw in parser.items("scenarios"):
            if key not in _FILTER_KEYS:
                raise ConfigurationError(f"unknown [scenarios] key {key!r}")
            try:
                flt[key] = [_FILTER_KEYS[key](v) for v in _split(raw)]
            except ValueError as exc:
                raise ConfigurationError(f"[scenarios] {key} = {raw!r}: {exc}") from exc
        out["scenario_filter"] = flt
    return out


def _add_study_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with [study] and [scenarios] sections")
    p.add_argument("--seed", dest="master_seed", type=int)
    p.add_argument("--runs", dest="runs_per_scenario", type=int)
    p.add_argument("--dev-pool-size", type=int)
    p.add_argument("--validation-size", type=int)
    p.add_argument("--bootstrap-reps", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--parallelism", type=int)
    p.add_argument("--methods", type=lambda s: tuple(Method(m) for m in _split(s)),
                   help="comma-separated subset; ML is always fitted")


def _filter_flags(p: argparse.ArgumentParser, required: bool) -> None:
    nargs = None if required else "+"
    p.add_argument("--predictor-set", dest="predictor_set", nargs=nargs, required=required,
                   choices=["FiveTrue", "FiveTrueFiveNoise", "TenTrue"])
    p.add_argument("--rho", type=float, nargs=nargs, required=required)
    p.add_argument("--event-rate", dest="event_rate", type=float, nargs=nargs, required=required)
    p.add_argument("--epv", type=int, nargs=nargs, required=required)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shrinksim",
                                     description="Simulation study of shrinkage in logistic regression.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full or filtered factorial")
    _add_study_flags(run)
    _filter_flags(run, required=False)

    one = sub.add_parser("scenario", help="run a single design cell")
    _add_study_flags(one)
    _filter_flags(one, required=True)

    chk = sub.add_parser("check", help="run acceptance checks")
    chk.add_argument("--seed", type=int)
    chk.add_argument("--criteria", type=int, nargs="+",
                     help="criterion numbers (default: the quick set 1 6 8 9 10)")
    chk.add_argument("--all", action="store_true", help="run all ten criteria (slow)")
    return parser


def config_from_args(args: argparse.Namespace) -> HarnessConfig:
    kw = load_config_file(args.config) if args.config else {}
    for f in fields(HarnessConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            kw[f.name] = value
    flt = dict(kw.get("scenario_filter") or {})
    for key in _FILTER_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            flt[key] = value if isinstance(value, list) else [value]
    kw["scenario_filter"] = flt or None
    return HarnessConfig(**kw)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "check":
        from .checks import CRITERIA, DEFAULT_SEED, QUICK_CRITERIA, run_checks

        numbers = sorted(CRITERIA) if args.all else (args.criteria or list(QUICK_CRITERIA))
        bad = [k for k in numbers if k not in CRITERIA]
        if bad:
            print(f"error: unknown criteria {bad}", file=sys.stderr)
            return 2
        seed = DEFAULT_SEED if args.seed is None else args.seed
        results = run_checks(numbers, seed=seed)
        n_ok = sum(r.passed for r in results)
        print(f"{n_ok}/{len(results)} criteria passed")
        return 0 if n_ok == len(results) else 1

    try:
        config = config_from_args(args)
        records, summaries, paths = run_study(config)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    excluded = sum(r.excluded for r in records)
    print(f"{len(summaries)} scenarios, {len(records)} runs ({excluded} excluded)")
    for path in paths:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
