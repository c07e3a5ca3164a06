# =============================================================================
# main.py - V1.3.0
# Module: command-line front end (index / decompose / simulate / diagnose)
# Notes:
#   - [Add] settings YAML merged over DEFAULT_CONFIG, section by section
#   - [Add] every failure prints one "error: ..." line; exit 1 = data, 2 = usage
#   - [Fix] logs go to stderr only, stdout stays byte-identical across runs
#   - [Fix] 0-byte settings file is rejected instead of silently ignored
# =============================================================================

import argparse
import copy
import logging
import os
import sys
from datetime import datetime, timezone
from typing import List, Optional, Sequence

import yaml

from asymptotics import HD_SWEEP, hd_sweep
from decomposition import decompose, gap
from errors import GpiError, UsageError
from measures import MEASURE_GRAMMAR, spec_from_string
from montecarlo import load_experiment, run_experiment
from report import render_diagnostics, render_index, render_report, render_sim_result
from survey_data import load_survey

SETTINGS_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "config", "config.yaml")
LEGACY_NAMES = ("dep.txt", "eq.txt", "labels.txt")

DEFAULT_CONFIG = {
    "app": {
        "debug_log": False,
    },
    "survey": {
        "legacy_max_groups": 15,
    },
    "quadrature": {
        "nodes": 256,
        "pieces": 8,
        "step_nodes": 8,
        "bisection_tol": 1e-12,
    },
    "decomposition": {
        "clamp_tolerance": 1e-10,
        "poor_subsample_threshold": 20000,
        "subsample_seed": 20240601,
        "cross_weights": "proof",
        "workers": 1,
    },
    "montecarlo": {
        "min_reps": 100,
        "workers": 1,
    },
}


def load_config(path: Optional[str] = None) -> dict:
    """Settings file over DEFAULT_CONFIG; an explicit path must exist."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    target = path or SETTINGS_PATH
    if not os.path.exists(target):
        if path:
            raise GpiError(f"settings file not found: {path}")
        return cfg

    with open(target, "r", encoding="utf-8") as f:
        try:
            loaded = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise GpiError(f"settings file {target} is not valid YAML: {exc}") from None
    if not loaded or not isinstance(loaded, dict):
        raise GpiError(f"settings file {target} is empty or not a mapping")

    for section, values in loaded.items():
        if isinstance(values, dict):
            cfg.setdefault(section, {}).update(values)
        else:
            cfg[section] = values
    return cfg


def setup_logging(debug: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format='%(asctime)s [%(levelname)s] %(message)s',
        datefmt='%H:%M:%S',
        stream=sys.stderr,
        force=True,
    )


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", choices=("table", "json"), default="table")
    common.add_argument("--settings", help="runtime settings YAML (default config/config.yaml)")
    common.add_argument("--timestamp", action="store_true", help="add a generation time stamp")
    common.add_argument("--debug", action="store_true")
    common.add_argument("--measure", default="sen", help=MEASURE_GRAMMAR)

    survey = argparse.ArgumentParser(add_help=False)
    survey.add_argument("--input", help="CSV file, or directory holding dep.txt eq.txt labels.txt")
    survey.add_argument("--format", choices=("csv", "legacy"), default="csv")
    survey.add_argument("--legacy", nargs=3, metavar=("DEP", "EQ", "LABELS"))
    survey.add_argument("--poverty-line", type=float, dest="poverty_line")
    survey.add_argument("--level", type=float, default=0.95)

    parser = CliParser(prog="gpi", description="Poverty indices and their gap of decomposability")
    sub = parser.add_subparsers(dest="command", parser_class=CliParser)
    sub.add_parser("index", parents=[common, survey], help="per-stratum and global index values")
    sub.add_parser("decompose", parents=[common, survey], help="gap of decomposability report")

    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo check of the gap's normal limit")
    sim.add_argument("--config", required=True, help="experiment YAML")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--reps", type=int)
    sim.add_argument("--n", type=int)
    sim.add_argument("--level", type=float)

    diag = sub.add_parser("diagnose", parents=[common], help="HD1/HD2 deviations over an n sweep")
    diag.add_argument("--ratio", type=float, default=0.4, help="headcount ratio Q/n")
    diag.add_argument("--sweep", default=",".join(str(n) for n in HD_SWEEP), help="comma-separated sample sizes")
    return parser


def _survey_source(args):
    if args.legacy:
        return tuple(args.legacy), "legacy"
    if not args.input:
        raise UsageError("--input or --legacy DEP EQ LABELS is required")
    if args.format == "legacy":
        if not os.path.isdir(args.input):
            raise UsageError("--format legacy needs --input DIR (with dep.txt eq.txt labels.txt) or --legacy")
        return tuple(os.path.join(args.input, name) for name in LEGACY_NAMES), "legacy"
    return args.input, "csv"


def _poverty_line(args) -> float:
    if args.poverty_line is None:
        raise UsageError("--poverty-line is required")
    if not args.poverty_line > 0:
        raise UsageError(f"--poverty-line must be > 0, got {args.poverty_line}")
    return float(args.poverty_line)


def cmd_index(args, cfg, stamp) -> str:
    measure = spec_from_string(args.measure)
    Z = _poverty_line(args)
    source, fmt = _survey_source(args)
    sample = load_survey(source, fmt, cfg.get("survey"))
    _, global_index, groups = gap(sample, Z, measure)
    return render_index(measure.label, Z, groups, global_index, sample.n, args.output, stamp)


def cmd_decompose(args, cfg, stamp) -> str:
    measure = spec_from_string(args.measure)
    Z = _poverty_line(args)
    source, fmt = _survey_source(args)
    sample = load_survey(source, fmt, cfg.get("survey"))
    report = decompose(sample, Z, measure, args.level, cfg.get("decomposition"), cfg.get("quadrature"))
    return render_report(report, args.output, stamp)


def cmd_simulate(args, cfg, stamp) -> str:
    exp = load_experiment(args.config, cfg.get("quadrature"))
    result = run_experiment(
        exp.mix, exp.Z, exp.measure,
        n=args.n if args.n is not None else exp.n,
        reps=args.reps if args.reps is not None else exp.reps,
        level=args.level if args.level is not None else exp.level,
        seed=args.seed if args.seed is not None else exp.seed,
        cfg=cfg,
    )
    return render_sim_result(result, args.output, stamp)


def cmd_diagnose(args, cfg, stamp) -> str:
    measure = spec_from_string(args.measure)
    try:
        sizes = [int(v) for v in args.sweep.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--sweep must be comma-separated integers, got '{args.sweep}'") from None
    if not sizes or min(sizes) < 1:
        raise UsageError("--sweep needs positive sample sizes")
    return render_diagnostics(measure.label, hd_sweep(measure, args.ratio, sizes), args.output, stamp)


COMMANDS = {
    "index": cmd_index,
    "decompose": cmd_decompose,
    "simulate": cmd_simulate,
    "diagnose": cmd_diagnose,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    logger = logging.getLogger("main")
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise UsageError(f"a command is required: {', '.join(COMMANDS)}")
        cfg = load_config(args.settings)
        setup_logging(args.debug or bool(cfg.get("app", {}).get("debug_log", False)))
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds") if args.timestamp else None
        output = COMMANDS[args.command](args, cfg, stamp)
    except GpiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        where = exc.filename or ""
        print(f"error: cannot read {where}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        logger.exception("unexpected failure")
        print(f"error: unexpected failure: {exc}", file=sys.stderr)
        return 1

    sys.stdout.write(output)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
