"""Command-line entry point.

Verbs: init (generate a config tree), validate (check one), run (simulate
scenarios), report (single-run report), compare (multi-case metrics and
figures).  Exit codes: 0 success, 1 runtime/simulation failure, 2 bad
usage, missing files, or invalid configuration.  Flags can be defaulted
through environment variables prefixed GRIDSTORM_ (SEED, THREADS, OUT).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _env(name, cast, default):
    raw = os.environ.get(f"GRIDSTORM_{name}")
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        return default


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gridstorm",
        description="Distribution-grid demand simulation for extreme "
                    "temperature events.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True)

    p_init = sub.add_parser("init", help="generate a configuration tree")
    p_init.add_argument("--out", default=_env("OUT", str, "gridstorm-config"))
    p_init.add_argument("--preset", choices=["desk", "paper-scale"],
                        default="desk")
    p_init.add_argument("--seed", type=int, default=_env("SEED", int, 42))
    p_init.add_argument("--force", action="store_true",
                        help="overwrite a non-empty directory")

    p_val = sub.add_parser("validate", help="check a run configuration")
    p_val.add_argument("--config", required=True)

    p_run = sub.add_parser("run", help="simulate scenarios from a config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--scenario", default=None,
                       help="case name or scenario file (default: all "
                            "scenarios in the config)")
    p_run.add_argument("--seed", type=int, default=_env("SEED", int, None))
    p_run.add_argument("--out", default=_env("OUT", str, None))
    p_run.add_argument("--threads", type=int,
                       default=_env("THREADS", int, 1))

    p_rep = sub.add_parser("report", help="report on one run directory")
    p_rep.add_argument("output", help="run output directory")
    p_rep.add_argument("--out", default=None,
                       help="report directory (default: <output>/report)")
    p_rep.add_argument("--no-figures", action="store_true")

    p_cmp = sub.add_parser(
        "compare", help="compare case outputs against a baseline")
    p_cmp.add_argument("outputs", nargs="+",
                       help="output directories; first is the baseline")
    p_cmp.add_argument("--reference", default=None,
                       help="supplied-demand CSV (timestamp,supplied_mw)")
    p_cmp.add_argument("--window", nargs=2, type=int, metavar=("LO", "HI"),
                       default=None)
    p_cmp.add_argument("--out", default=_env("OUT", str, None))
    p_cmp.add_argument("--no-figures", action="store_true")
    return p


def _cmd_init(args) -> int:
    from .config import ConfigError, init_tree
    try:
        run_path = init_tree(args.out, preset=args.preset, seed=args.seed,
                             force=args.force)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {run_path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .config import validate_run_config
    diags = validate_run_config(args.config)
    print(json.dumps({"config": args.config, "diagnostics": diags},
                     indent=2))
    return EXIT_OK if not diags else EXIT_CONFIG


def _select_scenarios(cfg, selector):
    from .scenario import load_scenario
    if selector is None:
        return list(cfg.scenario_files)
    if Path(selector).exists():
        return [selector]
    for spath in cfg.scenario_files:
        spec, _ = load_scenario(spath)
        if spec.case_id == selector:
            return [spath]
    raise FileNotFoundError(
        f"scenario {selector!r} is neither a file nor a case in the config")


def _cmd_run(args) -> int:
    from .config import ConfigError, load_run_config
    from .engine import EngineError, SimConfig, run
    from .output import write_output
    from .scenario import load_scenario

    try:
        cfg = load_run_config(args.config)
        scenario_paths = _select_scenarios(cfg, args.scenario)
        if not scenario_paths:
            print("error: config lists no scenarios", file=sys.stderr)
            return EXIT_CONFIG
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    seed = cfg.seed if args.seed is None else args.seed
    out_root = Path(args.out) if args.out else cfg.output_dir
    try:
        for spath in scenario_paths:
            spec, scenario_seed = load_scenario(spath)
            sim_cfg = SimConfig(
                start=cfg.start, end=cfg.end, dt=cfg.dt,
                regions=cfg.regions, scenario=spec,
                scenario_seed=scenario_seed, seed=seed,
                output_path=str(out_root), threads=max(1, args.threads))
            result = run(sim_cfg)
            case_dir = out_root / spec.case_id
            write_output(result, case_dir)
            print(f"{spec.case_id}: wrote {case_dir}")
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_report(args) -> int:
    from .output import OutputError, read_output
    from .report import write_run_report
    try:
        sim = read_output(args.output)
    except (OutputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or (Path(args.output) / "report")
    written = write_run_report(sim, out_dir, figures=not args.no_figures)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    from .metrics import MetricsError, load_reference
    from .output import OutputError, read_output
    from .report import write_compare_report
    if len(args.outputs) < 2:
        print("error: compare needs at least 2 outputs (baseline first)",
              file=sys.stderr)
        return EXIT_CONFIG
    outputs = {}
    baseline = None
    try:
        for i, path in enumerate(args.outputs):
            sim = read_output(path)
            name = sim.meta.get("case") or Path(path).name
            if name in outputs:
                name = f"{name}#{i}"
            outputs[name] = sim
            if i == 0:
                baseline = name
        reference = load_reference(args.reference) if args.reference else None
    except (OutputError, MetricsError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out) if args.out else Path(args.outputs[0]).parent \
        / "compare"
    window = tuple(args.window) if args.window else None
    try:
        report = write_compare_report(outputs, baseline, out_dir,
                                      reference=reference, window=window,
                                      figures=not args.no_figures)
    except MetricsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print((out_dir / "report.txt").read_text(), end="")
    print(f"wrote {out_dir}")
    return EXIT_OK


_COMMANDS = {
    "init": _cmd_init,
    "validate": _cmd_validate,
    "run": _cmd_run,
    "report": _cmd_report,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.verb](args)


if __name__ == "__main__":
    sys.exit(main())
