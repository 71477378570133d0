"""
Command line front end.

Subcommands mirror the scenario entry points:

  contourmon run      one scheme, spatial + temporal phases
  contourmon compare  all three schemes on identical fields
  contourmon sweep    margin trajectories from scaled starting margins

Every scenario config field is available as a flag; --config loads a
file first and flags override it.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .scenario import (
    ConfigError,
    ScenarioConfig,
    compare_schemes,
    load_config,
    run_scenario,
    sweep_initial_delta,
)

_FLAG_TYPES = {"int": int, "float": float, "str": str}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="config file; explicit flags override its values")
    defaults = ScenarioConfig()
    for f in dataclasses.fields(ScenarioConfig):
        flag = "--" + f.name.replace("_", "-")
        default = getattr(defaults, f.name)
        if f.type == "bool":
            parser.add_argument(flag, dest=f.name, default=None,
                                action=argparse.BooleanOptionalAction,
                                help=f"(default {str(default).lower()})")
        else:
            parser.add_argument(flag, dest=f.name, default=None,
                                type=_FLAG_TYPES[f.type], metavar=f.type.upper(),
                                help=f"(default {default})")


def _build_config(args: argparse.Namespace) -> ScenarioConfig:
    config = load_config(args.config) if args.config else ScenarioConfig()
    overrides = {
        f.name: getattr(args, f.name)
        for f in dataclasses.fields(ScenarioConfig)
        if getattr(args, f.name) is not None
    }
    return dataclasses.replace(config, **overrides)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="contourmon",
        description="Contour-band monitoring of a correlated sensor field.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scheme over all replicates")
    _add_config_flags(p_run)

    p_compare = sub.add_parser("compare", help="run all three schemes on identical fields")
    _add_config_flags(p_compare)

    p_sweep = sub.add_parser("sweep", help="compare margin trajectories across starting scales")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--scales", default="0.5,1.0,2.0", metavar="S1,S2,...",
                         help="initial margin multipliers (default 0.5,1.0,2.0)")

    args = parser.parse_args(argv)
    try:
        config = _build_config(args)
        if args.command == "run":
            run_scenario(config)
        elif args.command == "compare":
            compare_schemes(config)
        else:
            scales = tuple(float(s) for s in args.scales.split(","))
            sweep_initial_delta(config, scales=scales)
    except (ConfigError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {config.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
