"""``capsense`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import sys

from . import commands, output
from .config import ConfigError, SensorConfig, load
from .core import InvalidArgumentError, NumericalError, TouchRegimeError, WrongGeometryError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4

COMMANDS = ("deflect", "cap-curve", "modes", "touch-curve", "sweep", "search", "spl", "oracle")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail(EXIT_CONFIG, "usage", message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="capsense", description="Capacitive pressure sensor design calculations.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--oracle", action="store_true", help="add finite-difference oracle results (deflect)")
    p.add_argument("--formula-mode", choices=("paper-exact", "consistent"), help="deflection formula variant")
    p.add_argument("--r2-min", type=float, help="R^2 threshold of the linear window (default 0.999)")
    p.add_argument("--format", dest="formats", action="append", choices=output.FORMATS,
                   help="output format; repeatable (default: csv and json)")
    p.add_argument("--value", type=float, help="spl: value to convert")
    p.add_argument("--direction", choices=("to_pa", "to_db"), help="spl: conversion direction")
    return p


def _fail(code: int, kind: str, message: str, **extra) -> None:
    payload = {"error": kind, "message": message, **extra}
    sys.stderr.write(json.dumps(payload, sort_keys=True, default=str) + "\n")
    raise SystemExit(code)


def _run(args) -> commands.CommandOutput:
    if args.command == "spl" and args.config is None:
        if args.value is None or args.direction is None:
            raise ConfigError("spl needs --value and --direction, or a config with an spl section", "spl")
        return commands.cmd_spl(args.value, args.direction)
    if args.config is None:
        raise ConfigError("--config is required for this command", "--config")
    cfg = load(args.config)
    if args.formula_mode:
        cfg = SensorConfig.from_doc({**cfg.doc, "formula_mode": args.formula_mode.replace("-", "_")})
    if args.r2_min is not None and not 0 < args.r2_min <= 1:
        raise ConfigError("must lie in (0, 1]", "--r2-min")
    if args.command == "deflect":
        return commands.cmd_deflect(cfg, oracle=args.oracle)
    if args.command == "cap-curve":
        return commands.cmd_cap_curve(cfg, args.r2_min)
    if args.command == "touch-curve":
        return commands.cmd_touch_curve(cfg, args.r2_min)
    if args.command == "modes":
        return commands.cmd_modes(cfg)
    if args.command == "sweep":
        return commands.cmd_sweep(cfg)
    if args.command == "search":
        return commands.cmd_search(cfg, args.r2_min)
    if args.command == "oracle":
        return commands.cmd_oracle(cfg)
    spl = cfg.doc.get("spl")
    if spl is None:
        raise ConfigError("spl command needs an spl section", "spl")
    return commands.cmd_spl(float(spl["value"]), spl["direction"])


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = _run(args)
        formats = args.formats or ["csv", "json"]
        for path in output.write(out, args.out, formats):
            print(path)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, "config", exc.detail, path=exc.path)
    except commands.InfeasibleError as exc:
        _fail(EXIT_INFEASIBLE, "infeasible", str(exc))
    except (NumericalError, TouchRegimeError) as exc:
        _fail(EXIT_NUMERICAL, "numerical", str(exc), diagnostics=getattr(exc, "diagnostics", {}))
    except (InvalidArgumentError, WrongGeometryError) as exc:
        _fail(EXIT_CONFIG, "config", str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
