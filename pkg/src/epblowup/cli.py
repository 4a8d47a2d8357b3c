"""Command-line interface.

Subcommands: ``check`` (criteria only), ``char`` (characteristic or Riccati
ODE), ``pde`` (Eulerian run), ``sweep`` ((rho0, d0) phase map) and
``report`` (re-render a saved summary).

Exit codes: 0 success, 2 configuration error, 3 error inside a run, 4 a
certified member whose detected blow-up time exceeds its bound.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ExperimentConfig, parse_config, parse_document
from .errors import ConfigError, EPBlowupError
from .report import emit_report, summary_from_json
from .runner import run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUN, EXIT_BOUND = 0, 2, 3, 4

_ODE_SYSTEMS = ("characteristic", "riccati")
_PDE_SYSTEMS = ("ep", "ep_background", "polytropic")


def _load(args) -> ExperimentConfig:
    if args.config is None and args.preset is None:
        raise ConfigError("--config", "give a configuration file or --preset")
    if args.config is not None:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from None
        cfg = parse_config(text)
        if args.preset is not None:
            raise ConfigError("--preset", "use either --config or --preset, not both")
    else:
        cfg = parse_document({"preset": args.preset})
    changes = {}
    if args.out is not None:
        changes["dir"] = args.out
    if args.no_timestamp:
        changes["timestamp"] = False
    return cfg.with_output(**changes) if changes else cfg


def _require_system(cfg: ExperimentConfig, allowed: tuple[str, ...], command: str):
    if cfg.system not in allowed:
        raise ConfigError("system", f"the {command!r} command runs {list(allowed)}, got {cfg.system!r}")


def _execute(args) -> int:
    cfg = _load(args)
    if args.command == "char":
        _require_system(cfg, _ODE_SYSTEMS, "char")
    elif args.command == "pde":
        _require_system(cfg, _PDE_SYSTEMS, "pde")
    elif args.command == "sweep" and cfg.sweep is None:
        raise ConfigError("sweep", "the 'sweep' command needs a [sweep] table")
    summary = run_scenario(
        cfg,
        simulate=args.command != "check",
        sweep=args.command == "sweep",
        jobs=args.jobs,
    )
    sys.stdout.write(emit_report(summary, args.format))
    return EXIT_BOUND if summary.bound_violations else EXIT_OK


def _report(args) -> int:
    try:
        text = Path(args.summary).read_text()
    except OSError as exc:
        raise ConfigError("summary", str(exc)) from None
    try:
        summary = summary_from_json(text)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError("summary", f"not a run summary: {exc}") from None
    sys.stdout.write(emit_report(summary, args.format))
    return EXIT_BOUND if summary.bound_violations else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epblowup", description="Blow-up criteria, characteristic ODEs and 1D Euler solvers."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "check": "evaluate the membership criteria only",
        "char": "integrate a characteristic or Riccati ODE",
        "pde": "run an Eulerian simulation with tracers",
        "sweep": "criterion and blow-up phase map over (rho0, d0)",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="TOML experiment file")
        p.add_argument("--preset", help="named scenario instead of a file")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("--no-timestamp", action="store_true", help="omit the generation time")
        p.add_argument("--format", choices=("text", "json"), default="text")
    p = sub.add_parser("report", help="render a saved summary.json")
    p.add_argument("summary", help="path to summary.json")
    p.add_argument("--format", choices=("text", "json"), default="text")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "report":
            return _report(args)
        return _execute(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EPBlowupError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
