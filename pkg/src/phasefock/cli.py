"""Command-line interface for the experiment runner.

Subcommands: run, oscillator-demo, coherent-check, theorem-sweep,
validate-config.  Exit codes: 0 success, 2 config schema violation,
3 truncation guard, 4 solver failure, 5 acceptance-threshold failure.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .errors import ConfigSchemaError, SolverError, TruncationError
from . import experiments

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_TRUNCATION = 3
EXIT_SOLVER = 4
EXIT_THRESHOLD = 5


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package."""
    ref = resources.files("phasefock").joinpath("configs", name)
    with resources.as_file(ref) as p:
        return Path(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasefock",
        description="Run phase-space quantum mechanics experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, config_required=True):
        sp.add_argument("--config", type=Path, required=config_required,
                        help="TOML experiment config")
        sp.add_argument("--out", type=Path, default=Path("out"),
                        help="output directory (default ./out)")
        sp.add_argument("--jobs", type=int, default=1,
                        help="parallel hbar points in sweeps")
        sp.add_argument("--seed", type=int, default=None,
                        help="reserved; all computations are deterministic")

    add_common(sub.add_parser("run", help="generic evolution run"))
    add_common(sub.add_parser("oscillator-demo",
                              help="bundled oscillator reduction demo"),
               config_required=False)
    add_common(sub.add_parser("coherent-check",
                              help="coherent-state identification check"),
               config_required=False)
    add_common(sub.add_parser("theorem-sweep",
                              help="moment-scaling sweep over hbar"),
               config_required=False)
    vc = sub.add_parser("validate-config", help="schema-check a config")
    vc.add_argument("--config", type=Path, required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate-config":
            experiments.load_config(args.config)
            print(f"{args.config}: ok")
            return EXIT_OK
        if args.command == "run":
            manifest = experiments.run(args.config, args.out, jobs=args.jobs)
        elif args.command == "oscillator-demo":
            cfg = args.config or bundled_config("oscillator_demo.toml")
            manifest = experiments.run(cfg, args.out, jobs=args.jobs)
        elif args.command == "coherent-check":
            cfg = args.config or bundled_config("coherent_check.toml")
            manifest = experiments.coherent_state_check(cfg, args.out)
        elif args.command == "theorem-sweep":
            cfg = args.config or bundled_config("theorem_sweep.toml")
            manifest = experiments.theorem_sweep(cfg, args.out, jobs=args.jobs)
        else:  # pragma: no cover - argparse guards this
            raise AssertionError(args.command)
    except ConfigSchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except TruncationError as exc:
        print(f"truncation guard: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    for name, payload in manifest.checks.items():
        status = "pass" if payload.get("passed", True) else "FAIL"
        print(f"[{status}] {name}")
    print(f"wall time: {manifest.wall_time_s:.1f}s; artifacts in {args.out}")
    if not manifest.passed:
        return EXIT_THRESHOLD
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
