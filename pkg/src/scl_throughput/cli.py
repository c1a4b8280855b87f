"""Command line entry point: ``scl-throughput <subcommand> CONFIG [--out DIR] [--seed N]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config, with_overrides
from .link import LinkError
from .modem.constellation import ConstellationError
from .nli import NliError
from .plan import PlanError
from .raman import RamanError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4

log = logging.getLogger("scl_throughput")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scl-throughput",
        description="Throughput of ultra-wideband S+C+L links under inter-channel Raman scattering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("simulate", "evaluate SNR, GMI and throughput at the configured launch powers"),
        ("optimize", "optimize launch powers, then simulate at the optimum"),
        ("rate-sweep", "throughput versus the number of code rates"),
        ("validate", "run the numerical self-checks"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", type=Path)
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="seed for the optimizer and the oracle")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    # imported late so ``--help`` does not pay for numba start-up
    from . import pipeline

    try:
        cfg = with_overrides(load_config(args.config), out=args.out, seed=args.seed)
        base_dir = args.config.resolve().parent
        if args.command == "simulate":
            report = pipeline.run_simulate(cfg, base_dir=base_dir)
            print(f"{report.scenario_id}: {report.total_throughput / 1e12:.3f} Tb/s "
                  f"(GMI bound {report.gmi_bound / 1e12:.3f} Tb/s)")
        elif args.command == "optimize":
            _, report, _ = pipeline.run_optimize(cfg, base_dir=base_dir)
            print(f"{report.scenario_id}: {report.total_throughput / 1e12:.3f} Tb/s at the optimum")
        elif args.command == "rate-sweep":
            for k, value, _ in pipeline.run_rate_sweep(cfg, base_dir=base_dir):
                print(f"K={k}: {value / 1e12:.3f} Tb/s")
        else:
            report = pipeline.run_validate(cfg)
            for c in report.checks:
                print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
            if not report.passed:
                return EXIT_VALIDATION
    except (ConfigError, PlanError, ConstellationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RamanError, NliError, LinkError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
