"""Command-line entry point for the experiment harness.

Exit codes: 0 on success, 2 for configuration problems (also used by
argparse itself), 3 when too many Monte Carlo trials fail.
"""

import argparse
import logging
import os
import sys

from .config import load_config
from .errors import ConfigurationError, TrialFailureError
from .experiments import (run_distance_sweep, run_field_maps,
                          run_port_report, run_power_sweep)

_RUNNERS = {
    "power-sweep": run_power_sweep,
    "distance-sweep": run_distance_sweep,
    "field-map": run_field_maps,
    "port-report": run_port_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nfsec",
        description="Secrecy experiments for a near-field fluid-antenna "
                    "transmitter")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "power-sweep": "Monte Carlo secrecy rates over transmit power",
        "distance-sweep": "Monte Carlo secrecy rates over Eve's distance",
        "field-map": "signal and interference power over a spatial grid",
        "port-report": "selected rail ports for fluid vs fixed arrays",
    }
    for name, desc in descriptions.items():
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="config file path")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--trials", type=int, help="override trial count")
        p.add_argument("--out", help="output directory")
        p.add_argument("--variant",
                       help="comma-separated variant tags to run")
        p.add_argument("--workers", type=int,
                       help="parallel worker processes")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.trials is not None:
        overrides["trials"] = str(args.trials)
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.variant is not None:
        overrides["variants"] = args.variant
    if args.workers is not None:
        overrides["workers"] = str(args.workers)
    try:
        config = load_config(args.config, overrides, dict(os.environ))
        _RUNNERS[args.command](config, config.output_dir)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except TrialFailureError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
