"""
Command-line front-end.

    geodesic-lab run CONFIG
    geodesic-lab catalog [--json]
    geodesic-lab verify MODEL [--seed N] [--tol CHECK=VALUE ...] [--t-end T --dt DT]
    geodesic-lab entropy B11 B12 B21 B22 [--estimate]

Exit status: 0 all verdicts pass, 1 a verdict failed, 2 config/model error.
"""

import argparse
import asyncio
import json
import logging
import sys
from typing import Dict, List, Optional

import numpy as np

from .catalog import list_catalog
from .entropy_lab import DEFAULT_EPSILONS, spanning_entropy_estimate, toral_automorphism, toral_entropy_exact
from .errors import ConfigError, GeodesicLabError
from .run_config import ReportBundle, RunConfig, load_config
from .runner import exit_status, run_config
from .utils import dumps_deterministic, format_verdict, resolve_output_dir

logger = logging.getLogger(__name__)

LOG_FORMAT = "[%(levelname)s] %(name)s: %(message)s"


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT, force=True)


def _print_bundle(bundle: ReportBundle) -> None:
    for verdict in bundle.verdicts:
        print(format_verdict(verdict.passed, verdict.label, verdict.measured, verdict.threshold))
    for error in bundle.errors:
        print(f"❌ Error: {error.get('kind')}: {error.get('error')}")
    if not bundle.verdicts and not bundle.errors:
        print("✅ No checks requested")


def _parse_tolerances(items: Optional[List[str]]) -> Dict[str, float]:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects CHECK=VALUE, got {item!r}", field="tol")
        try:
            out[name] = float(value)
        except ValueError:
            raise ConfigError(f"--tol value for {name!r} is not a number", field=f"tol.{name}") from None
    return out


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    bundle = asyncio.run(run_config(config))
    _print_bundle(bundle)
    return exit_status(bundle)


def cmd_catalog(args: argparse.Namespace) -> int:
    listing = list_catalog()
    if args.json:
        sys.stdout.write(dumps_deterministic(listing))
        return 0
    for entry in listing:
        print(f"{entry['key']:<20} {', '.join(entry['integrals']):<28} {entry['anchor']:<16} {entry['summary']}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    raw = {
        "schema_version": 1,
        "name": f"verify_{args.model}",
        "model": {"key": args.model},
        "verification": {"seed": args.seed, "tolerances": _parse_tolerances(args.tol)},
        "output": {"write_trajectories": False},
    }
    if args.t_end is not None:
        raw["integration"] = {"dt": args.dt, "t_end": args.t_end}
    try:
        config = RunConfig.model_validate(raw)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    bundle = asyncio.run(run_config(config))
    _print_bundle(bundle)
    return exit_status(bundle)


def cmd_entropy(args: argparse.Namespace) -> int:
    size = int(round(np.sqrt(len(args.entries))))
    if size * size != len(args.entries):
        raise ConfigError(f"need a square number of matrix entries, got {len(args.entries)}", field="entries")
    B = np.array(args.entries, dtype=float).reshape(size, size)
    exact = toral_entropy_exact(B)
    print(f"exact entropy ln(spectral radius) = {exact:.6f}")
    if args.estimate:
        estimate = spanning_entropy_estimate(toral_automorphism(B), DEFAULT_EPSILONS,
                                             range(args.horizon + 1), args.resolution)
        paths = estimate.write(resolve_output_dir())
        print(f"spanning-set estimate = {estimate.estimate}")
        print(f"artifacts: {json.dumps(paths, sort_keys=True)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Integrable geodesic flow lab")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    run_parser = subparsers.add_parser("run", help="Run a config file")
    run_parser.add_argument("config", help="Path to a JSON run config")
    run_parser.set_defaults(handler=cmd_run)

    catalog_parser = subparsers.add_parser("catalog", help="List catalog models")
    catalog_parser.add_argument("--json", action="store_true", help="Machine-readable listing")
    catalog_parser.set_defaults(handler=cmd_catalog)

    verify_parser = subparsers.add_parser("verify", help="Run the default checks of one model")
    verify_parser.add_argument("model", help="Catalog key")
    verify_parser.add_argument("--seed", type=int, default=0)
    verify_parser.add_argument("--tol", action="append", metavar="CHECK=VALUE")
    verify_parser.add_argument("--t-end", type=float, default=None, help="Also integrate up to this time")
    verify_parser.add_argument("--dt", type=float, default=1e-3)
    verify_parser.set_defaults(handler=cmd_verify)

    entropy_parser = subparsers.add_parser("entropy", help="Entropy of a toral automorphism")
    entropy_parser.add_argument("entries", nargs="+", type=float, help="Matrix entries, row-major")
    entropy_parser.add_argument("--estimate", action="store_true", help="Also run the spanning-set estimator")
    entropy_parser.add_argument("--resolution", type=int, default=512)
    entropy_parser.add_argument("--horizon", type=int, default=12)
    entropy_parser.set_defaults(handler=cmd_entropy)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    if not args.command:
        parser.print_help()
        return 0
    try:
        return args.handler(args)
    except ConfigError as e:
        print(f"❌ Config error: {e}")
        return 2
    except GeodesicLabError as e:
        print(f"❌ Error: {type(e).__name__}: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
