"""Command-line entry point: ``chlab --config run.json --out DIR``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, load_config
from .runner import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, OutputError, run

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="chlab",
        description="Run a Camassa-Holm laboratory experiment described by a JSON config.",
    )
    ap.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
    ap.add_argument("--out", required=True, metavar="DIR", help="output directory (created if missing)")
    ap.add_argument("--workers", type=int, default=1, metavar="N", help="parallel sweep children")
    ap.add_argument("--seed", type=int, default=None, metavar="N",
                    help="seed for randomized suites (overrides the config)")
    ap.add_argument("--fail-on-breaking", action="store_true",
                    help="stop and exit 2 once min u_x falls below the breaking threshold")
    ap.add_argument("--plot", action="store_true", help="also write PNG figures (needs matplotlib)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        outcome = run(cfg, args.out, workers=args.workers, fail_on_breaking=args.fail_on_breaking,
                      plot=args.plot, seed=args.seed)
    except (ConfigError, OutputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps({"status": outcome.status, "out": str(outcome.out_dir),
                      "figures": outcome.figures}, sort_keys=True))
    return outcome.status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
