"""Command-line entry point: ``mwlab <experiment> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .harness import (
    EXIT_VALIDATION,
    EXPERIMENTS,
    ConfigError,
    config_from_sources,
    run,
)


def _list(text: str) -> list[str]:
    return [t for t in text.split(",") if t]


def _ints(text: str) -> list[int | str]:
    out: list[int | str] = []
    for t in _list(text):
        try:
            out.append(int(t))
        except ValueError:
            out.append(t)  # left for config validation to report
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its entries")
    common.add_argument("--out", help="output table path (default: <experiment>.<format>)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--mode", choices=("exact", "asymptotic"))
    common.add_argument("--figure", help="also render a figure to this path")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mwlab", description="Branch-measure experiments for N-spin measurements.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, parents=[common])
        if name in ("maverick", "sweep", "decoherence", "ratefn", "selftest"):
            sp.add_argument("--n", type=_ints, help="spin count(s), comma separated")
        if name in ("maverick", "sweep", "envariance", "ratefn", "decoherence"):
            sp.add_argument("--p", help="|c+|^2 as num/den")
        if name in ("maverick", "sweep"):
            sp.add_argument("--epsilon", help="maverick threshold as num/den")
            sp.add_argument("--alpha", type=_list, help="measure exponents, comma separated")
            sp.add_argument("--comparison", choices=("strict", "inclusive"))
            sp.add_argument("--exact-cap", dest="exact_cap", type=int)
            sp.add_argument("--jobs", type=int)
        if name == "decoherence":
            sp.add_argument("--gamma", help="per-degree overlap as num/den")
        if name == "ratefn":
            sp.add_argument("--a", type=_list, help="plus frequencies in (1/2, 1), comma separated")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("experiment", "config", "verbose")
    }
    try:
        text = Path(args.config).read_text() if args.config else None
        cfg = config_from_sources(text, overrides, args.experiment)
    except OSError as exc:
        logging.error("cannot read config: %s", exc)
        return EXIT_VALIDATION
    except ConfigError as exc:
        for err in exc.errors:
            logging.error("%s", err)
        return EXIT_VALIDATION
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
