"""Command-line interface: `donorspin simulate|sweep --config <yaml> --out <csv>`.

Exit codes: 0 success, 2 config error, 3 I/O error, 4 numerical failure,
1 anything else.  Errors print one line to stderr as `error[<category>]: ...`.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import RunConfig, load_config
from .errors import ConfigError, NumericalError
from .sweepio import run_single, run_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="donorspin",
        description="Simulate measurement backaction on donor nuclear-spin qubits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "run a single pulse and write a time-series CSV"),
        ("sweep", "run a parameter sweep and write a table CSV"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML configuration file")
        p.add_argument("--out", help="output CSV path (overrides output.csv in the config)")
        p.add_argument(
            "--oracle",
            action="store_true",
            help="add Monte Carlo trajectory cross-check columns",
        )
        p.add_argument("--seed", type=int, help="override the oracle seed (u64)")
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
        p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return parser


def _resolve_out(cfg: RunConfig, args) -> str:
    if args.out:
        return args.out
    if cfg.output_csv:
        return cfg.output_csv
    raise ConfigError("output.csv", "no output path: pass --out or set output.csv")


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed", "must fit in an unsigned 64-bit integer")
        cfg = load_config(args.config)
        out = _resolve_out(cfg, args)
        if args.command == "simulate":
            if cfg.sweep is not None:
                raise ConfigError("sweep", "section not allowed for `simulate`; use `sweep`")
            logger.info("simulate -> %s", out)
            run_single(cfg, out, oracle_enabled=args.oracle, seed_override=args.seed)
        else:
            if cfg.sweep is None:
                raise ConfigError("sweep", "section required for `sweep`")
            logger.info("sweep %s -> %s", cfg.sweep.axis.value, out)
            run_sweep(
                cfg,
                out,
                oracle_enabled=args.oracle,
                seed_override=args.seed,
                jobs=max(1, args.jobs),
            )
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"error[numeric]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error[internal]: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
