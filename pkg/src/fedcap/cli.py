"""Command-line entry point: ``fedcap --config PATH [--seed N] [--out DIR] [--force] [--sweep PATH]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError, NumericalError
from .harness import load_config, parse_grid, run, sweep


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fedcap", description="Run a FedCAP / baseline simulation.")
    p.add_argument("--config", required=True, type=Path, help="experiment config (INI)")
    p.add_argument("--seed", type=int, help="override [run] seed")
    p.add_argument("--out", type=Path, help="output directory (overrides [run] out_dir)")
    p.add_argument("--force", action="store_true", help="overwrite existing artifacts")
    p.add_argument("--sweep", type=Path, help="grid file with a [grid] section")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.replace(**{"run.seed": args.seed})
        out = args.out if args.out is not None else Path(cfg.out_dir)
        if args.sweep is not None:
            if not args.sweep.is_file():
                raise ConfigurationError(f"sweep file not found: {args.sweep}")
            index = sweep(cfg, parse_grid(args.sweep.read_text()), out, args.force)
            print(f"{len(index)} runs written under {out}")
        else:
            res = run(cfg, out, args.force)
            s = res.summary
            print(f"{out}: TAcc={s['tacc']} DAcc={s['dacc']} FPR={s['fpr']} FNR={s['fnr']}")
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
