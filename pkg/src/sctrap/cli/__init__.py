"""Batch command-line interface: ``toolkit <command> <config> [--out DIR] [--seed N]``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import ConfigError, DomainError
from .config import COMMANDS, RunConfig, UnitError, dump_config, parse_config
from .output import RunManifest, emit_plotdata
from .run import run

__all__ = ["COMMANDS", "RunConfig", "RunManifest", "UnitError", "dump_config",
           "emit_plotdata", "main", "parse_config", "run"]


def _parser():
    ap = argparse.ArgumentParser(prog="toolkit", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", help="TOML run configuration")
    ap.add_argument("--out", help="output directory (overrides [run] out_dir)")
    ap.add_argument("--seed", type=int, help="seed for stochastic steps (overrides [run] seed)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = None
    try:
        cfg = parse_config(args.config, args.command)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out:
            out = Path(args.out)
        elif cfg.out_dir:
            out = Path(args.config).parent / cfg.out_dir
        else:
            out = Path("toolkit_out") / args.command
        run(cfg, out)
    except DomainError as exc:
        print(f"toolkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        _report(out)
        return 1
    except ConfigError as exc:
        print(f"toolkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        _report(out)
        return 2
    _report(out)
    return 0


def _report(out):
    if out is not None and (out / "manifest.json").exists():
        print(out / "manifest.json")
