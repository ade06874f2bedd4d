"""Command-line entry point: ``sixvertex --experiment E3 --out e3.csv``."""
from __future__ import annotations

import argparse
import sys

from ..core import ConfigInvalid, IoError, SixVertexError
from .config import KINDS, default_config, load_config
from .experiments import run_with_series
from .io import all_passed, emit, emit_series, format_records


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sixvertex",
                                 description="Run a stochastic six-vertex verification experiment.")
    ap.add_argument("--experiment", type=str.upper, choices=KINDS,
                    help="experiment id (overrides the config file)")
    ap.add_argument("--config", help="INI configuration file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--replicas", type=int)
    ap.add_argument("--out", help="output file; '-' writes to stdout")
    ap.add_argument("--format", choices=("csv", "jsonl"))
    return ap


def summary_lines(records, cfg) -> list[str]:
    tol = ", ".join(f"{k}={v:g}" for k, v in sorted(cfg.tolerances.items())) or "exact"
    lines = [f"# {cfg.kind} seed={cfg.seed} replicas={cfg.replicas} config={cfg.hash} tolerances: {tol}"]
    for r in records:
        lines.append(f"{'PASS' if r.passed else 'FAIL'} {r.experiment} N={r.N} {r.statistic} "
                     f"value={r.value:.9f} target={r.target:.9f} sigma={r.sigma:.9f}")
    return lines


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    over = dict(seed=args.seed, replicas=args.replicas, out=args.out, format=args.format)
    try:
        if args.config:
            cfg = load_config(args.config, kind=args.experiment, **over)
        elif args.experiment:
            cfg = default_config(args.experiment, **{k: v for k, v in over.items() if v is not None})
        else:
            ap.error("need --experiment or --config")
        records, series = run_with_series(cfg)
        if cfg.out in ("", "-"):
            sys.stdout.write(format_records(records, cfg.format, cfg.timing))
        else:
            emit(records, cfg.out, cfg.format, cfg.timing)
        if cfg.plot and series:
            emit_series(series, cfg.plot)
    except ConfigInvalid as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (IoError, SixVertexError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    for line in summary_lines(records, cfg):
        print(line, file=sys.stderr)
    return 0 if all_passed(records) else 1


if __name__ == "__main__":
    sys.exit(main())
