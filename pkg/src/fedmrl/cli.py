"""Command-line entry point.

Subcommands:
  run        one experiment -> metrics.csv, summary.json, manifest.json
  landscape  export the fairness-penalty curve as CSV
  sweep      algorithms x seeds grid -> per-run outputs + comparison.csv

Exit codes: 0 success, 2 configuration error, 3 divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import parse_config, validate_algos
from .errors import (
    ConfigurationError,
    DivergenceError,
    InputError,
    ParseError,
    ValidationError,
)
from .orchestrator import run_experiment
from .reporting import MetricsWriter, emit_landscape, write_manifest, write_summary

_CONFIG_ERRORS = (ConfigurationError, InputError, ParseError, ValidationError)


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _run_single(cfg, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    started = _timestamp()
    writer = MetricsWriter(out_dir / "metrics.csv", cfg.clients)
    try:
        result = run_experiment(cfg, on_record=writer.write)
    finally:
        writer.close()
    summary = write_summary(result.records, out_dir / "summary.json", result.final_confusion)
    write_manifest(cfg, out_dir / "manifest.json", started, _timestamp())
    return summary


def cmd_run(args) -> int:
    overrides = {"algo": args.algo, "seed": args.seed}
    cfg = parse_config(args.config, overrides)
    summary = _run_single(cfg, Path(args.out))
    print(
        f"algo={cfg.algo} seed={cfg.seed} rounds={summary['rounds']} "
        f"final_acc={summary['accuracy']:.4f} final_loss={summary['loss']:.4f}"
    )
    return 0


def cmd_landscape(args) -> int:
    emit_landscape(args.total, args.n, args.out)
    print(f"wrote {args.n} landscape points to {args.out}")
    return 0


def cmd_sweep(args) -> int:
    algos = validate_algos(args.algos.split(","))
    if args.seeds < 1:
        raise ConfigurationError("--seeds must be >= 1")
    base = parse_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for algo in algos:
        for offset in range(args.seeds):
            cfg = replace(base, algo=algo, seed=base.seed + offset)
            summary = _run_single(cfg, out_dir / f"{algo}_seed{cfg.seed}")
            rows.append(
                (
                    algo,
                    str(cfg.seed),
                    summary["accuracy"],
                    summary["loss"],
                    summary["loss_variance"],
                    summary["macro_f1"],
                )
            )
            print(f"{algo} seed={cfg.seed}: final_acc={summary['accuracy']:.4f}")

    with open(out_dir / "comparison.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("algo,seed,final_acc,final_loss,loss_variance,macro_f1\n")
        for row in rows:
            fh.write(",".join([row[0], row[1], *[repr(float(v)) for v in row[2:]]]) + "\n")
        for algo in algos:
            block = np.array([row[2:] for row in rows if row[0] == algo], dtype=np.float64)
            means = block.mean(axis=0)
            fh.write(",".join([algo, "mean", *[repr(float(v)) for v in means]]) + "\n")
    print(f"wrote comparison table to {out_dir / 'comparison.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedmrl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment")
    run_p.add_argument("--config", default=None, help="path to a key=value config file")
    run_p.add_argument("--algo", default=None, help="override the algorithm")
    run_p.add_argument("--seed", type=int, default=None, help="override the master seed")
    run_p.add_argument("--out", default=".", help="output directory")
    run_p.set_defaults(fn=cmd_run)

    land_p = sub.add_parser("landscape", help="export the fairness-penalty curve")
    land_p.add_argument("--total", type=float, required=True, help="fixed total loss")
    land_p.add_argument("--n", type=int, required=True, help="grid points")
    land_p.add_argument("--out", required=True, help="output CSV path")
    land_p.set_defaults(fn=cmd_landscape)

    sweep_p = sub.add_parser("sweep", help="compare algorithms across seeds")
    sweep_p.add_argument("--algos", required=True, help="comma-separated algorithm names")
    sweep_p.add_argument("--seeds", type=int, required=True, help="number of seeds per algorithm")
    sweep_p.add_argument("--config", default=None, help="base config file")
    sweep_p.add_argument("--out", required=True, help="output directory")
    sweep_p.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _CONFIG_ERRORS as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
