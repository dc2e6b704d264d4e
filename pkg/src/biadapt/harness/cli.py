"""``biadapt gen|train|run-matrix|report``; exit 0 on success, 2 on configuration errors, 3 on data errors."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from ..errors import BiAdaptError, ConfigError
from .config import DEFAULT_CONFIG, ExperimentConfig, load_config
from .pipeline import run_gen, run_matrix, run_train
from .report import run_report

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biadapt", description=__doc__)
    p.add_argument("command", choices=("gen", "train", "run-matrix", "report"))
    p.add_argument("--config", help="key = value experiment file (defaults apply when omitted)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--task", help="restrict to one task")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--rows", help="report: rows CSV to read (default <out>/rows.csv)")
    p.add_argument("--no-plots", action="store_true", help="report: skip the PNG figures")
    p.add_argument("--quiet", action="store_true")
    return p


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else DEFAULT_CONFIG
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.out is not None:
        over["out"] = args.out
    if args.task is not None:
        over["tasks"] = (args.task,)
    if over:
        try:
            cfg = replace(cfg, **over)
        except BiAdaptError as exc:
            raise ConfigError(exc.code, str(exc)) from exc
    return cfg


def dispatch(args) -> None:
    cfg = resolve_config(args)
    out = Path(cfg.out)
    if args.command == "gen":
        _, lines = run_gen(cfg, args.quiet)
        print("\n".join(lines))
    elif args.command == "train":
        for task, n_tr, n_ho, acc in run_train(cfg, args.quiet):
            print(f"{task}: trained on {n_tr}, C2 balanced accuracy {acc:.3f} on {n_ho} held out")
    elif args.command == "run-matrix":
        _, eff = run_matrix(cfg, args.quiet)
        print(f"wrote {out / 'rows.csv'} and {out / 'efficiency.csv'} ({len(eff)} curve points)")
    else:
        rows = Path(args.rows) if args.rows else out / "rows.csv"
        table = run_report(rows, out / "report", out / "overlays", plots=not args.no_plots)
        sys.stdout.write(table)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BiAdaptError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
