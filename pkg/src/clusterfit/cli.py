"""``clusterfit <command> --config <path> [--out <dir>] [--workers N]``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import funclass, harness
from .io import load_config

FIT_FLAGS = {  # flag -> (estimator key, type)
    "estimator": ("kind", str), "L": ("L", int), "W": ("W", int), "beta": ("beta", float),
    "k": ("k", int), "r": ("r", int), "box_bound": ("box_bound", float),
    "optimizer": ("optimizer", str), "lr": ("lr", float), "epochs": ("epochs", int),
    "batch_size": ("batch_size", int), "restarts": ("restarts", int), "patience": ("patience", int),
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clusterfit")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("generate", "rate-sweep", "phase-scan", "approx-bench", "gamma", "fit"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name != "fit", type=Path)
        sp.add_argument("--out", type=Path)
        sp.add_argument("--workers", type=int, default=1)
    fit = sub.choices["fit"]
    fit.add_argument("--dataset", type=Path)
    fit.add_argument("--model", help="output model file name inside --out")
    fit.add_argument("--report", help="output report file name inside --out")
    fit.add_argument("--seed", type=int)
    fit.add_argument("--estimator", choices=("mlp", "spline"))
    for flag, (_, typ) in FIT_FLAGS.items():
        if flag != "estimator":
            fit.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=typ)
    return p


def _fit(args) -> list[Path]:
    blk = {}
    base = Path(".")
    if args.config is not None:
        cfg = load_config(args.config)
        if "fit" not in cfg:
            raise ValueError("missing key fit")
        blk = dict(cfg["fit"])
        base = args.config.parent
    if args.dataset is not None:
        blk["dataset"] = str(args.dataset.resolve())
    est = dict(blk.get("estimator", {}))
    for flag, (key, _) in FIT_FLAGS.items():
        val = getattr(args, flag)
        if val is not None:
            est[key] = val
    blk["estimator"] = est
    for key in ("model", "report", "seed"):
        if getattr(args, key) is not None:
            blk[key] = getattr(args, key)
    out = args.out or Path(".")
    return harness.run_fit(blk, out, base)


def _gamma(args) -> None:
    cfg = load_config(args.config)
    blk = cfg.get("gamma", cfg)
    if "tree" not in blk:
        raise ValueError("missing key gamma.tree")
    header, rows = harness.gamma_rows(funclass.CompositionTree.from_config(blk["tree"]))
    print(",".join(header))
    for row in rows:
        print(",".join(harness.fmt(v) for v in row))
    if args.out is not None:
        harness.run_gamma(blk, args.out)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "fit":
            written = _fit(args)
        elif args.command == "gamma":
            _gamma(args)
            return 0
        else:
            written = harness.run_config(args.config, args.out, args.workers,
                                         only=args.command.replace("-", "_"))
    except (ValueError, KeyError, FileNotFoundError) as e:
        print(f"clusterfit: error: {e}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
