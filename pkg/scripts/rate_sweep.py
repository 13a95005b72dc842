"""Rate sweep: median MSPE against nm and its fitted log-log slope.

Usage: python scripts/rate_sweep.py [--config configs/rate_sweep_spline.toml] [--out DIR] [--workers N]
"""
import argparse
from pathlib import Path

from clusterfit.harness import run_config

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "rate_sweep_spline.toml")
    ap.add_argument("--out", type=Path, default=None, help="defaults to a folder beside the config")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    for path in run_config(args.config, args.out, args.workers, only="rate_sweep"):
        print(path)


if __name__ == "__main__":
    main()
