"""Phase scan: median MSPE against m at fixed n, with the detected plateau.

Usage: python scripts/phase_scan.py [--config configs/phase_scan.toml] [--out DIR] [--workers N]
"""
import argparse
from pathlib import Path

from clusterfit.harness import run_config

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "phase_scan.toml")
    ap.add_argument("--out", type=Path, default=None, help="defaults to a folder beside the config")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    for path in run_config(args.config, args.out, args.workers, only="phase_scan"):
        print(path)


if __name__ == "__main__":
    main()
