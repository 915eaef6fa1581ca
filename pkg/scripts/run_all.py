"""Run every config in configs/ and print a one-line gate summary per experiment.

Usage: python3 scripts/run_all.py [--out results] [--workers N] [--plot] [names...]
"""

import argparse
import sys
import time
from pathlib import Path

from lowreg_em.harness.config import load_config
from lowreg_em.harness.experiments import run_experiment
from lowreg_em.harness.plotting import plot_results

ROOT = Path(__file__).resolve().parent.parent


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("names", nargs="*", help="config stems to run (default: all)")
    parser.add_argument("--out", default=str(ROOT / "results"))
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--plot", action="store_true")
    args = parser.parse_args()

    paths = sorted((ROOT / "configs").glob("*.cfg"))
    if args.names:
        paths = [p for p in paths if p.stem in args.names]
    failed = 0
    for path in paths:
        start = time.perf_counter()
        config = load_config(str(path))
        out = Path(args.out) / path.stem
        manifest = run_experiment(config, str(out), args.workers)
        if args.plot:
            plot_results(str(out))
        gates = ", ".join(f"{k}={'ok' if g['pass'] else 'FAIL'}" for k, g in manifest["gates"].items())
        failed += not manifest["all_gates_pass"]
        print(f"{path.stem:28s} {manifest['status']:12s} {time.perf_counter() - start:7.1f} s  {gates}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
