"""Command line entry point ``lowreg-em``.

Exit codes: 0 ok, 1 usage or config error, 2 runtime error, 3 gate failure (with --gate).
"""

from __future__ import annotations

import argparse
import sys
import traceback

from ..errors import ConfigError
from .config import EXPERIMENTS, load_config
from .experiments import TOOL, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_GATE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog=TOOL, description="Euler-Maruyama rate experiments for low-regularity drifts.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        cmd = sub.add_parser(name, help=f"run the {name} experiment")
        cmd.add_argument("--config", required=True, help="config file, or a manifest to replay")
        cmd.add_argument("--out", help="output directory (overrides output_dir)")
        cmd.add_argument("--gate", action="store_true", help="exit 3 if any acceptance gate fails")
        cmd.add_argument("--workers", type=int, default=1, help="worker processes (output does not depend on it)")
        cmd.add_argument("--plot", action="store_true", help="also write SVG plots")
        cmd.add_argument("--verbose", action="store_true", help="print tracebacks on runtime errors")
    plot = sub.add_parser("plot", help="render SVG plots for an existing results directory")
    plot.add_argument("--out", required=True, help="results directory holding a manifest")
    return parser


def _report(manifest):
    print(f"{manifest['experiment']}: status {manifest['status']}")
    for name, gate in manifest["gates"].items():
        print(f"  gate {name}: {'PASS' if gate['pass'] else 'FAIL'} (value {gate['value']}, threshold {gate['threshold']})")


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "plot":
        from .plotting import plot_results

        try:
            for path in plot_results(args.out):
                print(path)
        except (OSError, KeyError, ValueError) as exc:
            print(f"{TOOL}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        return EXIT_OK
    if args.workers < 1:
        print(f"{TOOL}: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = load_config(args.config, args.command)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"{args.config}: {problem}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"{TOOL}: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        manifest = run_experiment(config, args.out, args.workers)
        if args.plot:
            from .plotting import plot_results

            plot_results(args.out or config["output_dir"])
    except Exception as exc:  # noqa: BLE001 - any failure during a run maps to exit 2
        if args.verbose:
            traceback.print_exc()
        print(f"{TOOL}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _report(manifest)
    if args.gate and not manifest["all_gates_pass"]:
        return EXIT_GATE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
