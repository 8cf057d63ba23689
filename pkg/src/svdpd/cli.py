"""Command line: ``svdpd {kubo,dpd-sweep,dpd-single} --config FILE``.

Exit status is 0 on success, 2 for invalid input and 3 when an integration
fails (for a sweep: when any point failed, after the rest have run).
"""

import argparse
import logging
import sys

from .config import parse_config
from .errors import IntegrationError, ParameterError, SingularConfigurationError, SvdpdError, \
    UnsupportedModelError
from .experiments import run_dpd_single, run_dpd_sweep, run_kubo_experiment

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

_COMMANDS = {
    "kubo": ("kubo", run_kubo_experiment),
    "dpd-sweep": ("dpd_sweep", run_dpd_sweep),
    "dpd-single": ("dpd_single", run_dpd_single),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="svdpd", description="Stochastic Verlet integrators for DPD.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "kubo": "ensemble-mean energy of the Kubo oscillator against the exact expectation",
        "dpd-sweep": "equilibrium temperature error over schemes and time steps",
        "dpd-single": "one DPD run with temperature series and optional XYZ frames",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--seed", type=int, help="override [run] seed")
        p.add_argument("--output", help="override [run] output_dir")
        p.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
        p.add_argument("--profile", choices=("desk", "paper"), help="override [run] profile")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    experiment, runner = _COMMANDS[args.command]
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = parse_config(args.config, {"seed": args.seed, "output_dir": args.output,
                                         "profile": args.profile, "experiment": experiment})
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        result = runner(cfg, threads=args.threads)
    except (IntegrationError, SingularConfigurationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ParameterError, UnsupportedModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SvdpdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if experiment == "dpd_sweep":
        failed = [r for r in result if r["status"] != "ok"]
        if failed:
            print(f"{len(failed)} of {len(result)} sweep points failed; see dpd_sweep.csv", file=sys.stderr)
            return EXIT_NUMERICAL
    print(f"wrote results to {cfg.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
