"""Command line front end for the experiment pipelines.

Verbs: ``reconstruct`` runs the full inverse pipeline, ``sweep`` the
frequency conditioning study, ``verify`` the structural property suite
and ``dump-operator`` writes one assembled matrix to disk.  The heavy
imports happen after argument parsing so the thread flag can pin the
linear-algebra pool before it starts.
"""
from __future__ import annotations

import argparse
import os
import sys


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lovebem",
        description="Equivalent-current reconstruction experiments")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON experiment config (defaults apply "
                        "when omitted)")
    common.add_argument("--out", metavar="DIR",
                        help="output directory override")
    common.add_argument("--tau", type=float, metavar="T",
                        help="pseudo-inversion threshold override")
    common.add_argument("--threads", type=int, metavar="N",
                        help="linear-algebra thread count")
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("reconstruct", parents=[common],
                   help="recover surface currents from synthetic "
                   "measurements")
    sub.add_parser("sweep", parents=[common],
                   help="condition numbers across a frequency sweep")
    verify = sub.add_parser("verify", parents=[common],
                            help="run the structural property suite")
    verify.add_argument("--check", action="append", metavar="NAME",
                        help="restrict to one named check (repeatable)")
    dump = sub.add_parser("dump-operator", parents=[common],
                          help="write an assembled operator matrix")
    dump.add_argument("--kind", default="system",
                      help="system, stabilized, coupling or gram")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error [config]: thread count must be positive",
                  file=sys.stderr)
            return 2
        for key in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[key] = str(args.threads)

    from . import experiments

    try:
        cfg = experiments.load_config(args.config, output_dir=args.out,
                                      threshold=args.tau)
        if args.verb == "reconstruct":
            artifacts = experiments.run_reconstruction(cfg)
            for name, path in sorted(artifacts.items()):
                print(f"{name}: {path}")
        elif args.verb == "sweep":
            print(f"condition_sweep: {experiments.run_frequency_sweep(cfg)}")
        elif args.verb == "verify":
            ledger = experiments.run_property_suite(cfg, names=args.check)
            for entry in ledger["checks"]:
                verdict = "PASS" if entry["passed"] else "FAIL"
                note = entry.get("error")
                if note is None:
                    note = f"metric {entry['metric']:.3e}"
                print(f"{verdict} {entry['name']} ({note})")
            print(f"ledger: {ledger['path']}")
            if not ledger["all_passed"]:
                return experiments.EXIT_CODES["check"]
        else:
            print(f"operator: {experiments.dump_operator(cfg, args.kind)}")
    except experiments.StageError as err:
        print(f"error [{err.stage}]: {err}", file=sys.stderr)
        return experiments.EXIT_CODES.get(err.stage, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
