"""Command line entry point ``prover``.

    prover run --case loop --config cases.json [--order N] [--segments K] [--out DIR] [--jobs J]
    prover check results/loop/certificate.json
"""

import argparse
import logging
import os
import sys
import time

from . import kernels
from .runner import CASES, load_config, run_case


def _run(args):
    ok_all = True
    for case in args.case:
        cfg = load_config(args.config, case, order=args.order, segments=args.segments, jobs=args.jobs)
        outdir = os.path.join(args.out, case)
        ok, _ = run_case(cfg, outdir, backend=args.backend)
        ok_all &= ok
    return 0 if ok_all else 1


def _check(args):
    from .check import check_certificate

    ok_all = True
    for path in args.certificate:
        t0 = time.perf_counter()
        rep = check_certificate(path)
        for line in rep.lines():
            print(line)
        print(f"{'VERIFIED' if rep.ok else 'REJECTED'}: {path} ({time.perf_counter() - t0:.1f} s)")
        ok_all &= rep.ok
    return 0 if ok_all else 1


def build_parser():
    p = argparse.ArgumentParser(prog="prover", description="Validated heteroclinic curves for the Lomeli map")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one or more proofs")
    r.add_argument("--case", action="append", required=True, choices=CASES)
    r.add_argument("--config", default=None, help="JSON configuration (default: bundled cases.json)")
    r.add_argument("--order", type=int, default=None, help="chart order N")
    r.add_argument("--segments", type=int, default=None, help="number of seed segments")
    r.add_argument("--out", default="results", help="output directory")
    r.add_argument("--jobs", type=int, default=None, help="worker processes for segment evaluation")
    r.add_argument("--backend", choices=kernels.available(), default=None, help="Lohner kernel")
    r.set_defaults(func=_run)
    c = sub.add_parser("check", help="re-verify certificates from stored enclosures")
    c.add_argument("certificate", nargs="+")
    c.set_defaults(func=_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
