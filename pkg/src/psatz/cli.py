"""Command-line interface.

    psatz prove <file> [options]     search for a certificate and emit outputs
    psatz check <file> --cert <json> re-verify a stored certificate exactly
    psatz parse <file>               parse and normalize only

<file> may be '-' for standard input.  Exit codes: 0 proved / check passed,
1 no certificate found / check failed, 2 usage or parse errors, 3 timeout.
The PSATZ_SDP_BACKEND environment variable sets the default --sdp-backend.
"""

from __future__ import annotations

import argparse
import os
import sys

from .driver import RunConfig, check, parse_only, prove


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="conjecture file, or - for stdin")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psatz",
        description="Search for Positivstellensatz refutation certificates, "
        "verify them in exact rational arithmetic, and emit proof scripts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("prove", help="search for a certificate")
    _add_common(pr)
    pr.add_argument("--max-degree", type=int, default=None,
                    help="cap on the degree escalation schedule")
    pr.add_argument("--max-cone-subset", type=int, default=2,
                    help="largest product of nonneg constraints in the cone")
    pr.add_argument("--max-monoid-power", type=int, default=2)
    pr.add_argument("--basis-cap", type=int, default=2000,
                    help="largest allowed monomial basis")
    pr.add_argument("--sdp-tol", type=float, default=1e-8)
    pr.add_argument("--denominator-max", type=int, default=2**64,
                    help="largest rounding denominator tried during recovery")
    pr.add_argument("--emit", choices=["proof", "certificate", "both", "none"],
                    default="both")
    pr.add_argument("--time-limit", type=float, default=60.0,
                    help="wall-clock seconds per conjecture")
    pr.add_argument("--sdp-backend",
                    default=os.environ.get("PSATZ_SDP_BACKEND", "builtin"),
                    help="builtin or external:<path-to-solver>")
    pr.add_argument("--parallel", action="store_true",
                    help="solve shapes concurrently; first success by shape order wins")
    pr.add_argument("--output-dir", default=None,
                    help="directory for emitted files (default: next to the input)")

    ch = sub.add_parser("check", help="re-verify a certificate JSON")
    _add_common(ch)
    ch.add_argument("--cert", required=True, help="certificate JSON file")

    pa = sub.add_parser("parse", help="parse and normalize only")
    _add_common(pa)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    if args.command == "prove":
        cfg = RunConfig(
            input_path=args.input,
            mode="prove",
            max_degree=args.max_degree,
            max_cone_subset=args.max_cone_subset,
            max_monoid_power=args.max_monoid_power,
            basis_cap=args.basis_cap,
            sdp_tol=args.sdp_tol,
            denominator_max=args.denominator_max,
            emit=args.emit,
            time_limit=args.time_limit,
            verbosity=args.verbose,
            sdp_backend=args.sdp_backend,
            parallel=args.parallel,
            output_dir=args.output_dir,
        )
        report = prove(cfg)
    elif args.command == "check":
        cfg = RunConfig(input_path=args.input, mode="check", cert_path=args.cert,
                        verbosity=args.verbose)
        report = check(cfg)
    else:
        cfg = RunConfig(input_path=args.input, mode="parse", verbosity=args.verbose)
        report = parse_only(cfg)

    for line in report.lines():
        print(line)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
