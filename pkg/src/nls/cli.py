"""Command-line entry point: `nls <subcommand>`.

Exit codes: 0 success, 1 configuration error, 2 run failure,
3 acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import __version__
from .config import ConfigError, load_config
from .exponents import (
    InfeasibleExponentError,
    ModelParams,
    critical_exponents,
    smallest_valid_a,
    strichartz_indices,
)
from .oracle import SelfSimilarParams, classify, reduced_trajectory

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUN = 2
EXIT_ACCEPT = 3


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nls",
        description="Pseudospectral NLS simulator and verification suite",
    )
    ap.add_argument("--version", action="version", version=f"nls {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    for name in ("simulate", "sweep", "pct-check"):
        sp = sub.add_parser(name, help=f"run a {name} experiment from a config file")
        sp.add_argument("--config", required=True, help="experiment config file")
        sp.add_argument(
            "--gnuplot", action="store_true",
            help="also emit a ready-to-run gnuplot script next to the CSV",
        )

    se = sub.add_parser("exponents", help="print the derived-exponent table")
    se.add_argument("--dim", type=int, required=True)
    se.add_argument("--alpha", type=float, default=None)
    se.add_argument("--a", type=float, default=None, dest="a_index")
    se.add_argument("--kappa-re", type=float, default=0.0)
    se.add_argument("--kappa-im", type=float, default=0.0)
    se.add_argument("--format", choices=("table", "json"), default="table")

    so = sub.add_parser("oracle", help="classify a self-similar reduced flow")
    so.add_argument("--kappa-re", type=float, default=0.0)
    so.add_argument("--kappa-im", type=float, required=True)
    so.add_argument("--alpha", type=float, required=True)
    so.add_argument("--dim", type=int, required=True)
    so.add_argument("--t0", type=float, required=True)
    so.add_argument("--z0", type=float, required=True, help="|z(0)|")
    so.add_argument("--trace", default=None, help="write a CSV trace (t, abs_z, arg_z)")

    sa = sub.add_parser("accept", help="run the acceptance suite")
    sa.add_argument("--filter", default=None, help="substring filter on criterion names")
    return ap


def _cmd_exponents(args) -> int:
    alpha = args.alpha if args.alpha is not None else 1.0 / args.dim  # placeholder
    model = ModelParams(
        dim=args.dim, alpha=alpha, kappa=complex(args.kappa_re, args.kappa_im)
    )
    report = critical_exponents(model)
    if args.alpha is not None and args.dim >= 3:
        if report.alpha2 < alpha < report.mass_critical:
            a = args.a_index if args.a_index is not None else smallest_valid_a(model)
            report = strichartz_indices(model, a)
    d = report.as_dict()
    if args.alpha is None:  # thresholds only: alpha-dependent entries are moot
        d["alpha"] = None
        d["flags"]["alpha_in_scattering_window"] = None
        d["flags"]["gradient_monotone_condition"] = None
    if args.format == "json":
        print(json.dumps(d, indent=2))
        return EXIT_OK
    width = max(len(k) for k in d if k != "flags")
    for key, val in d.items():
        if key == "flags":
            continue
        if val is None:
            txt = "-"
        elif isinstance(val, float) and math.isinf(val):
            txt = "inf"
        elif isinstance(val, float):
            txt = f"{val:.10g}"
        else:
            txt = str(val)
        print(f"{key:<{width}}  {txt}")
    for key, val in d["flags"].items():
        print(f"{'flag ' + key:<{width + 5}}  {'-' if val is None else val}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    model = ModelParams(
        dim=args.dim, alpha=args.alpha, kappa=complex(args.kappa_re, args.kappa_im)
    )
    p = SelfSimilarParams(t0=args.t0, z0=complex(args.z0, 0.0), model=model)
    verdict = classify(p)
    print(f"classification: {verdict.classification.value}")
    if verdict.blowup_time is not None:
        print(f"blowup_time: {verdict.blowup_time!r}")
    if args.trace:
        T = verdict.blowup_time
        t_max = 0.999 * T if T is not None else 10.0 * args.t0
        ts = [i * t_max / 200 for i in range(201)]
        with open(args.trace, "w") as f:
            f.write("t,abs_z,arg_z\n")
            for t in ts:
                z = reduced_trajectory(p, t)
                f.write(f"{t!r},{abs(z)!r},{math.atan2(z.imag, z.real)!r}\n")
        print(f"trace written to {args.trace}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "exponents":
            return _cmd_exponents(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        if args.command == "accept":
            from .acceptance import run_acceptance_suite

            results = run_acceptance_suite(name_filter=args.filter)
            if not results:
                print(f"no criteria match filter {args.filter!r}", file=sys.stderr)
                return EXIT_CONFIG
            return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPT
        # config-file commands
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        from .config import ExperimentKind
        from .harness import run_experiment

        forced = {
            "simulate": None,  # single or any run-style kind from the file
            "sweep": ExperimentKind.SWEEP,
            "pct-check": ExperimentKind.PCT_CHECK,
        }[args.command]
        if forced is not None and cfg.kind is not forced:
            import dataclasses

            cfg = dataclasses.replace(cfg, kind=forced)
        return run_experiment(cfg, gnuplot=args.gnuplot)
    except (ConfigError, InfeasibleExponentError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"run failure: {exc}", file=sys.stderr)
        return EXIT_RUN
    except ArithmeticError as exc:
        print(f"run failure: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
