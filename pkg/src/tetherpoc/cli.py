"""Command-line front end.

Example::

    tetherpoc assess --input case1 --estimators std,chaos --seed 0 --out r.json --plot r.svg
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from tetherpoc import __version__
from tetherpoc.assessment import ESTIMATORS, RiskReport, assess
from tetherpoc.estimators import OptimizerOptions
from tetherpoc.files import bundled_event_path, parse_event, report_to_document, write_report
from tetherpoc.gaussian import DEFAULT_ABS_TOL
from tetherpoc.svg import render_svg
from tetherpoc.verification import (
    DEFAULT_SIGMAS,
    ConfigDistribution,
    check_upper_bound,
    mc_poc_region,
    mc_poc_union,
    wedge_slack,
)

log = logging.getLogger("tetherpoc")

EXIT_OK, EXIT_ERROR, EXIT_UNAVAILABLE = 0, 1, 2


def _resolve_input(arg: str) -> Path:
    path = Path(arg)
    if path.exists():
        return path
    bundled = bundled_event_path(arg)
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"no such event file: {arg}")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.split(",") if s.strip())


def verify_report(report: RiskReport, mode: str, n_samples: int, seed: int) -> dict:
    """Monte Carlo cross-checks of every reported estimate.

    Chain estimates are compared with the exact-union oracle on the
    interval ``[raw - 3 stderr - wedge slack, raw]``; the std disk on
    ``value +/- 3 stderr``. In ``full`` mode the chaos value is also checked
    as an upper bound of configuration-averaged PoC for three families.
    """
    event = report.event
    out = {"mode": mode, "mc_samples": n_samples, "seed": seed, "oracles": {}}
    for name, est in report.estimates.items():
        if est.chain is None:
            radius = float(est.diagnostics["disk_radius_m"])
            mc = mc_poc_region(lambda p: np.hypot(p[:, 0], p[:, 1]) <= radius, event.gaussian, n_samples, seed)
            lo = est.value - DEFAULT_SIGMAS * mc.stderr
            hi = est.value + DEFAULT_SIGMAS * mc.stderr
            out["oracles"][name] = {"mc": mc.to_dict(), "interval": [lo, hi], "within_interval": lo <= mc.p_hat <= hi}
            continue
        mc = mc_poc_union(est.chain, event, n_samples, seed)
        slack = wedge_slack(est.chain, event)
        lo = est.raw - DEFAULT_SIGMAS * mc.stderr - slack
        out["oracles"][name] = {
            "mc": mc.to_dict(),
            "raw_value": est.raw,
            "wedge_slack": slack,
            "interval": [lo, est.raw],
            "within_interval": lo <= mc.p_hat <= est.raw,
        }

    chaos = report.estimates.get("chaos")
    if mode == "full" and chaos is not None:
        families = [ConfigDistribution("uniform", n_segments=4)]
        if event.q_planar is not None:
            families.append(ConfigDistribution("ellipse", n_segments=4, q=event.q_planar))
        families.append(ConfigDistribution("fixed", chain=chaos.chain))
        per_config = max(1000, n_samples // 20)
        out["upper_bound"] = [
            check_upper_bound(event, dist, chaos=chaos, n_configs=20, n_samples=per_config, seed=seed).to_dict()
            for dist in families
        ]
    return out


def run_assess(args) -> int:
    explicit = args.estimators is not None
    selection = args.estimators or ",".join(ESTIMATORS)
    event = parse_event(_resolve_input(args.input))
    opts = OptimizerOptions(
        seed=args.seed,
        starts_per_n=args.starts,
        segment_grid=args.segments,
        abs_tol=args.tol,
    )
    report = assess(event, opts, selection)
    if args.verify != "none":
        report.verification = verify_report(report, args.verify, args.mc_samples, args.seed)

    write_report(report, args.out)
    if args.plot:
        render_svg(report_to_document(report), args.plot)

    for name, est in report.estimates.items():
        print(f"{name:>7s}  PoC = {est.value:.6g}")
    for name, reason in report.unavailable.items():
        print(f"{name:>7s}  unavailable ({reason})")
    if report.ordering is not None and report.ordering.checks:
        print(f"ordering check: {'pass' if report.ordering.passed else 'FAIL'}")

    requested = {s.strip() for s in selection.split(",")}
    if explicit and requested & set(report.unavailable):
        return EXIT_UNAVAILABLE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tetherpoc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("assess", help="compute PoC estimates for one event file")
    a.add_argument("--input", required=True, help="event file, or a bundled example name (case1, case2, synthetic_full)")
    a.add_argument("--out", required=True, help="report file (JSON)")
    a.add_argument("--plot", help="write an SVG of the conjunction plane")
    a.add_argument("--estimators", help=f"comma list from {','.join(ESTIMATORS)} (default: all available)")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--starts", type=int, default=OptimizerOptions.starts_per_n, help="random starts per segment count")
    a.add_argument(
        "--segments", type=_int_list, default=OptimizerOptions.segment_grid, help="comma list of bar counts N"
    )
    a.add_argument("--mc-samples", type=int, default=1_000_000)
    a.add_argument("--verify", choices=("none", "mc", "full"), default="none")
    a.add_argument("--tol", type=float, default=DEFAULT_ABS_TOL, help="absolute tolerance of the Gaussian integrals")
    a.set_defaults(func=run_assess)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
