"""Command line entry point.

Exit codes: 0 when the solve converged, 2 when the iteration budget ran
out first, 1 on any error. Environment variables are never consulted;
every knob is a flag for reproducible invocations.
"""

from __future__ import annotations

import argparse
import sys

from .benders import BendersOptions
from .caseio import CaseError, load_case, select_weeks
from .runner import METHODS, compute_capacity_mse, run


def _parse_weeks(spec: str) -> tuple[list[int], list[float]]:
    weeks: list[int] = []
    weights: list[float] = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        wid, _, weight = part.partition(":")
        if not weight:
            raise ValueError(
                f"--weeks entry {part!r} must look like id:hours, e.g. 3:2184"
            )
        weeks.append(int(wid))
        weights.append(float(weight))
    return weeks, weights


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gridcap",
        description="Capacity expansion planning via monolithic or Benders solves.",
    )
    p.add_argument("case", help="case bundle directory")
    p.add_argument("--method", choices=METHODS, default="benders")
    p.add_argument(
        "--scenario",
        choices=["ref", "rps", "co2"],
        default=None,
        help="override the manifest scenario",
    )
    p.add_argument(
        "--weeks",
        default=None,
        help="subperiod selection as comma-separated id:hours pairs",
    )
    p.add_argument(
        "--relax", action="store_true", help="drop integrality on investments"
    )
    p.add_argument("--tol", type=float, default=1e-3, help="relative gap tolerance")
    p.add_argument("--kmax", type=int, default=1000, help="iteration budget")
    p.add_argument("--workers", type=int, default=1, help="subproblem worker count")
    p.add_argument("--seed", type=int, default=None, help="recorded in the report")
    p.add_argument("--out", default=None, help="directory for report.json and trace.csv")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        case = load_case(args.case)
        if args.weeks:
            weeks, weights = _parse_weeks(args.weeks)
            case = select_weeks(case, weeks, weights)
        opts = BendersOptions(
            rel_tol=args.tol,
            k_max=args.kmax,
            workers=args.workers,
            relax=args.relax,
        )
        rep = run(
            args.method,
            case,
            scenario=args.scenario,
            opts=opts,
            out_dir=args.out,
            seed=args.seed,
        )
    except (CaseError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(
        f"{rep.method} {rep.scenario}: {rep.status}, "
        f"objective {rep.objective:.6g} USD in {rep.iterations} iteration(s), "
        f"{rep.wall_ms:.0f} ms"
    )
    c = rep.costs
    print(
        f"  costs: fixed {c.fixed:.6g}, variable {c.variable:.6g}, "
        f"nse {c.nse:.6g}, startup {c.startup:.6g}, policy {c.policy_penalty:.6g}"
    )
    print(
        f"  emissions {rep.emissions_tons:.6g} t, renewable share {rep.rps_share:.4f}"
    )
    if args.out:
        print(f"  wrote {args.out}/report.json and {args.out}/trace.csv")
    return 0 if rep.status == "converged" else 2


if __name__ == "__main__":
    sys.exit(main())
