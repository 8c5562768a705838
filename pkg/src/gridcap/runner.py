"""Method dispatch, deviation metrics, and result files."""

from __future__ import annotations

import time
from pathlib import Path
from typing import Optional

import numpy as np

from .benders import BendersOptions, run_benders, run_classic_benders
from .formulation import assemble_monolithic, extract_dispatch
from .model import SystemCase, validate_case
from .report import (
    SolveReport,
    TraceRow,
    cost_breakdown,
    emit_trace,
    rps_share_achieved,
    total_emissions,
    write_report,
)
from .solver import SolveStatus

METHODS = ("monolithic", "benders", "benders-classic")


def _solve_monolithic(
    case: SystemCase, scenario: str, opts: BendersOptions
) -> SolveReport:
    t0 = time.perf_counter()
    asm = assemble_monolithic(case, scenario, relax=opts.relax)
    engine = opts.engine
    if opts.relax:
        sol = engine.solve_lp(asm.instance)
        if sol.status is not SolveStatus.OPTIMAL:
            raise RuntimeError(f"monolithic solve failed: {sol.status.value}")
        x, objective, bound = sol.x, sol.objective, sol.objective
    else:
        sol = engine.solve_milp(
            asm.instance, gap_tol=opts.rel_tol, node_limit=opts.node_limit
        )
        if sol.status is not SolveStatus.OPTIMAL:
            raise RuntimeError(f"monolithic solve failed: {sol.status.value}")
        x, objective, bound = sol.x, sol.objective, sol.bound
    wall_ms = (time.perf_counter() - t0) * 1e3
    y, x_w = asm.split(x)
    dispatch = extract_dispatch(asm.blocks, y, x_w)
    gap = (objective - bound) / max(1.0, abs(bound))
    return SolveReport(
        method="monolithic",
        scenario=asm.blocks.scenario,
        status="converged",
        objective=float(objective),
        costs=cost_breakdown(case, dispatch),
        weeks=case.time.weeks,
        weights=case.time.rho,
        dispatch=dispatch,
        trace=[
            TraceRow(
                iteration=1,
                elapsed_ms=wall_ms,
                ub=float(objective),
                lb=float(bound),
                gap=float(gap),
            )
        ],
        iterations=1,
        wall_ms=wall_ms,
        emissions_tons=total_emissions(case, dispatch),
        rps_share=rps_share_achieved(case, dispatch),
        workers=opts.workers,
    )


def run(
    method: str,
    case: SystemCase,
    scenario: str = None,
    opts: BendersOptions = None,
    out_dir=None,
    seed: Optional[int] = None,
) -> SolveReport:
    """Solve a case with one of the three methods and optionally export.

    ``out_dir`` receives ``report.json`` and ``trace.csv`` when given.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose one of {METHODS}")
    report = validate_case(case)
    if not report.ok:
        raise ValueError("invalid case: " + "; ".join(report.violations))
    opts = opts or BendersOptions()
    scenario = scenario or case.policy.scenario

    if method == "monolithic":
        rep = _solve_monolithic(case, scenario, opts)
    elif method == "benders":
        rep = run_benders(case, scenario, opts)
    else:
        rep = run_classic_benders(case, scenario, opts)
    rep.seed = seed

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report(rep, out / "report.json")
        emit_trace(rep, out / "trace.csv")
    return rep


def compute_capacity_mse(
    report_a: SolveReport,
    report_b: SolveReport,
    types: Optional[dict[str, str]] = None,
):
    """Root of summed squared capacity deviations between two reports.

    With ``types`` (cluster id to technology label) the deviation is
    grouped per label and a dict is returned. Despite the conventional
    name, no averaging is applied: the value is sqrt(sum of squares).
    """
    a = report_a.investments
    b = report_b.investments
    if set(a) != set(b):
        raise ValueError("reports cover different cluster sets")
    sq: dict[str, float] = {}
    for gid in a:
        d = a[gid]["power_mw"] - b[gid]["power_mw"]
        key = types.get(gid, "") if types is not None else ""
        sq[key] = sq.get(key, 0.0) + d * d
    if types is None:
        return float(np.sqrt(sq.get("", 0.0)))
    return {k: float(np.sqrt(v)) for k, v in sorted(sq.items())}
