"""Solve reports: cost accounting, policy metrics, and file export."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .formulation import Dispatch
from .model import SystemCase


@dataclass(frozen=True)
class CostBreakdown:
    """Objective split into its five accounting categories."""

    fixed: float
    variable: float
    nse: float
    startup: float
    policy_penalty: float

    @property
    def total(self) -> float:
        return self.fixed + self.variable + self.nse + self.startup + self.policy_penalty

    def as_dict(self) -> dict:
        return {
            "fixed": self.fixed,
            "variable": self.variable,
            "nse": self.nse,
            "startup": self.startup,
            "policy_penalty": self.policy_penalty,
            "total": self.total,
        }


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    elapsed_ms: float
    ub: float
    lb: float
    gap: float
    sub_ms: dict[int, float] = field(default_factory=dict)


@dataclass(eq=False)
class SolveReport:
    """Machine-readable outcome of one planning solve."""

    method: str
    scenario: str
    status: str  # converged | non-converged | error
    objective: float
    costs: CostBreakdown
    weeks: tuple[int, ...]
    weights: tuple[float, ...]
    dispatch: Dispatch
    trace: list[TraceRow]
    iterations: int
    wall_ms: float
    emissions_tons: float
    rps_share: float
    workers: int = 1
    seed: Optional[int] = None

    @property
    def investments(self) -> dict:
        return self.dispatch.investments

    @property
    def line_investments(self) -> dict:
        return self.dispatch.line_investments


def cost_breakdown(case: SystemCase, d: Dispatch) -> CostBreakdown:
    """Recompute the objective by category from a dispatch."""
    alpha = case.time.alpha_array()
    fixed = 0.0
    for g in case.clusters:
        inv = d.investments[g.id]
        fixed += g.inv_cost_per_mw_yr * g.unit_size_mw * inv["new_units"]
        fixed += g.fom_cost_per_mw_yr * inv["power_mw"]
        if g.is_hydro:
            hy = g.hydro
            fixed += (
                hy.energy_inv_cost_per_mwh_yr
                * hy.duration_h
                * g.unit_size_mw
                * inv["new_units"]
            )
            fixed += hy.energy_fom_cost_per_mwh_yr * hy.duration_h * inv["power_mw"]
        if g.is_storage:
            st = g.storage
            fixed += (
                st.energy_inv_cost_per_mwh_yr
                * st.unit_energy_mwh
                * inv["energy_new_units"]
            )
            fixed += st.energy_fom_cost_per_mwh_yr * inv["energy_mwh"]
    for l in case.lines:
        fixed += l.cost_per_mw_yr * d.line_investments[l.id]["new_mw"]

    variable = 0.0
    for g in case.clusters:
        variable += g.var_cost_per_mwh * float(alpha @ d.gen[g.id])
        if g.is_storage:
            variable += g.var_cost_per_mwh * float(alpha @ d.charge[g.id])

    nse = 0.0
    for s in case.segments:
        for z in case.zones:
            nse += s.cost_per_mwh * float(alpha @ d.nse[(s.id, z)])

    startup = 0.0
    for g in case.uc_clusters:
        startup += g.startup_cost * float(alpha @ d.start[g.id])

    penalty_rate = {
        "rps": case.policy.penalty_rps,
        "co2": case.policy.penalty_co2,
    }.get(case.policy.scenario, 0.0)
    policy = penalty_rate * sum(d.slack.values())

    return CostBreakdown(
        fixed=fixed, variable=variable, nse=nse, startup=startup, policy_penalty=policy
    )


def total_emissions(case: SystemCase, d: Dispatch) -> float:
    """Weighted CO2 emissions in tons over the represented year."""
    alpha = case.time.alpha_array()
    tons = 0.0
    for g in case.clusters:
        if g.emissions_t_per_mwh > 0:
            tons += g.emissions_t_per_mwh * float(alpha @ d.gen[g.id])
            if g.is_storage:
                tons += g.emissions_t_per_mwh * float(alpha @ d.charge[g.id])
    return tons


def rps_share_achieved(case: SystemCase, d: Dispatch) -> float:
    """Weighted qualifying generation as a share of weighted demand."""
    alpha = case.time.alpha_array()
    qualified = sum(
        float(alpha @ d.gen[g.id]) for g in case.clusters if g.rps_eligible
    )
    total = case.weighted_demand()
    return qualified / total if total > 0 else 0.0


def report_to_dict(rep: SolveReport) -> dict:
    d = rep.dispatch
    return {
        "method": rep.method,
        "scenario": rep.scenario,
        "status": rep.status,
        "objective": rep.objective,
        "costs": rep.costs.as_dict(),
        "weeks": list(rep.weeks),
        "weights": list(rep.weights),
        "iterations": rep.iterations,
        "emissions_tons": rep.emissions_tons,
        "rps_share": rep.rps_share,
        "workers": rep.workers,
        "seed": rep.seed,
        "investments": rep.investments,
        "line_investments": rep.line_investments,
        "policy_slack": {str(w): v for w, v in d.slack.items()},
        "dispatch": {
            "gen": {k: list(v) for k, v in d.gen.items()},
            "charge": {k: list(v) for k, v in d.charge.items()},
            "soc": {k: list(v) for k, v in d.soc.items()},
            "level": {k: list(v) for k, v in d.level.items()},
            "spill": {k: list(v) for k, v in d.spill.items()},
            "flow": {k: list(v) for k, v in d.flow.items()},
            "nse": {f"{s}/{z}": list(v) for (s, z), v in d.nse.items()},
            "commit": {k: list(v) for k, v in d.commit.items()},
            "start": {k: list(v) for k, v in d.start.items()},
            "shut": {k: list(v) for k, v in d.shut.items()},
        },
        "trace": [
            {
                "iteration": t.iteration,
                "elapsed_ms": t.elapsed_ms,
                "ub": t.ub,
                "lb": t.lb,
                "gap": t.gap,
            }
            for t in rep.trace
        ],
    }


def write_report(rep: SolveReport, path) -> None:
    """Write the report as JSON with a stable key order."""
    with open(path, "w") as fh:
        json.dump(report_to_dict(rep), fh, indent=1, sort_keys=True)
        fh.write("\n")


def emit_trace(rep: SolveReport, path) -> None:
    """Write the bound trace as delimited text, one row per iteration.

    Columns: iteration, elapsed_ms, UB, LB, gap. Plot-ready for
    gap-versus-time curves.
    """
    lines = ["iteration,elapsed_ms,ub,lb,gap"]
    for t in rep.trace:
        lines.append(
            f"{t.iteration},{t.elapsed_ms:.3f},{t.ub:.17g},{t.lb:.17g},{t.gap:.17g}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
