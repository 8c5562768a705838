"""Adapter backend running instances through scipy's HiGHS bindings.

Exists to exercise the pluggable-backend contract and as a fast
cross-check for the reference simplex; both backends must satisfy the
same solution contracts.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .bnb import MilpSolution
from .instance import EQ, GE, LE, Instance
from .simplex import LpSolution, SolveStatus

_LP_STATUS = {
    0: SolveStatus.OPTIMAL,
    1: SolveStatus.ITERATION_LIMIT,
    2: SolveStatus.INFEASIBLE,
    3: SolveStatus.UNBOUNDED,
    4: SolveStatus.ITERATION_LIMIT,
}


def _bounds(inst: Instance):
    lb = np.where(inst.free, -np.inf, 0.0)
    ub = np.full(inst.n_cols, np.inf)
    return lb, ub


def solve_lp_highs(inst: Instance) -> LpSolution:
    le = inst.senses == LE
    ge = inst.senses == GE
    eq = inst.senses == EQ
    ineq = le | ge
    sign = np.where(ge, -1.0, 1.0)[ineq]

    A_ub = sp.diags(sign) @ inst.matrix[ineq] if ineq.any() else None
    b_ub = sign * inst.rhs[ineq] if ineq.any() else None
    A_eq = inst.matrix[eq] if eq.any() else None
    b_eq = inst.rhs[eq] if eq.any() else None
    lb, ub = _bounds(inst)

    res = linprog(
        inst.objective,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=np.column_stack([lb, ub]),
        method="highs-ds",
    )
    status = _LP_STATUS.get(res.status, SolveStatus.ITERATION_LIMIT)
    if status is not SolveStatus.OPTIMAL:
        return LpSolution(status=status)

    duals = np.zeros(inst.n_rows)
    if ineq.any():
        duals[np.flatnonzero(ineq)] = sign * res.ineqlin.marginals
    if eq.any():
        duals[np.flatnonzero(eq)] = res.eqlin.marginals
    return LpSolution(
        status=SolveStatus.OPTIMAL,
        x=np.asarray(res.x, dtype=float),
        objective=float(res.fun),
        duals=duals,
        basic=True,
        iterations=int(getattr(res, "nit", 0) or 0),
    )


def solve_milp_highs(
    inst: Instance, gap_tol: float = 1e-3, node_limit: int = 1_000_000
) -> MilpSolution:
    lb_row = np.where(inst.senses == GE, inst.rhs, -np.inf)
    lb_row = np.where(inst.senses == EQ, inst.rhs, lb_row)
    ub_row = np.where(inst.senses == LE, inst.rhs, np.inf)
    ub_row = np.where(inst.senses == EQ, inst.rhs, ub_row)
    lb, ub = _bounds(inst)

    res = milp(
        inst.objective,
        constraints=LinearConstraint(inst.matrix, lb_row, ub_row),
        integrality=inst.integer.astype(int),
        bounds=Bounds(lb, ub),
        options={"mip_rel_gap": gap_tol, "node_limit": node_limit},
    )
    status = {
        0: SolveStatus.OPTIMAL,
        1: SolveStatus.ITERATION_LIMIT,
        2: SolveStatus.INFEASIBLE,
        3: SolveStatus.UNBOUNDED,
    }.get(res.status, SolveStatus.NODE_LIMIT)
    if res.x is None:
        return MilpSolution(status=status)
    bound = float(res.mip_dual_bound) if res.mip_dual_bound is not None else float(res.fun)
    inc = float(res.fun)
    bound = min(bound, inc)
    return MilpSolution(
        status=status,
        x=np.asarray(res.x, dtype=float),
        objective=inc,
        bound=bound,
        gap=(inc - bound) / max(1.0, abs(bound)),
        nodes=int(getattr(res, "mip_node_count", 0) or 0),
    )
