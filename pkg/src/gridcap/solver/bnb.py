"""Best-first branch and bound on the integer-flagged columns of an instance."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .instance import EQ, GE, LE, Instance
from .simplex import LpSolution, SolveStatus, solve_lp

_INT_TOL = 1e-6
_PRUNE_EPS = 1e-9


@dataclass(frozen=True)
class MilpSolution:
    """Incumbent plus the proven bound of the node tree.

    ``objective`` is the incumbent value (an upper bound under
    minimization), ``bound`` the proven lower bound; ``gap`` is their
    relative distance (inc - bound) / max(1, |bound|).
    """

    status: SolveStatus
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    bound: Optional[float] = None
    gap: Optional[float] = None
    nodes: int = 0

    @property
    def basic(self) -> bool:
        return self.x is not None


def _milp_gap(incumbent: Optional[float], bound: float) -> float:
    if incumbent is None:
        return float("inf")
    return (incumbent - bound) / max(1.0, abs(bound))


def _with_branch_rows(base: Instance, branches) -> Instance:
    if not branches:
        return base
    n = base.n_cols
    rows = sp.csr_matrix(
        (
            np.ones(len(branches)),
            (np.arange(len(branches)), [c for c, _, _ in branches]),
        ),
        shape=(len(branches), n),
    )
    return replace(
        base,
        matrix=sp.vstack([base.matrix, rows], format="csr"),
        senses=np.concatenate(
            [base.senses, np.asarray([s for _, s, _ in branches], dtype="<U1")]
        ),
        rhs=np.concatenate([base.rhs, np.asarray([b for _, _, b in branches])]),
    )


def _snap(x: np.ndarray, int_cols: np.ndarray) -> np.ndarray:
    out = x.copy()
    out[int_cols] = np.round(out[int_cols])
    return out


def _round_fix(base: Instance, int_cols: np.ndarray, x: np.ndarray, lp_solver):
    """Fix integer columns to the rounded relaxation values and re-solve.

    Cheap primal heuristic: one LP over the continuous columns. Returns
    (objective, solution) or None when the rounding is infeasible.
    """
    vals = np.round(x[int_cols])
    fixed = _with_branch_rows(
        base, tuple((int(j), EQ, float(v)) for j, v in zip(int_cols, vals))
    )
    sol = lp_solver(fixed)
    if sol.status is not SolveStatus.OPTIMAL:
        return None
    return sol.objective, _snap(sol.x, int_cols)


def solve_milp(
    inst: Instance,
    gap_tol: float = 1e-3,
    node_limit: int = 100_000,
    lp_solver=solve_lp,
) -> MilpSolution:
    """Minimize over the mixed-integer feasible set of ``inst``.

    Terminates once the node-tree gap falls to ``gap_tol``. Exhausting the
    node budget returns a NODE_LIMIT status that still carries the best
    incumbent and bound found.
    """
    int_cols = np.flatnonzero(inst.integer)
    relaxed = inst.relaxed()
    root = lp_solver(relaxed)
    if root.status is not SolveStatus.OPTIMAL:
        return MilpSolution(status=root.status, nodes=1)

    incumbent: Optional[np.ndarray] = None
    inc_obj: Optional[float] = None
    bound = root.objective
    nodes = 0
    counter = 0
    # heap entries: (lower bound inherited from parent, tiebreak, branch rows)
    heap: list[tuple[float, int, tuple]] = [(root.objective, counter, ())]

    while heap:
        key, _, branches = heapq.heappop(heap)
        bound = max(bound, key)
        if _milp_gap(inc_obj, bound) <= gap_tol:
            bound = min(bound, inc_obj)
            break
        if inc_obj is not None and key >= inc_obj - _PRUNE_EPS * max(1.0, abs(inc_obj)):
            bound = inc_obj
            continue
        if nodes >= node_limit:
            return MilpSolution(
                status=SolveStatus.NODE_LIMIT,
                x=incumbent,
                objective=inc_obj,
                bound=min(bound, inc_obj) if inc_obj is not None else bound,
                gap=_milp_gap(inc_obj, bound),
                nodes=nodes,
            )
        nodes += 1
        sol = lp_solver(_with_branch_rows(relaxed, branches)) if branches else root
        if sol.status is SolveStatus.INFEASIBLE:
            continue
        if sol.status is not SolveStatus.OPTIMAL:
            return MilpSolution(status=sol.status, nodes=nodes)
        if inc_obj is not None and sol.objective >= inc_obj - _PRUNE_EPS * max(
            1.0, abs(inc_obj)
        ):
            continue

        vals = sol.x[int_cols]
        frac = np.abs(vals - np.round(vals))
        if int_cols.size == 0 or np.all(frac <= _INT_TOL):
            incumbent = _snap(sol.x, int_cols)
            inc_obj = sol.objective
            continue

        # round-fix-and-solve heuristic; without one, plateaus of
        # alternate fractional optima can stall the search indefinitely
        if nodes <= 64 or nodes % 8 == 0:
            guess = _round_fix(
                _with_branch_rows(relaxed, branches), int_cols, sol.x, lp_solver
            )
            if guess is not None and (inc_obj is None or guess[0] < inc_obj):
                inc_obj, incumbent = guess[0], guess[1]
                if _milp_gap(inc_obj, bound) <= gap_tol:
                    bound = min(bound, inc_obj)
                    break

        j = int(int_cols[np.argmax(np.minimum(frac, 1.0 - frac))])
        v = sol.x[j]
        counter += 1
        heapq.heappush(
            heap, (sol.objective, counter, branches + ((j, LE, float(np.floor(v))),))
        )
        counter += 1
        heapq.heappush(
            heap, (sol.objective, counter, branches + ((j, GE, float(np.ceil(v))),))
        )

    if incumbent is None:
        return MilpSolution(status=SolveStatus.INFEASIBLE, nodes=nodes)
    if not heap:
        bound = inc_obj
    return MilpSolution(
        status=SolveStatus.OPTIMAL,
        x=incumbent,
        objective=inc_obj,
        bound=bound,
        gap=_milp_gap(inc_obj, bound),
        nodes=nodes,
    )
