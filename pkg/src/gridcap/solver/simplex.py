"""Dense two-phase primal simplex with dual extraction.

Reference backend for desk-scale instances. Solutions are vertex (basic)
solutions; the returned duals are the simplex multipliers, i.e. the
sensitivity of the optimum to each row's right-hand side. Under
minimization that makes duals of binding "<=" rows nonpositive, of ">="
rows nonnegative, and leaves equality rows unrestricted.

Robustness comes from three ingredients: the instance is equilibrated
(row and column scaled) before solving, every phase's claimed optimum is
re-derived from a fresh factorization of the final basis and the phase is
resumed if the tableau had drifted, and pricing falls back permanently to
Bland's rule after a stall so degenerate instances cannot cycle. The
default pricing is a normalized largest-improvement rule. Pivoting is
deterministic, so identical instances yield bit-identical solutions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .instance import EQ, GE, LE, Instance

_RCOST_TOL = 1e-9
_PIVOT_TOL = 1e-9
_FEAS_TOL = 1e-7
_MAX_POLISH = 12


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"
    NODE_LIMIT = "node_limit"


@dataclass(frozen=True)
class LpSolution:
    """Outcome of one LP solve.

    ``x`` and ``duals`` are populated only when status is OPTIMAL. The
    ``basic`` flag records that the solution is a vertex of the feasible
    region, which cut generation relies on.
    """

    status: SolveStatus
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    duals: Optional[np.ndarray] = None
    basic: bool = False
    iterations: int = 0

    def dual_for(self, row: int) -> float:
        return float(self.duals[row])


class _Tableau:
    """Mutable simplex state over the standardized system A x = b, x >= 0."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: np.ndarray):
        self.A = A
        self.b = b
        self.basis = basis.copy()
        self.T = A.copy()
        self.xb = b.copy()
        # initial basis columns are unit vectors up to scaling
        piv = self.T[np.arange(len(basis)), basis]
        self.T /= piv[:, None]
        self.xb /= piv

    def refactor(self, costs: np.ndarray):
        """Recompute tableau, basic values, duals, and reduced costs
        from a fresh factorization of the current basis."""
        B = self.A[:, self.basis]
        self.T = np.linalg.solve(B, self.A)
        self.xb = np.linalg.solve(B, self.b)
        y = np.linalg.solve(B.T, costs[self.basis])
        r = costs - y @ self.A
        r[self.basis] = 0.0
        return r, y

    def pivot(self, p: int, q: int, r: np.ndarray) -> None:
        piv = self.T[p, q]
        self.T[p, :] /= piv
        self.xb[p] /= piv
        col = self.T[:, q].copy()
        col[p] = 0.0
        self.T -= np.outer(col, self.T[p, :])
        self.xb -= col * self.xb[p]
        r -= r[q] * self.T[p, :]
        self.basis[p] = q
        # keep the entering column numerically exact
        self.T[:, q] = 0.0
        self.T[p, q] = 1.0
        r[q] = 0.0


def _price(
    r: np.ndarray, allowed: np.ndarray, T: np.ndarray, bland: bool, rtol: np.ndarray
) -> int:
    """Entering column, or -1 when no candidate improves the objective.

    The tolerance is relative to each column's cost magnitude so that
    noise-level reduced costs on large-cost columns are not chased.
    """
    cand = np.flatnonzero(allowed & (r < -rtol))
    if cand.size == 0:
        return -1
    if bland:
        return int(cand[0])
    gamma = 1.0 + np.einsum("ij,ij->j", T[:, cand], T[:, cand])
    score = (r[cand] ** 2) / gamma
    return int(cand[np.argmax(score)])


def _ratio_test(T: np.ndarray, xb: np.ndarray, basis: np.ndarray, q: int, bland: bool) -> int:
    col = T[:, q]
    pos = np.flatnonzero(col > _PIVOT_TOL)
    if pos.size == 0:
        return -1
    ratios = np.maximum(xb[pos], 0.0) / col[pos]
    best = np.min(ratios)
    ties = pos[ratios <= best + 1e-9 * (1.0 + best)]
    if bland or ties.size == 1:
        return int(ties[np.argmin(basis[ties])])
    # prefer the largest pivot among tied rows for stability
    k = ties[np.argmax(np.abs(col[ties]))]
    return int(k)


def _run_phase(
    tab: _Tableau,
    costs: np.ndarray,
    allowed: np.ndarray,
    max_iter: int,
    stall_limit: int,
    iterations: int,
    refresh: bool = True,
) -> tuple[str, int]:
    """Iterate to a verified phase optimum; returns (outcome, iterations).

    Whenever pricing claims optimality the reduced costs are re-derived
    from a fresh basis factorization; drift restarts the phase from the
    refactored tableau.
    """
    if refresh:
        r, _ = tab.refactor(costs)
    else:
        r = costs - costs[tab.basis] @ tab.T
        r[tab.basis] = 0.0
    rtol = _RCOST_TOL * (1.0 + np.abs(costs))
    bland = False
    stall = 0
    polish = 0
    while True:
        q = _price(r, allowed, tab.T, bland, rtol)
        if q < 0:
            # verify the claimed optimum from a fresh factorization; a
            # candidate is accepted only when its reduced cost is solidly
            # negative or entering it makes real progress, so noise-level
            # reduced costs in an ill-conditioned basis cannot cycle
            r_true, y = tab.refactor(costs)
            ok = allowed.copy()
            zscale = 1.0 + abs(float(costs[tab.basis] @ tab.xb))
            q = -1
            while True:
                cand = _price(r_true, ok, tab.T, bland, rtol)
                if cand < 0:
                    break
                if r_true[cand] < -1e-6 * (1.0 + abs(costs[cand])):
                    q = cand
                    break
                p = _ratio_test(tab.T, tab.xb, tab.basis, cand, bland)
                if p >= 0 and (
                    -r_true[cand] * max(tab.xb[p], 0.0) / tab.T[p, cand]
                    > 1e-7 * zscale
                ):
                    q = cand
                    break
                ok[cand] = False
            if q < 0:
                return "optimal", iterations
            # drift detected: trust only refactored state from here on
            r = r_true
            bland = True
            polish += 1
            if polish > _MAX_POLISH:
                return "iteration_limit", iterations
        p = _ratio_test(tab.T, tab.xb, tab.basis, q, bland)
        if p < 0:
            return "unbounded", iterations
        drop = -r[q] * max(tab.xb[p], 0.0) / tab.T[p, q]
        tab.pivot(p, q, r)
        iterations += 1
        if iterations >= max_iter:
            return "iteration_limit", iterations
        if drop <= 1e-12:
            stall += 1
            if stall >= stall_limit and not bland:
                bland = True  # anti-cycling fallback, permanent
        else:
            stall = 0


def _standardize(inst: Instance):
    """Expand to A x = b with x >= 0; returns mapping metadata."""
    A = inst.matrix.toarray()
    b = inst.rhs.astype(float).copy()
    c = inst.objective.astype(float).copy()
    n0 = inst.n_cols
    m = inst.n_rows

    flip = np.ones(m)
    ge = inst.senses == GE
    A[ge] *= -1.0
    b[ge] *= -1.0
    flip[ge] = -1.0

    free_idx = np.flatnonzero(inst.free)
    if free_idx.size:
        A = np.hstack([A, -A[:, free_idx]])
        c = np.concatenate([c, -c[free_idx]])
    n_split = n0 + free_idx.size

    is_le = inst.senses != EQ  # after GE flip everything is LE or EQ
    n_slack = int(np.count_nonzero(is_le))
    S = np.zeros((m, n_slack))
    slack_of_row = np.full(m, -1, dtype=int)
    k = 0
    for i in np.flatnonzero(is_le):
        S[i, k] = 1.0
        slack_of_row[i] = n_split + k
        k += 1
    A = np.hstack([A, S])
    c = np.concatenate([c, np.zeros(n_slack)])

    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    flip[neg] *= -1.0

    return A, b, c, flip, free_idx, n_split, slack_of_row, neg


def _equilibrate(A: np.ndarray, b: np.ndarray, c: np.ndarray):
    """Scale rows and columns toward unit magnitude; returns the scales."""
    m, n = A.shape
    absA = np.abs(A)
    rmax = absA.max(axis=1) if n else np.ones(m)
    rscale = np.where(rmax > 0, 1.0 / np.where(rmax > 0, rmax, 1.0), 1.0)
    A *= rscale[:, None]
    b *= rscale
    cmax = np.abs(A).max(axis=0) if m else np.ones(n)
    cscale = np.where(cmax > 0, 1.0 / np.where(cmax > 0, cmax, 1.0), 1.0)
    A *= cscale[None, :]
    cs = c * cscale
    return rscale, cscale, cs


def solve_lp(inst: Instance, max_iter: Optional[int] = None) -> LpSolution:
    """Solve the LP relaxation of ``inst`` to a vertex optimum with duals."""
    A, b, c, flip, free_idx, n_split, slack_of_row, neg = _standardize(inst)
    m, n_all = A.shape
    n0 = inst.n_cols
    rscale, cscale, cs = _equilibrate(A, b, c)

    if max_iter is None:
        max_iter = 50 * (m + n_all) + 10_000
    stall_limit = 4 * (m + 10)

    if m == 0:
        if np.any(cs < -_RCOST_TOL):
            return LpSolution(status=SolveStatus.UNBOUNDED)
        return LpSolution(
            status=SolveStatus.OPTIMAL,
            x=np.zeros(n0),
            objective=0.0,
            duals=np.zeros(0),
            basic=True,
        )

    # initial basis: usable slacks where present, artificials elsewhere
    basis = np.full(m, -1, dtype=int)
    needs_art = []
    for i in range(m):
        if slack_of_row[i] >= 0 and not neg[i]:
            basis[i] = slack_of_row[i]
        else:
            needs_art.append(i)
    n_art = len(needs_art)
    if n_art:
        Art = np.zeros((m, n_art))
        for k, i in enumerate(needs_art):
            Art[i, k] = 1.0
            basis[i] = n_all + k
        A = np.hstack([A, Art])
    art_start = n_all
    n_total = A.shape[1]

    tab = _Tableau(A, b, basis)
    iterations = 0

    if n_art:
        c1 = np.zeros(n_total)
        c1[art_start:] = 1.0
        allowed = np.ones(n_total, dtype=bool)
        outcome, iterations = _run_phase(
            tab, c1, allowed, max_iter, stall_limit, iterations, refresh=False
        )
        if outcome == "iteration_limit":
            return LpSolution(status=SolveStatus.ITERATION_LIMIT, iterations=iterations)
        try:
            xb = np.linalg.solve(A[:, tab.basis], b)
        except np.linalg.LinAlgError:  # pragma: no cover - drifted basis
            xb = tab.xb
        z1 = float(np.sum(np.maximum(xb[tab.basis >= art_start], 0.0)))
        if z1 > _FEAS_TOL * (1.0 + float(np.abs(b).max(initial=0.0))):
            return LpSolution(status=SolveStatus.INFEASIBLE, iterations=iterations)
        # drive lingering artificials out of the basis where a well
        # conditioned pivot exists; otherwise they stay basic at zero
        lingering = np.flatnonzero(tab.basis >= art_start)
        if lingering.size:
            tab.refactor(c1)
            dummy = np.zeros(n_total)
            for p in np.flatnonzero(tab.basis >= art_start):
                row = tab.T[p, :art_start]
                q = int(np.argmax(np.abs(row)))
                if abs(row[q]) > 1e-5:
                    tab.pivot(int(p), q, dummy)

    c2 = np.zeros(n_total)
    c2[:n_all] = cs
    allowed = np.ones(n_total, dtype=bool)
    allowed[art_start:] = False  # artificials may leave but never re-enter
    outcome, iterations = _run_phase(tab, c2, allowed, max_iter, stall_limit, iterations)
    if outcome == "iteration_limit":
        return LpSolution(status=SolveStatus.ITERATION_LIMIT, iterations=iterations)
    if outcome == "unbounded":
        return LpSolution(status=SolveStatus.UNBOUNDED, iterations=iterations)

    # read the answer off a fresh factorization of the final basis
    try:
        B = A[:, tab.basis]
        xb = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, c2[tab.basis])
    except np.linalg.LinAlgError:  # pragma: no cover - drifted basis
        return LpSolution(status=SolveStatus.ITERATION_LIMIT, iterations=iterations)

    x_std = np.zeros(n_total)
    x_std[tab.basis] = xb
    x_scaled = x_std[:n_all] * cscale
    x = x_scaled[:n0].copy()
    for k, j in enumerate(free_idx):
        x[j] -= x_scaled[n0 + k]
    duals = flip * rscale * y
    objective = float(inst.objective @ x)
    return LpSolution(
        status=SolveStatus.OPTIMAL,
        x=x,
        objective=objective,
        duals=duals,
        basic=True,
        iterations=iterations,
    )
