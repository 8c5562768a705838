"""Benders decomposition engines.

``run_benders`` implements the budgeted multi-cut scheme: the master
problem proposes investments y and per-subperiod budgets q_w for every
coupling row, the subperiods are priced independently (optionally in
parallel), and each iteration returns one optimality cut per subperiod.
``run_classic_benders`` is the single-cut baseline whose one subproblem
spans the whole year and keeps the coupling rows inside.

Only cut data crosses the worker boundary; the dispatch belonging to the
best upper bound is re-solved once at termination for reporting.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .formulation import (
    CompactBlocks,
    assemble_monolithic,
    build_blocks,
    extract_dispatch,
)
from .model import SystemCase, validate_case
from .report import (
    SolveReport,
    TraceRow,
    cost_breakdown,
    rps_share_achieved,
    total_emissions,
)
from .solver import (
    DEFAULT_BACKEND,
    EQ,
    LE,
    Instance,
    SolveStatus,
    SolverBackend,
    fix_columns,
    repin,
)


class BendersError(RuntimeError):
    pass


@dataclass(frozen=True)
class BendersOptions:
    rel_tol: float = 1e-3
    k_max: int = 1000
    mip_gap: float = 1e-4
    workers: int = 1
    relax: bool = False
    node_limit: int = 5000
    backend: Optional[SolverBackend] = None

    @property
    def engine(self) -> SolverBackend:
        return self.backend if self.backend is not None else DEFAULT_BACKEND


@dataclass(frozen=True)
class CutRecord:
    """One optimality cut: theta_w >= value + pi.(y - y_anchor) + lam.(q_w - q_anchor)."""

    w: int
    j: int
    value: float
    pi: np.ndarray
    lam: np.ndarray
    y_anchor: np.ndarray
    q_anchor: np.ndarray

    def evaluate(self, y: np.ndarray, q_w: np.ndarray) -> float:
        """Cut height at (y, q_w); equals ``value`` at the anchor."""
        out = self.value + float(self.pi @ (y - self.y_anchor))
        if len(self.lam):
            out += float(self.lam @ (q_w - self.q_anchor))
        return out


def _clean(v: np.ndarray, rel: float = 1e-11) -> np.ndarray:
    """Zero out noise-level multiplier entries so cuts stay well scaled."""
    out = np.asarray(v, dtype=float).copy()
    thr = rel * max(1.0, float(np.abs(out).max(initial=0.0)))
    out[np.abs(out) < thr] = 0.0
    return out


def optimality_gap(ub: float, lb: float) -> float:
    """Relative optimality gap (UB - LB) / LB; requires a positive LB."""
    if lb <= 0:
        raise ValueError("gap undefined for LB <= 0; use an absolute criterion")
    return (ub - lb) / lb


def _safe_gap(ub: float, lb: float) -> float:
    if lb > 0:
        return optimality_gap(ub, lb)
    if ub - lb <= 1e-9 * max(1.0, abs(ub)):
        return 0.0
    return float("inf")


class MasterProblem:
    """Investment polytope plus epigraph and budget columns plus cuts.

    Columns are laid out as [y | theta_w per subperiod | q_w blocks]. Cut
    rows are appended and never removed. For the classic variant a single
    epigraph column stands in for all subperiods and no budgets exist.
    """

    def __init__(self, blocks: CompactBlocks, relax: bool, classic: bool = False):
        self.blocks = blocks
        self.relax = relax
        self.classic = classic
        case = blocks.case
        self.weeks = case.time.weeks
        inv = blocks.invest
        self.n_y = inv.index.n
        self.n_c = blocks.policy.n_coupling if not classic else 0
        self.theta_cols = {}
        col = self.n_y
        if classic:
            self.theta_cols = {0: col}
            col += 1
        else:
            for w in self.weeks:
                self.theta_cols[w] = col
                col += 1
        self.q_cols: dict[int, np.ndarray] = {}
        for w in self.weeks:
            if self.n_c:
                self.q_cols[w] = np.arange(col, col + self.n_c)
                col += self.n_c
            else:
                self.q_cols[w] = np.zeros(0, dtype=int)
        self.n_cols = col
        self.cuts: list[CutRecord] = []

    def add_cut(self, cut: CutRecord) -> None:
        self.cuts.append(cut)

    def instance(self) -> Instance:
        inv = self.blocks.invest
        R = inv.R.tocoo()
        ri = [R.row]
        ci = [R.col]
        vi = [R.data]
        senses = [inv.senses]
        rhs = [inv.r]
        row = inv.R.shape[0]

        if self.n_c:
            # budget allocation: per coupling row, the q_w sum to the bound
            for j in range(self.n_c):
                ri.append(np.full(len(self.weeks), row + j))
                ci.append(np.asarray([self.q_cols[w][j] for w in self.weeks]))
                vi.append(np.ones(len(self.weeks)))
            senses.append(np.full(self.n_c, EQ, dtype="<U1"))
            rhs.append(self.blocks.policy.e.astype(float))
            row += self.n_c

        for cut in self.cuts:
            tcol = self.theta_cols[0 if self.classic else cut.w]
            cols = [np.asarray([tcol])]
            vals = [np.asarray([-1.0])]
            b = -cut.value
            nz = np.flatnonzero(cut.pi)
            if nz.size:
                cols.append(nz)
                vals.append(cut.pi[nz])
                b += float(cut.pi[nz] @ cut.y_anchor[nz])
            lnz = np.flatnonzero(cut.lam)
            if lnz.size:
                cols.append(self.q_cols[cut.w][lnz])
                vals.append(cut.lam[lnz])
                b += float(cut.lam @ cut.q_anchor)
            ci.append(np.concatenate(cols))
            vi.append(np.concatenate(vals))
            ri.append(np.full(len(ci[-1]), row))
            senses.append(np.asarray([LE]))
            rhs.append(np.asarray([b]))
            row += 1

        obj = np.zeros(self.n_cols)
        obj[: self.n_y] = inv.c0
        for c in self.theta_cols.values():
            obj[c] = 1.0
        free = np.zeros(self.n_cols, dtype=bool)
        free[self.n_y :] = True  # epigraph and budget columns
        integer = np.zeros(self.n_cols, dtype=bool)
        if not self.relax:
            integer[inv.index.integer_cols] = True
        matrix = sp.csr_matrix(
            (np.concatenate(vi), (np.concatenate(ri), np.concatenate(ci))),
            shape=(row, self.n_cols),
        )
        return Instance(
            objective=obj,
            matrix=matrix,
            senses=np.concatenate(senses),
            rhs=np.concatenate(rhs),
            free=free,
            integer=integer,
            name="master",
        )


@dataclass(eq=False)
class BendersState:
    k: int
    ub: float
    lb: float
    y: Optional[np.ndarray] = None
    q: Optional[dict[int, np.ndarray]] = None
    best_y: Optional[np.ndarray] = None
    best_q: Optional[dict[int, np.ndarray]] = None
    trace: list[TraceRow] = field(default_factory=list)


def init_state(
    case: SystemCase, scenario: str = None, relax: bool = False, classic: bool = False
) -> tuple[BendersState, MasterProblem, CompactBlocks]:
    """Fresh master with the trivial zero cuts and an empty bound state."""
    report = validate_case(case)
    if not report.ok:
        raise ValueError("invalid case: " + "; ".join(report.violations))
    scenario = scenario or case.policy.scenario
    blocks = build_blocks(case, scenario)
    master = MasterProblem(blocks, relax=relax, classic=classic)
    n_y = master.n_y
    n_c = master.n_c
    zero = CutRecord(
        w=0,
        j=0,
        value=0.0,
        pi=np.zeros(n_y),
        lam=np.zeros(0),
        y_anchor=np.zeros(n_y),
        q_anchor=np.zeros(0),
    )
    if classic:
        master.add_cut(zero)
    else:
        for w in master.weeks:
            master.add_cut(
                replace(
                    zero,
                    w=w,
                    lam=np.zeros(n_c),
                    q_anchor=np.zeros(n_c),
                )
            )
    return BendersState(k=1, ub=float("inf"), lb=-float("inf")), master, blocks


def solve_master(
    master: MasterProblem, opts: BendersOptions
) -> tuple[np.ndarray, dict[int, np.ndarray], dict[int, float], float]:
    """Solve the master; the bound returned is its proven lower bound."""
    inst = master.instance()
    engine = opts.engine
    if master.relax or not np.any(inst.integer):
        sol = engine.solve_lp(inst.relaxed())
        if sol.status is not SolveStatus.OPTIMAL:
            raise BendersError(f"master problem {sol.status.value}")
        x, bound = sol.x, sol.objective
    else:
        sol = engine.solve_milp(inst, gap_tol=opts.mip_gap, node_limit=opts.node_limit)
        # a node-limited master still yields a valid proven bound and an
        # integral incumbent, which is all the decomposition needs
        if sol.status is SolveStatus.NODE_LIMIT and sol.x is not None:
            pass
        elif sol.status is not SolveStatus.OPTIMAL:
            raise BendersError(f"master problem {sol.status.value}")
        x, bound = sol.x, sol.bound
    y = x[: master.n_y].copy()
    q = {w: x[master.q_cols[w]].copy() for w in master.weeks}
    theta = {w: float(x[c]) for w, c in master.theta_cols.items()}
    return y, q, theta, float(bound)


class SubproblemTemplate:
    """Reusable pinned LP for one subperiod's dispatch pricing.

    Columns are [x_w | y | q_w]; capacity and budget columns are pinned by
    equality rows whose duals are the cut multipliers. Only the pin
    right-hand sides change between iterations.
    """

    def __init__(self, blocks: CompactBlocks, w: int):
        op = blocks.ops[w]
        n_x = op.index.n
        n_y = blocks.invest.index.n
        n_c = blocks.policy.n_coupling
        self.w = w
        self.n_x, self.n_y, self.n_c = n_x, n_y, n_c

        A = op.A.tocoo()
        B = op.B.tocoo()
        ri = [A.row, B.row]
        ci = [A.col, B.col + n_x]
        vi = [A.data, B.data]
        senses = [op.senses]
        rhs = [op.b]
        row = op.A.shape[0]
        if n_c:
            Q = blocks.policy.Q[w].tocoo()
            ri.append(Q.row + row)
            ci.append(Q.col)
            vi.append(Q.data)
            ri.append(np.arange(row, row + n_c))
            ci.append(np.arange(n_x + n_y, n_x + n_y + n_c))
            vi.append(np.full(n_c, -1.0))
            senses.append(np.full(n_c, LE, dtype="<U1"))
            rhs.append(np.zeros(n_c))
            row += n_c

        n_cols = n_x + n_y + n_c
        obj = np.zeros(n_cols)
        obj[:n_x] = op.c
        free = np.zeros(n_cols, dtype=bool)
        free[op.index.free_cols] = True
        free[n_x + n_y :] = True  # budgets carry either sign
        base = Instance(
            objective=obj,
            matrix=sp.csr_matrix(
                (np.concatenate(vi), (np.concatenate(ri), np.concatenate(ci))),
                shape=(row, n_cols),
            ),
            senses=np.concatenate(senses),
            rhs=np.concatenate(rhs),
            free=free,
            integer=np.zeros(n_cols, dtype=bool),
            name=f"subproblem:{w}",
        )
        pins = {n_x + j: 0.0 for j in range(n_y)}
        pins.update({n_x + n_y + j: 0.0 for j in range(n_c)})
        self.inst, self.pin_rows = fix_columns(base, pins)
        self.y_rows = np.asarray([self.pin_rows[n_x + j] for j in range(n_y)])
        self.q_rows = np.asarray(
            [self.pin_rows[n_x + n_y + j] for j in range(n_c)], dtype=int
        )

    def pinned(self, y: np.ndarray, q_w: np.ndarray) -> Instance:
        values = {self.n_x + j: float(y[j]) for j in range(self.n_y)}
        values.update(
            {self.n_x + self.n_y + j: float(q_w[j]) for j in range(self.n_c)}
        )
        return repin(self.inst, self.pin_rows, values)

    def solve(
        self, y: np.ndarray, q_w: np.ndarray, j: int, backend: SolverBackend
    ) -> tuple[CutRecord, np.ndarray]:
        sol = backend.solve_lp(self.pinned(y, q_w))
        if sol.status is SolveStatus.INFEASIBLE:
            raise BendersError(
                f"subproblem {self.w}: recourse violated (infeasible dispatch)"
            )
        if sol.status is not SolveStatus.OPTIMAL:
            raise BendersError(
                f"subproblem {self.w}: missing bounds ({sol.status.value})"
            )
        cut = CutRecord(
            w=self.w,
            j=j,
            value=float(sol.objective),
            pi=_clean(sol.duals[self.y_rows]),
            lam=_clean(sol.duals[self.q_rows]) if self.n_c else np.zeros(0),
            y_anchor=np.asarray(y, dtype=float).copy(),
            q_anchor=np.asarray(q_w, dtype=float).copy(),
        )
        return cut, sol.x[: self.n_x].copy()


def solve_subproblem(
    blocks: CompactBlocks,
    w: int,
    y: np.ndarray,
    q_w: np.ndarray = None,
    j: int = 0,
    backend: SolverBackend = None,
) -> CutRecord:
    """Price one subperiod at fixed (y, q_w) and return its cut."""
    template = SubproblemTemplate(blocks, w)
    if q_w is None:
        q_w = np.zeros(template.n_c)
    cut, _ = template.solve(y, q_w, j, backend or DEFAULT_BACKEND)
    return cut


def _solve_all(templates, y, q, j, backend, workers):
    """Solve every subperiod at (y, q); merge deterministically by id."""
    weeks = sorted(templates)
    results: dict[int, tuple[CutRecord, float]] = {}

    def one(w: int):
        t0 = time.perf_counter()
        cut, _ = templates[w].solve(y, q[w], j, backend)
        return w, cut, (time.perf_counter() - t0) * 1e3

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for w, cut, ms in pool.map(one, weeks):
                results[w] = (cut, ms)
    else:
        for w in weeks:
            results[w] = one(w)[1:]
    return results


def _finish_report(
    method: str,
    case: SystemCase,
    blocks: CompactBlocks,
    state: BendersState,
    status: str,
    x_w: dict[int, np.ndarray],
    wall_ms: float,
    opts: BendersOptions,
) -> SolveReport:
    dispatch = extract_dispatch(blocks, state.best_y, x_w)
    costs = cost_breakdown(case, dispatch)
    return SolveReport(
        method=method,
        scenario=blocks.scenario,
        status=status,
        objective=state.ub,
        costs=costs,
        weeks=case.time.weeks,
        weights=case.time.rho,
        dispatch=dispatch,
        trace=state.trace,
        iterations=state.k,
        wall_ms=wall_ms,
        emissions_tons=total_emissions(case, dispatch),
        rps_share=rps_share_achieved(case, dispatch),
        workers=opts.workers,
    )


def run_benders(
    case: SystemCase, scenario: str = None, opts: BendersOptions = None
) -> SolveReport:
    """Budgeted multi-cut decomposition until the gap closes.

    Each iteration solves the master, prices all subperiods at the
    proposed (y, q), takes UB as the best candidate seen, and adds one
    cut per subperiod. Stops when (UB - LB) / LB falls to ``rel_tol`` or
    after ``k_max`` iterations (reported as non-converged).
    """
    opts = opts or BendersOptions()
    state, master, blocks = init_state(case, scenario, relax=opts.relax)
    templates = {w: SubproblemTemplate(blocks, w) for w in master.weeks}
    backend = opts.engine
    c0 = blocks.invest.c0
    t0 = time.perf_counter()
    status = "non-converged"

    while state.k <= opts.k_max:
        y, q, theta, bound = solve_master(master, opts)
        state.y, state.q = y, q
        state.lb = bound
        results = _solve_all(templates, y, q, state.k, backend, opts.workers)
        candidate = float(c0 @ y) + sum(cut.value for cut, _ in results.values())
        if candidate < state.ub:
            state.ub = candidate
            state.best_y = y
            state.best_q = q
        gap = _safe_gap(state.ub, state.lb)
        state.trace.append(
            TraceRow(
                iteration=state.k,
                elapsed_ms=(time.perf_counter() - t0) * 1e3,
                ub=state.ub,
                lb=state.lb,
                gap=gap,
                sub_ms={w: ms for w, (_, ms) in results.items()},
            )
        )
        if gap <= opts.rel_tol:
            status = "converged"
            break
        for w in sorted(results):
            master.add_cut(results[w][0])
        state.k += 1
    else:
        state.k = opts.k_max

    x_w = {
        w: templates[w].solve(state.best_y, state.best_q[w], state.k, backend)[1]
        for w in master.weeks
    }
    wall_ms = (time.perf_counter() - t0) * 1e3
    return _finish_report(
        "benders", case, blocks, state, status, x_w, wall_ms, opts
    )


def run_classic_benders(
    case: SystemCase, scenario: str = None, opts: BendersOptions = None
) -> SolveReport:
    """Single-cut baseline: one coupled year-long subproblem per iteration."""
    opts = opts or BendersOptions()
    state, master, blocks = init_state(case, scenario, relax=opts.relax, classic=True)
    backend = opts.engine
    c0 = blocks.invest.c0
    case_weeks = case.time.weeks

    # year-long dispatch subproblem with coupling rows kept inside
    mono = assemble_monolithic(case, blocks.scenario, relax=True, blocks=blocks)
    op_obj = mono.instance.objective.copy()
    op_obj[: master.n_y] = 0.0
    base = replace(mono.instance, objective=op_obj)
    pinned, pin_rows = fix_columns(base, {j: 0.0 for j in range(master.n_y)})
    y_rows = np.asarray([pin_rows[j] for j in range(master.n_y)])

    t0 = time.perf_counter()
    status = "non-converged"
    best_x = None

    while state.k <= opts.k_max:
        y, _, theta, bound = solve_master(master, opts)
        state.y = y
        state.lb = bound
        ts = time.perf_counter()
        sol = backend.solve_lp(
            repin(pinned, pin_rows, {j: float(y[j]) for j in range(master.n_y)})
        )
        sub_ms = (time.perf_counter() - ts) * 1e3
        if sol.status is SolveStatus.INFEASIBLE:
            raise BendersError("subproblem: recourse violated (infeasible dispatch)")
        if sol.status is not SolveStatus.OPTIMAL:
            raise BendersError(f"subproblem: missing bounds ({sol.status.value})")
        candidate = float(c0 @ y) + sol.objective
        if candidate < state.ub:
            state.ub = candidate
            state.best_y = y
            best_x = sol.x
        gap = _safe_gap(state.ub, state.lb)
        state.trace.append(
            TraceRow(
                iteration=state.k,
                elapsed_ms=(time.perf_counter() - t0) * 1e3,
                ub=state.ub,
                lb=state.lb,
                gap=gap,
                sub_ms={0: sub_ms},
            )
        )
        if gap <= opts.rel_tol:
            status = "converged"
            break
        master.add_cut(
            CutRecord(
                w=0,
                j=state.k,
                value=float(sol.objective),
                pi=_clean(sol.duals[y_rows]),
                lam=np.zeros(0),
                y_anchor=y.copy(),
                q_anchor=np.zeros(0),
            )
        )
        state.k += 1
    else:
        state.k = opts.k_max

    n_x = mono.xindex.n
    x_w = {w: best_x[mono.x_offset[w] : mono.x_offset[w] + n_x] for w in case_weeks}
    wall_ms = (time.perf_counter() - t0) * 1e3
    return _finish_report(
        "benders-classic", case, blocks, state, status, x_w, wall_ms, opts
    )
