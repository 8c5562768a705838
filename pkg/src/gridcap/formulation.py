"""Translate a planning case into sparse block form.

The model splits into an investment polytope over the capacity vector y,
one operational block per subperiod over a dispatch vector x_w, and (for
policy scenarios) a coupling row spanning all subperiods. Two assemblies
are offered: the plain monolithic stacking, and a budgeted variant that
introduces per-subperiod allocations q_w of the coupling right-hand side
which sum to the original bound. Both have the same optimal value; the
budgeted form is what the decomposition engine splits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .model import ResourceCluster, SystemCase
from .solver import EQ, GE, LE, Instance

__all__ = [
    "InvestmentIndex",
    "OperationalIndex",
    "InvestmentBlock",
    "OperationalBlock",
    "PolicyBlock",
    "CompactBlocks",
    "AssembledInstance",
    "build_investment_block",
    "build_operational_block",
    "build_policy_block",
    "build_blocks",
    "assemble_monolithic",
    "assemble_budgeted",
    "extract_dispatch",
    "Dispatch",
]


class InvestmentIndex:
    """Column layout of the capacity vector y.

    Every cluster owns unit-count columns for additions and retirements
    plus a derived net-MW column; storage clusters add the three energy
    counterparts; every line owns an added-MW column and a derived
    total-MW column. Unit-count and line-addition columns are the integer
    ones.
    """

    def __init__(self, case: SystemCase):
        self.new_units: dict[str, int] = {}
        self.retired_units: dict[str, int] = {}
        self.power: dict[str, int] = {}
        self.energy_new: dict[str, int] = {}
        self.energy_retired: dict[str, int] = {}
        self.energy: dict[str, int] = {}
        self.line_new: dict[str, int] = {}
        self.line_cap: dict[str, int] = {}
        col = 0
        for g in case.clusters:
            self.new_units[g.id] = col
            self.retired_units[g.id] = col + 1
            self.power[g.id] = col + 2
            col += 3
        for g in case.clusters:
            if g.is_storage:
                self.energy_new[g.id] = col
                self.energy_retired[g.id] = col + 1
                self.energy[g.id] = col + 2
                col += 3
        for l in case.lines:
            self.line_new[l.id] = col
            self.line_cap[l.id] = col + 1
            col += 2
        self.n = col
        self.integer_cols = sorted(
            list(self.new_units.values())
            + list(self.retired_units.values())
            + list(self.energy_new.values())
            + list(self.energy_retired.values())
            + list(self.line_new.values())
        )

    def names(self) -> list[str]:
        out = [""] * self.n
        for d, label in (
            (self.new_units, "new_units"),
            (self.retired_units, "retired_units"),
            (self.power, "power_mw"),
            (self.energy_new, "energy_new_units"),
            (self.energy_retired, "energy_retired_units"),
            (self.energy, "energy_mwh"),
            (self.line_new, "line_new_mw"),
            (self.line_cap, "line_mw"),
        ):
            for k, c in d.items():
                out[c] = f"{label}[{k}]"
        return out


class OperationalIndex:
    """Column layout of one subperiod's dispatch vector x_w.

    Layouts are identical for every subperiod; per-hour columns are laid
    out contiguously with stride one over the subperiod's hours.
    """

    def __init__(self, case: SystemCase, scenario: str):
        tau = case.time.tau
        self.tau = tau
        col = 0

        def block(ids) -> dict[str, int]:
            nonlocal col
            d = {}
            for i in ids:
                d[i] = col
                col += tau
            return d

        self.gen = block(g.id for g in case.clusters)
        self.charge = block(g.id for g in case.storage_clusters)
        self.soc = block(g.id for g in case.storage_clusters)
        self.level = block(g.id for g in case.hydro_clusters)
        self.spill = block(g.id for g in case.hydro_clusters)
        self.flow = block(l.id for l in case.lines)
        self.nse = block((s.id, z) for s in case.segments for z in case.zones)
        self.commit = block(g.id for g in case.uc_clusters)
        self.start = block(g.id for g in case.uc_clusters)
        self.shut = block(g.id for g in case.uc_clusters)
        self.slack: Optional[int] = None
        if scenario in ("rps", "co2"):
            self.slack = col
            col += 1
        self.n = col
        # interzonal flow may run against a line's orientation
        self.free_cols = np.concatenate(
            [np.arange(c, c + tau) for c in self.flow.values()]
        ).astype(int) if self.flow else np.zeros(0, dtype=int)

    def hours(self, start: int) -> np.ndarray:
        return np.arange(start, start + self.tau)


class _RowBuilder:
    """Accumulates sparse rows split into dispatch (A) and capacity (B) parts."""

    def __init__(self):
        self._a = ([], [], [])
        self._b = ([], [], [])
        self.rhs: list[np.ndarray] = []
        self.senses: list[np.ndarray] = []
        self.families: list[tuple[str, int, int]] = []
        self.n_rows = 0

    def rows(self, family: str, count: int, sense: str, rhs=0.0) -> np.ndarray:
        start = self.n_rows
        self.n_rows += count
        self.senses.append(np.full(count, sense, dtype="<U1"))
        self.rhs.append(np.broadcast_to(np.asarray(rhs, dtype=float), (count,)))
        self.families.append((family, start, self.n_rows))
        return np.arange(start, self.n_rows)

    @staticmethod
    def _put(store, rows, cols, vals):
        rows = np.asarray(rows)
        cols = np.broadcast_to(np.asarray(cols), rows.shape)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), rows.shape)
        store[0].append(rows.ravel())
        store[1].append(cols.ravel())
        store[2].append(vals.ravel())

    def a(self, rows, cols, vals) -> None:
        self._put(self._a, rows, cols, vals)

    def b(self, rows, cols, vals) -> None:
        self._put(self._b, rows, cols, vals)

    def matrices(self, n_a: int, n_b: int):
        def pack(store, ncols):
            if store[0]:
                r = np.concatenate(store[0])
                c = np.concatenate(store[1])
                v = np.concatenate(store[2])
            else:
                r = c = v = np.zeros(0)
            return sp.csr_matrix((v, (r, c)), shape=(self.n_rows, ncols))

        A = pack(self._a, n_a)
        B = pack(self._b, n_b)
        senses = (
            np.concatenate(self.senses) if self.senses else np.zeros(0, dtype="<U1")
        )
        rhs = np.concatenate(self.rhs) if self.rhs else np.zeros(0)
        return A, B, senses, rhs


@dataclass(frozen=True, eq=False)
class InvestmentBlock:
    R: sp.csr_matrix
    senses: np.ndarray
    r: np.ndarray
    c0: np.ndarray
    index: InvestmentIndex
    families: tuple[tuple[str, int, int], ...]


@dataclass(frozen=True, eq=False)
class OperationalBlock:
    w: int
    A: sp.csr_matrix
    B: sp.csr_matrix
    senses: np.ndarray
    b: np.ndarray
    c: np.ndarray
    index: OperationalIndex
    families: tuple[tuple[str, int, int], ...]

    def __post_init__(self):
        if not (
            self.A.shape[0] == self.B.shape[0] == len(self.senses) == len(self.b)
        ):
            raise ValueError("operational block dimensions inconsistent")


@dataclass(frozen=True, eq=False)
class PolicyBlock:
    Q: dict[int, sp.csr_matrix]  # subperiod -> (n_coupling, n_x)
    e: np.ndarray

    @property
    def n_coupling(self) -> int:
        return len(self.e)


@dataclass(frozen=True, eq=False)
class CompactBlocks:
    case: SystemCase
    scenario: str
    invest: InvestmentBlock
    ops: dict[int, OperationalBlock]
    policy: PolicyBlock


def build_investment_block(case: SystemCase):
    """Capacity polytope rows, fixed-cost vector, and the y layout.

    Capacity-definition rows are tagged as equalities so a solve reports
    one dual per definition.
    """
    idx = InvestmentIndex(case)
    rb = _RowBuilder()
    for g in case.clusters:
        rows = rb.rows("new_units_cap", 1, LE, g.max_new_mw)
        rb.a(rows, idx.new_units[g.id], g.unit_size_mw)
        rows = rb.rows("retired_units_cap", 1, LE, g.existing_mw)
        rb.a(rows, idx.retired_units[g.id], g.unit_size_mw)
        if g.non_retirable:
            rows = rb.rows("no_retirement", 1, EQ, 0.0)
            rb.a(rows, idx.retired_units[g.id], 1.0)
        rows = rb.rows("power_definition", 1, EQ, g.existing_mw)
        rb.a(rows, idx.power[g.id], 1.0)
        rb.a(rows, idx.new_units[g.id], -g.unit_size_mw)
        rb.a(rows, idx.retired_units[g.id], g.unit_size_mw)
    for g in case.storage_clusters:
        st = g.storage
        rows = rb.rows("energy_new_cap", 1, LE, st.max_new_energy_mwh)
        rb.a(rows, idx.energy_new[g.id], st.unit_energy_mwh)
        rows = rb.rows("energy_retired_cap", 1, LE, st.existing_energy_mwh)
        rb.a(rows, idx.energy_retired[g.id], st.unit_energy_mwh)
        if g.non_retirable:
            rows = rb.rows("no_energy_retirement", 1, EQ, 0.0)
            rb.a(rows, idx.energy_retired[g.id], 1.0)
        rows = rb.rows("energy_definition", 1, EQ, st.existing_energy_mwh)
        rb.a(rows, idx.energy[g.id], 1.0)
        rb.a(rows, idx.energy_new[g.id], -st.unit_energy_mwh)
        rb.a(rows, idx.energy_retired[g.id], st.unit_energy_mwh)
        rows = rb.rows("min_duration", 1, LE, 0.0)
        rb.a(rows, idx.power[g.id], st.min_duration_h)
        rb.a(rows, idx.energy[g.id], -1.0)
        rows = rb.rows("max_duration", 1, LE, 0.0)
        rb.a(rows, idx.energy[g.id], 1.0)
        rb.a(rows, idx.power[g.id], -st.max_duration_h)
    for l in case.lines:
        rows = rb.rows("line_new_cap", 1, LE, l.max_new_mw)
        rb.a(rows, idx.line_new[l.id], 1.0)
        rows = rb.rows("line_definition", 1, EQ, l.existing_mw)
        rb.a(rows, idx.line_cap[l.id], 1.0)
        rb.a(rows, idx.line_new[l.id], -1.0)

    R, _, senses, r = rb.matrices(idx.n, 0)

    c0 = np.zeros(idx.n)
    for g in case.clusters:
        c0[idx.new_units[g.id]] += g.inv_cost_per_mw_yr * g.unit_size_mw
        c0[idx.power[g.id]] += g.fom_cost_per_mw_yr
        if g.is_hydro:
            hy = g.hydro
            c0[idx.new_units[g.id]] += (
                hy.energy_inv_cost_per_mwh_yr * hy.duration_h * g.unit_size_mw
            )
            c0[idx.power[g.id]] += hy.energy_fom_cost_per_mwh_yr * hy.duration_h
        if g.is_storage:
            st = g.storage
            c0[idx.energy_new[g.id]] += (
                st.energy_inv_cost_per_mwh_yr * st.unit_energy_mwh
            )
            c0[idx.energy[g.id]] += st.energy_fom_cost_per_mwh_yr
    for l in case.lines:
        c0[idx.line_new[l.id]] += l.cost_per_mw_yr

    return InvestmentBlock(
        R=R, senses=senses, r=r, c0=c0, index=idx, families=tuple(rb.families)
    )


def _alpha(case: SystemCase, w: int) -> float:
    return case.time.weight(w) / case.time.tau


def build_operational_block(
    case: SystemCase,
    w: int,
    scenario: str = None,
    yindex: InvestmentIndex = None,
    xindex: OperationalIndex = None,
):
    """Dispatch rows of one subperiod: A_w x_w + B_w y (sense) b_w plus costs.

    Hour-to-hour rows (storage balance, ramping, commitment continuity,
    minimum up and down times) treat the subperiod as a circular array,
    so the row at the first hour links it back to the last one.
    """
    scenario = scenario or case.policy.scenario
    yindex = yindex or InvestmentIndex(case)
    xindex = xindex or OperationalIndex(case, scenario)
    ts = case.time
    tau = ts.tau
    sl = ts.positions_of(w)
    alpha = _alpha(case, w)
    k = np.arange(tau)
    prev = (k - 1) % tau  # row at hour 0 becomes the wrap row
    rb = _RowBuilder()
    nh = ts.total_hours

    storage_ids = {g.id for g in case.storage_clusters}
    by_zone: dict[str, list[ResourceCluster]] = {z: [] for z in case.zones}
    for g in case.clusters:
        by_zone[g.zone].append(g)

    for z in case.zones:
        rows = rb.rows("balance", tau, EQ, case.demand[z][sl])
        for g in by_zone[z]:
            rb.a(rows, xindex.gen[g.id] + k, 1.0)
            if g.is_storage:
                rb.a(rows, xindex.charge[g.id] + k, -1.0)
        for l in case.lines:
            if l.from_zone == z:
                rb.a(rows, xindex.flow[l.id] + k, -1.0)
            elif l.to_zone == z:
                rb.a(rows, xindex.flow[l.id] + k, 1.0)
        for s in case.segments:
            rb.a(rows, xindex.nse[(s.id, z)] + k, 1.0)

    for g in case.clusters:
        sigma = g.sigma(nh)[sl]
        pcol = yindex.power[g.id]
        if not g.is_uc:
            rows = rb.rows("availability", tau, LE)
            rb.a(rows, xindex.gen[g.id] + k, 1.0)
            rb.b(rows, pcol, -sigma)
        if g.is_storage:
            st = g.storage
            ecol = yindex.energy[g.id]
            rows = rb.rows("charge_availability", tau, LE)
            rb.a(rows, xindex.charge[g.id] + k, 1.0)
            rb.b(rows, pcol, -sigma)
            rows = rb.rows("power_split", tau, LE)
            rb.a(rows, xindex.gen[g.id] + k, 1.0)
            rb.a(rows, xindex.charge[g.id] + k, 1.0)
            rb.b(rows, pcol, -1.0)
            rows = rb.rows("soc_cap", tau, LE)
            rb.a(rows, xindex.soc[g.id] + k, 1.0)
            rb.b(rows, ecol, -1.0)
            rows = rb.rows("charge_headroom", tau, LE)
            rb.a(rows, xindex.charge[g.id] + k, st.charge_efficiency)
            rb.a(rows, xindex.soc[g.id] + k, 1.0)
            rb.b(rows, ecol, -1.0)
            rows = rb.rows("discharge_energy", tau, LE)
            rb.a(rows, xindex.gen[g.id] + k, 1.0 / st.discharge_efficiency)
            rb.a(rows, xindex.soc[g.id] + k, -1.0)
            rows = rb.rows("soc_balance", tau, EQ)
            rb.a(rows, xindex.soc[g.id] + k, 1.0)
            rb.a(rows, xindex.soc[g.id] + prev, -(1.0 - st.self_discharge))
            rb.a(rows, xindex.charge[g.id] + k, -st.charge_efficiency)
            rb.a(rows, xindex.gen[g.id] + k, 1.0 / st.discharge_efficiency)
        if g.is_hydro:
            hy = g.hydro
            rows = rb.rows("level_cap", tau, LE)
            rb.a(rows, xindex.level[g.id] + k, 1.0)
            rb.b(rows, pcol, -hy.duration_h)
            rows = rb.rows("hydro_min_output", tau, LE)
            rb.a(rows, xindex.gen[g.id] + k, -1.0)
            rb.a(rows, xindex.spill[g.id] + k, -1.0)
            rb.b(rows, pcol, g.min_output_fraction)
            rows = rb.rows("hydro_balance", tau, EQ)
            rb.a(rows, xindex.level[g.id] + k, 1.0)
            rb.a(rows, xindex.level[g.id] + prev, -1.0)
            rb.a(rows, xindex.gen[g.id] + k, 1.0)
            rb.a(rows, xindex.spill[g.id] + k, 1.0)
            rb.b(rows, pcol, -hy.inflow[sl])
        elif not g.is_uc and not g.is_storage:
            rows = rb.rows("min_output", tau, LE)
            rb.a(rows, xindex.gen[g.id] + k, -1.0)
            rb.b(rows, pcol, g.min_output_fraction)
        if not g.is_uc:
            rows = rb.rows("ramp_up", tau, LE)
            rb.a(rows, xindex.gen[g.id] + k, 1.0)
            rb.a(rows, xindex.gen[g.id] + prev, -1.0)
            rb.b(rows, pcol, -g.ramp_up_fraction)
            rows = rb.rows("ramp_down", tau, LE)
            rb.a(rows, xindex.gen[g.id] + prev, 1.0)
            rb.a(rows, xindex.gen[g.id] + k, -1.0)
            rb.b(rows, pcol, -g.ramp_down_fraction)

    for l in case.lines:
        tcol = yindex.line_cap[l.id]
        rows = rb.rows("flow_forward", tau, LE)
        rb.a(rows, xindex.flow[l.id] + k, 1.0)
        rb.b(rows, tcol, -1.0)
        rows = rb.rows("flow_reverse", tau, LE)
        rb.a(rows, xindex.flow[l.id] + k, -1.0)
        rb.b(rows, tcol, -1.0)

    for s in case.segments:
        for z in case.zones:
            rows = rb.rows("nse_cap", tau, LE, s.max_fraction * case.demand[z][sl])
            rb.a(rows, xindex.nse[(s.id, z)] + k, 1.0)

    for g in case.uc_clusters:
        size = g.unit_size_mw
        sigma = g.sigma(nh)[sl]
        rho = g.min_output_fraction
        pcol = yindex.power[g.id]
        for fam, col in (
            ("commit_cap", xindex.commit[g.id]),
            ("start_cap", xindex.start[g.id]),
            ("shut_cap", xindex.shut[g.id]),
        ):
            rows = rb.rows(fam, tau, LE)
            rb.a(rows, col + k, size)
            rb.b(rows, pcol, -1.0)
        rows = rb.rows("commit_min_output", tau, LE)
        rb.a(rows, xindex.gen[g.id] + k, -1.0)
        rb.a(rows, xindex.commit[g.id] + k, rho * size)
        rows = rb.rows("commit_max_output", tau, LE)
        rb.a(rows, xindex.gen[g.id] + k, 1.0)
        rb.a(rows, xindex.commit[g.id] + k, -sigma * size)
        rows = rb.rows("commit_balance", tau, EQ)
        rb.a(rows, xindex.commit[g.id] + k, 1.0)
        rb.a(rows, xindex.commit[g.id] + prev, -1.0)
        rb.a(rows, xindex.start[g.id] + k, -1.0)
        rb.a(rows, xindex.shut[g.id] + k, 1.0)

        # start/stop hours may move within min(sigma, max(rho, ramp))
        m_up = np.minimum(sigma, max(rho, g.ramp_up_fraction))
        m_dn = np.minimum(sigma, max(rho, g.ramp_down_fraction))
        rows = rb.rows("commit_ramp_up", tau, LE)
        rb.a(rows, xindex.gen[g.id] + k, 1.0)
        rb.a(rows, xindex.gen[g.id] + prev, -1.0)
        rb.a(rows, xindex.commit[g.id] + k, -size * g.ramp_up_fraction)
        rb.a(rows, xindex.start[g.id] + k, size * (g.ramp_up_fraction - m_up))
        rb.a(rows, xindex.shut[g.id] + k, size * rho)
        rows = rb.rows("commit_ramp_down", tau, LE)
        rb.a(rows, xindex.gen[g.id] + prev, 1.0)
        rb.a(rows, xindex.gen[g.id] + k, -1.0)
        rb.a(rows, xindex.commit[g.id] + k, -size * g.ramp_down_fraction)
        rb.a(rows, xindex.start[g.id] + k, size * (g.ramp_down_fraction + rho))
        rb.a(rows, xindex.shut[g.id] + k, -size * m_dn)

        back_up = (k[:, None] - np.arange(g.min_up_hours + 1)[None, :]) % tau
        rows = rb.rows("min_up", tau, LE)
        rb.a(rows, xindex.commit[g.id] + k, -1.0)
        rb.a(
            np.repeat(rows, g.min_up_hours + 1),
            (xindex.start[g.id] + back_up).ravel(),
            1.0,
        )
        back_dn = (k[:, None] - np.arange(g.min_down_hours + 1)[None, :]) % tau
        rows = rb.rows("min_down", tau, LE)
        rb.a(rows, xindex.commit[g.id] + k, 1.0)
        rb.a(
            np.repeat(rows, g.min_down_hours + 1),
            (xindex.shut[g.id] + back_dn).ravel(),
            1.0,
        )
        rb.b(rows, pcol, -1.0 / size)

    A, B, senses, b = rb.matrices(xindex.n, yindex.n)

    c = np.zeros(xindex.n)
    for g in case.clusters:
        c[xindex.gen[g.id] + k] += alpha * g.var_cost_per_mwh
        if g.is_storage:
            c[xindex.charge[g.id] + k] += alpha * g.var_cost_per_mwh
    for s in case.segments:
        for z in case.zones:
            c[xindex.nse[(s.id, z)] + k] += alpha * s.cost_per_mwh
    for g in case.uc_clusters:
        c[xindex.start[g.id] + k] += alpha * g.startup_cost
    if scenario == "rps":
        c[xindex.slack] = case.policy.penalty_rps
    elif scenario == "co2":
        c[xindex.slack] = case.policy.penalty_co2

    return OperationalBlock(
        w=w,
        A=A,
        B=B,
        senses=senses,
        b=b,
        c=c,
        index=xindex,
        families=tuple(rb.families),
    )


def build_policy_block(
    case: SystemCase, scenario: str, xindex: OperationalIndex = None
) -> PolicyBlock:
    """Coupling rows tying all subperiods together, in <= orientation.

    The reference scenario has none. The renewable-share scenario requires
    weighted qualifying generation plus slack to cover the target share of
    weighted demand; the emissions scenario caps weighted emissions from
    generation and storage charging minus slack.
    """
    if scenario == "ref":
        return PolicyBlock(Q={w: sp.csr_matrix((0, 0)) for w in case.time.weeks}, e=np.zeros(0))
    if scenario not in ("rps", "co2"):
        raise ValueError(f"unknown scenario {scenario!r}")

    xindex = xindex or OperationalIndex(case, scenario)
    tau = case.time.tau
    k = np.arange(tau)
    total = case.weighted_demand()
    Q: dict[int, sp.csr_matrix] = {}
    for w in case.time.weeks:
        alpha = _alpha(case, w)
        cols: list[np.ndarray] = []
        vals: list[np.ndarray] = []
        if scenario == "rps":
            for g in case.clusters:
                if g.rps_eligible:
                    cols.append(xindex.gen[g.id] + k)
                    vals.append(np.full(tau, -alpha))
        else:
            for g in case.clusters:
                if g.emissions_t_per_mwh > 0:
                    cols.append(xindex.gen[g.id] + k)
                    vals.append(np.full(tau, alpha * g.emissions_t_per_mwh))
                    if g.is_storage:
                        cols.append(xindex.charge[g.id] + k)
                        vals.append(np.full(tau, alpha * g.emissions_t_per_mwh))
        cols.append(np.asarray([xindex.slack]))
        vals.append(np.asarray([-1.0]))
        ci = np.concatenate(cols)
        vi = np.concatenate(vals)
        Q[w] = sp.csr_matrix((vi, (np.zeros(len(ci), dtype=int), ci)), shape=(1, xindex.n))
    if scenario == "rps":
        e = np.asarray([-case.policy.rps_share * total])
    else:
        e = np.asarray([case.policy.co2_t_per_mwh * total])
    return PolicyBlock(Q=Q, e=e)


def build_blocks(case: SystemCase, scenario: str = None) -> CompactBlocks:
    """Build all blocks of a case for one scenario."""
    scenario = scenario or case.policy.scenario
    invest = build_investment_block(case)
    xindex = OperationalIndex(case, scenario)
    ops = {
        w: build_operational_block(case, w, scenario, invest.index, xindex)
        for w in case.time.weeks
    }
    policy = build_policy_block(case, scenario, xindex)
    return CompactBlocks(
        case=case, scenario=scenario, invest=invest, ops=ops, policy=policy
    )


@dataclass(frozen=True, eq=False)
class AssembledInstance:
    """A solver instance together with its column bookkeeping."""

    instance: Instance
    blocks: CompactBlocks
    relax: bool
    x_offset: dict[int, int]  # subperiod -> first column of its x block
    q_cols: dict[int, np.ndarray]  # subperiod -> budget columns (may be empty)

    @property
    def case(self) -> SystemCase:
        return self.blocks.case

    @property
    def yindex(self) -> InvestmentIndex:
        return self.blocks.invest.index

    @property
    def xindex(self) -> OperationalIndex:
        return next(iter(self.blocks.ops.values())).index

    def split(self, x: np.ndarray) -> tuple[np.ndarray, dict[int, np.ndarray]]:
        """Split a flat solution into the capacity vector and per-week parts."""
        n_x = self.xindex.n
        y = x[: self.yindex.n].copy()
        x_w = {
            w: x[off : off + n_x].copy() for w, off in self.x_offset.items()
        }
        return y, x_w


def _stack(
    blocks: CompactBlocks, relax: bool, budgeted: bool
) -> AssembledInstance:
    case = blocks.case
    inv = blocks.invest
    weeks = case.time.weeks
    n_y = inv.index.n
    n_x = next(iter(blocks.ops.values())).index.n
    n_c = blocks.policy.n_coupling

    x_offset = {w: n_y + i * n_x for i, w in enumerate(weeks)}
    q_cols: dict[int, np.ndarray] = {w: np.zeros(0, dtype=int) for w in weeks}
    n_cols = n_y + len(weeks) * n_x
    if budgeted and n_c:
        for i, w in enumerate(weeks):
            q_cols[w] = np.arange(n_cols + i * n_c, n_cols + (i + 1) * n_c)
        n_cols += len(weeks) * n_c

    ri: list[np.ndarray] = []
    ci: list[np.ndarray] = []
    vi: list[np.ndarray] = []
    senses: list[np.ndarray] = []
    rhs: list[np.ndarray] = []
    row0 = 0

    def push(mat: sp.spmatrix, row_off: int, col_off: int):
        coo = mat.tocoo()
        ri.append(coo.row + row_off)
        ci.append(coo.col + col_off)
        vi.append(coo.data)

    push(inv.R, 0, 0)
    senses.append(inv.senses)
    rhs.append(inv.r)
    row0 += inv.R.shape[0]

    for w in weeks:
        op = blocks.ops[w]
        push(op.A, row0, x_offset[w])
        push(op.B, row0, 0)
        senses.append(op.senses)
        rhs.append(op.b)
        row0 += op.A.shape[0]

    if n_c:
        if budgeted:
            for w in weeks:
                push(blocks.policy.Q[w], row0, x_offset[w])
                qc = q_cols[w]
                ri.append(np.arange(row0, row0 + n_c))
                ci.append(qc)
                vi.append(np.full(n_c, -1.0))
                senses.append(np.full(n_c, LE, dtype="<U1"))
                rhs.append(np.zeros(n_c))
                row0 += n_c
            for j in range(n_c):
                ri.append(np.full(len(weeks), row0 + j))
                ci.append(np.asarray([q_cols[w][j] for w in weeks]))
                vi.append(np.ones(len(weeks)))
            senses.append(np.full(n_c, EQ, dtype="<U1"))
            rhs.append(blocks.policy.e.astype(float))
            row0 += n_c
        else:
            for w in weeks:
                push(blocks.policy.Q[w], row0, x_offset[w])
            senses.append(np.full(n_c, LE, dtype="<U1"))
            rhs.append(blocks.policy.e.astype(float))
            row0 += n_c

    obj = np.zeros(n_cols)
    obj[:n_y] = inv.c0
    xindex = next(iter(blocks.ops.values())).index
    for w in weeks:
        obj[x_offset[w] : x_offset[w] + n_x] = blocks.ops[w].c

    free = np.zeros(n_cols, dtype=bool)
    for w in weeks:
        free[x_offset[w] + xindex.free_cols] = True
        free[q_cols[w]] = True
    integer = np.zeros(n_cols, dtype=bool)
    if not relax:
        integer[inv.index.integer_cols] = True

    matrix = sp.csr_matrix(
        (np.concatenate(vi), (np.concatenate(ri), np.concatenate(ci))),
        shape=(row0, n_cols),
    )
    inst = Instance(
        objective=obj,
        matrix=matrix,
        senses=np.concatenate(senses),
        rhs=np.concatenate(rhs),
        free=free,
        integer=integer,
        name=f"{case.name}:{blocks.scenario}:{'budgeted' if budgeted else 'monolithic'}",
    )
    return AssembledInstance(
        instance=inst, blocks=blocks, relax=relax, x_offset=x_offset, q_cols=q_cols
    )


def assemble_monolithic(
    case: SystemCase,
    scenario: str = None,
    relax: bool = False,
    blocks: CompactBlocks = None,
) -> AssembledInstance:
    """One instance stacking every block, coupling rows spanning all weeks."""
    blocks = blocks or build_blocks(case, scenario)
    return _stack(blocks, relax, budgeted=False)


def assemble_budgeted(
    case: SystemCase,
    scenario: str = None,
    relax: bool = False,
    blocks: CompactBlocks = None,
) -> AssembledInstance:
    """Equivalent instance with per-subperiod budget columns q_w.

    Each coupling row is replaced by per-subperiod rows Q_w x_w <= q_w
    plus an allocation row summing the budgets to the original bound. The
    optimal value matches the monolithic assembly. Without coupling rows
    this is exactly the monolithic assembly.
    """
    blocks = blocks or build_blocks(case, scenario)
    return _stack(blocks, relax, budgeted=True)


@dataclass(eq=False)
class Dispatch:
    """Solution values regrouped by meaning for reporting and audit."""

    investments: dict[str, dict[str, float]]
    line_investments: dict[str, dict[str, float]]
    gen: dict[str, np.ndarray]
    charge: dict[str, np.ndarray]
    soc: dict[str, np.ndarray]
    level: dict[str, np.ndarray]
    spill: dict[str, np.ndarray]
    flow: dict[str, np.ndarray]
    nse: dict[tuple[str, str], np.ndarray]
    commit: dict[str, np.ndarray]
    start: dict[str, np.ndarray]
    shut: dict[str, np.ndarray]
    slack: dict[int, float]


def extract_dispatch(
    blocks: CompactBlocks, y: np.ndarray, x_w: dict[int, np.ndarray]
) -> Dispatch:
    """Regroup capacity and per-week solution vectors by meaning."""
    case = blocks.case
    yi = blocks.invest.index
    xi = next(iter(blocks.ops.values())).index
    ts = case.time
    tau = ts.tau
    nh = ts.total_hours

    inv = {}
    for g in case.clusters:
        rec = {
            "new_units": float(y[yi.new_units[g.id]]),
            "retired_units": float(y[yi.retired_units[g.id]]),
            "power_mw": float(y[yi.power[g.id]]),
        }
        if g.is_storage:
            rec.update(
                energy_new_units=float(y[yi.energy_new[g.id]]),
                energy_retired_units=float(y[yi.energy_retired[g.id]]),
                energy_mwh=float(y[yi.energy[g.id]]),
            )
        inv[g.id] = rec
    linv = {
        l.id: {
            "new_mw": float(y[yi.line_new[l.id]]),
            "total_mw": float(y[yi.line_cap[l.id]]),
        }
        for l in case.lines
    }

    def gather(colmap: dict) -> dict:
        out = {}
        for key, col in colmap.items():
            arr = np.zeros(nh)
            for w in ts.weeks:
                arr[ts.positions_of(w)] = x_w[w][col : col + tau]
            out[key] = arr
        return out

    slack = {}
    if xi.slack is not None:
        for w in ts.weeks:
            slack[w] = float(x_w[w][xi.slack])

    return Dispatch(
        investments=inv,
        line_investments=linv,
        gen=gather(xi.gen),
        charge=gather(xi.charge),
        soc=gather(xi.soc),
        level=gather(xi.level),
        spill=gather(xi.spill),
        flow=gather(xi.flow),
        nse=gather(xi.nse),
        commit=gather(xi.commit),
        start=gather(xi.start),
        shut=gather(xi.shut),
        slack=slack,
    )
