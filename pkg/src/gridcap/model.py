"""Domain model for a single-period planning case.

A case bundles zones, resource clusters (thermal, renewable, storage,
hydro, unit-commitment), transmission lines, hourly demand, the subperiod
time structure, and the active policy scenario. All types are immutable
after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

SCENARIOS = ("ref", "rps", "co2")

#: Default penalty (USD per unit of slack) charged for violating a policy
#: constraint. Must exceed every marginal abatement cost in the case.
DEFAULT_POLICY_PENALTY = 5.0e4


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(np.asarray(a, dtype=float))
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class TimeStructure:
    """Subperiod layout of the planning year.

    ``weeks`` holds the subperiod ids kept in the case, ``tau`` the number
    of hours per subperiod, and ``rho`` the hours of the year each kept
    subperiod represents. Hour ids are 1-based and global: subperiod w
    covers hours (w-1)*tau+1 .. w*tau, so sampled cases keep the original
    ids of the hours they retain.
    """

    weeks: tuple[int, ...]
    tau: int
    rho: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weeks", tuple(int(w) for w in self.weeks))
        object.__setattr__(self, "rho", tuple(float(r) for r in self.rho))
        if len(self.weeks) != len(self.rho):
            raise ValueError("one weight per subperiod required")
        if len(set(self.weeks)) != len(self.weeks):
            raise ValueError("subperiod ids must be distinct")
        if list(self.weeks) != sorted(self.weeks):
            raise ValueError("subperiod ids must be sorted")

    @property
    def n_weeks(self) -> int:
        return len(self.weeks)

    @property
    def total_hours(self) -> int:
        """Number of modeled hours (length of every profile array)."""
        return self.n_weeks * self.tau

    @property
    def year_hours(self) -> float:
        """Hours of the planning year represented by the kept subperiods."""
        return float(sum(self.rho))

    def week_pos(self, w: int) -> int:
        try:
            return self.weeks.index(w)
        except ValueError:
            raise KeyError(f"subperiod {w} not in case") from None

    def weight(self, w: int) -> float:
        return self.rho[self.week_pos(w)]

    def t_first(self, w: int) -> int:
        """First hour id of subperiod w."""
        self.week_pos(w)
        return (w - 1) * self.tau + 1

    def t_last(self, w: int) -> int:
        """Last hour id of subperiod w."""
        self.week_pos(w)
        return w * self.tau

    def hours_of(self, w: int) -> range:
        """Hour ids of subperiod w, in order."""
        return range(self.t_first(w), self.t_last(w) + 1)

    def week_of(self, t: int) -> int:
        """Subperiod containing hour t; KeyError for an orphan hour."""
        w = (int(t) - 1) // self.tau + 1
        if t < 1 or w not in self.weeks:
            raise KeyError(f"hour {t} belongs to no kept subperiod")
        return w

    def position(self, t: int) -> int:
        """Index of hour t in the modeled-hour profile arrays."""
        w = self.week_of(t)
        return self.week_pos(w) * self.tau + (int(t) - 1) % self.tau

    def positions_of(self, w: int) -> slice:
        p = self.week_pos(w)
        return slice(p * self.tau, (p + 1) * self.tau)

    def alpha_array(self) -> np.ndarray:
        """Per-modeled-hour weights, aligned with profile arrays."""
        return np.repeat(np.asarray(self.rho) / self.tau, self.tau)


def circular_prev(t: int, n: int, w: int, ts: TimeStructure) -> int:
    """Hour id n steps before t when subperiod w wraps around on itself.

    The hours of w form a circular array of length tau, so stepping back
    past the first hour lands on the last one.
    """
    if not 0 <= n < ts.tau:
        raise ValueError(f"step count {n} outside [0, {ts.tau})")
    t0 = ts.t_first(w)
    off = int(t) - t0
    if not 0 <= off < ts.tau:
        raise ValueError(f"hour {t} not in subperiod {w}")
    return t0 + (off - n) % ts.tau


def timestep_weight(t: int, ts: TimeStructure) -> float:
    """Weight alpha of hour t: year hours represented per modeled hour."""
    w = ts.week_of(t)
    return ts.weight(w) / ts.tau


@dataclass(frozen=True, eq=False)
class StorageAttributes:
    """Energy-side parameters of a storage cluster."""

    unit_energy_mwh: float
    existing_energy_mwh: float = 0.0
    max_new_energy_mwh: float = 0.0
    min_duration_h: float = 0.0
    max_duration_h: float = 1e9
    charge_efficiency: float = 1.0
    discharge_efficiency: float = 1.0
    self_discharge: float = 0.0
    energy_inv_cost_per_mwh_yr: float = 0.0
    energy_fom_cost_per_mwh_yr: float = 0.0


@dataclass(frozen=True, eq=False)
class HydroAttributes:
    """Reservoir parameters of a hydro cluster.

    ``duration_h`` converts power capacity to reservoir energy; the inflow
    profile is normalized per MW of installed capacity.
    """

    duration_h: float
    inflow: np.ndarray  # fraction of power capacity, per modeled hour
    energy_inv_cost_per_mwh_yr: float = 0.0
    energy_fom_cost_per_mwh_yr: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "inflow", _freeze(self.inflow))


@dataclass(frozen=True, eq=False)
class ResourceCluster:
    """A cluster of identical units of one technology in one zone."""

    id: str
    zone: str
    unit_size_mw: float
    existing_mw: float = 0.0
    max_new_mw: float = 0.0
    availability: Optional[np.ndarray] = None  # sigma, per modeled hour
    min_output_fraction: float = 0.0
    ramp_up_fraction: float = 1.0
    ramp_down_fraction: float = 1.0
    emissions_t_per_mwh: float = 0.0
    var_cost_per_mwh: float = 0.0
    inv_cost_per_mw_yr: float = 0.0
    fom_cost_per_mw_yr: float = 0.0
    tech: str = ""
    rps_eligible: bool = False
    non_retirable: bool = False
    is_uc: bool = False
    startup_cost: Optional[float] = None
    min_up_hours: Optional[int] = None
    min_down_hours: Optional[int] = None
    storage: Optional[StorageAttributes] = None
    hydro: Optional[HydroAttributes] = None

    def __post_init__(self):
        if self.availability is not None:
            object.__setattr__(self, "availability", _freeze(self.availability))

    @property
    def is_storage(self) -> bool:
        return self.storage is not None

    @property
    def is_hydro(self) -> bool:
        return self.hydro is not None

    def sigma(self, total_hours: int) -> np.ndarray:
        """Availability profile, defaulting to full availability."""
        if self.availability is None:
            return np.ones(total_hours)
        return self.availability


@dataclass(frozen=True, eq=False)
class TransmissionLine:
    id: str
    from_zone: str
    to_zone: str
    existing_mw: float = 0.0
    max_new_mw: float = 0.0
    cost_per_mw_yr: float = 0.0


@dataclass(frozen=True, eq=False)
class ConsumerSegment:
    """A slice of demand that may be curtailed at a given cost."""

    id: str
    cost_per_mwh: float
    max_fraction: float


@dataclass(frozen=True, eq=False)
class PolicySpec:
    """Active policy scenario plus its parameters and violation penalties."""

    scenario: str = "ref"
    rps_share: float = 0.70
    co2_t_per_mwh: float = 0.05
    penalty_rps: float = DEFAULT_POLICY_PENALTY
    penalty_co2: float = DEFAULT_POLICY_PENALTY


@dataclass(frozen=True, eq=False)
class SystemCase:
    """A full planning instance. Validate with :func:`validate_case`."""

    name: str
    zones: tuple[str, ...]
    clusters: tuple[ResourceCluster, ...]
    lines: tuple[TransmissionLine, ...]
    demand: Mapping[str, np.ndarray]  # zone id -> MW per modeled hour
    segments: tuple[ConsumerSegment, ...]
    policy: PolicySpec
    time: TimeStructure

    def __post_init__(self):
        object.__setattr__(self, "zones", tuple(self.zones))
        object.__setattr__(self, "clusters", tuple(self.clusters))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(
            self, "demand", {z: _freeze(d) for z, d in self.demand.items()}
        )

    def cluster(self, cid: str) -> ResourceCluster:
        for g in self.clusters:
            if g.id == cid:
                return g
        raise KeyError(cid)

    @property
    def storage_clusters(self) -> tuple[ResourceCluster, ...]:
        return tuple(g for g in self.clusters if g.is_storage)

    @property
    def hydro_clusters(self) -> tuple[ResourceCluster, ...]:
        return tuple(g for g in self.clusters if g.is_hydro)

    @property
    def uc_clusters(self) -> tuple[ResourceCluster, ...]:
        return tuple(g for g in self.clusters if g.is_uc)

    def weighted_demand(self) -> float:
        """Total demand in MWh over the represented year (alpha weighted)."""
        total = 0.0
        for w in self.time.weeks:
            alpha = self.time.weight(w) / self.time.tau
            sl = self.time.positions_of(w)
            for z in self.zones:
                total += alpha * float(np.sum(self.demand[z][sl]))
        return total


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_case(case: SystemCase) -> ValidationReport:
    """Check a case for structural defects before any solve.

    Returns a report listing every violation found; callers must refuse to
    solve a case whose report is not ok. The check is pure: identical
    input yields an identical report.
    """
    bad: list[str] = []
    ts = case.time
    nh = ts.total_hours

    if not case.zones:
        bad.append("no zones")
    if len(set(case.zones)) != len(case.zones):
        bad.append("duplicate zone ids")
    if not case.clusters:
        bad.append("no resource clusters")
    if ts.tau <= 0:
        bad.append("hours per subperiod must be positive")
    if any(r <= 0 for r in ts.rho):
        bad.append("subperiod weights must be positive")

    seen = set()
    for g in case.clusters:
        tag = f"cluster {g.id}"
        if g.id in seen:
            bad.append(f"{tag}: duplicate id")
        seen.add(g.id)
        if g.zone not in case.zones:
            bad.append(f"{tag}: references unknown zone {g.zone!r}")
        if g.unit_size_mw <= 0:
            bad.append(f"{tag}: unit size must be positive")
        if g.existing_mw < 0 or g.max_new_mw < 0:
            bad.append(f"{tag}: capacities must be nonnegative")
        if not 0.0 <= g.min_output_fraction <= 1.0:
            bad.append(f"{tag}: minimum output fraction outside [0, 1]")
        if g.ramp_up_fraction < 0 or g.ramp_down_fraction < 0:
            bad.append(f"{tag}: ramp fractions must be nonnegative")
        if g.emissions_t_per_mwh < 0:
            bad.append(f"{tag}: emissions rate must be nonnegative")
        if g.availability is not None:
            if len(g.availability) != nh:
                bad.append(
                    f"{tag}: availability profile has {len(g.availability)} "
                    f"entries, expected {nh}"
                )
            elif np.any(g.availability < 0) or np.any(g.availability > 1):
                bad.append(f"{tag}: availability outside [0, 1]")

        has_uc_attrs = (
            g.startup_cost is not None
            or g.min_up_hours is not None
            or g.min_down_hours is not None
        )
        if g.is_uc:
            if g.startup_cost is None or g.min_up_hours is None or g.min_down_hours is None:
                bad.append(f"{tag}: commitment cluster missing start-up attributes")
            else:
                if not 0 <= g.min_up_hours < ts.tau:
                    bad.append(f"{tag}: min up time must lie in [0, tau)")
                if not 0 <= g.min_down_hours < ts.tau:
                    bad.append(f"{tag}: min down time must lie in [0, tau)")
            if g.is_storage or g.is_hydro:
                bad.append(f"{tag}: commitment cluster cannot be storage or hydro")
        elif has_uc_attrs:
            bad.append(f"{tag}: start-up attributes on a non-commitment cluster")

        if g.is_storage and g.is_hydro:
            bad.append(f"{tag}: cluster cannot be both storage and hydro")
        if g.is_storage:
            st = g.storage
            if st.unit_energy_mwh <= 0:
                bad.append(f"{tag}: unit energy size must be positive")
            if st.existing_energy_mwh < 0 or st.max_new_energy_mwh < 0:
                bad.append(f"{tag}: energy capacities must be nonnegative")
            if st.min_duration_h > st.max_duration_h:
                bad.append(f"{tag}: min duration exceeds max duration")
            for label, eff in (
                ("charge", st.charge_efficiency),
                ("discharge", st.discharge_efficiency),
            ):
                if not 0.0 < eff <= 1.0:
                    bad.append(f"{tag}: {label} efficiency outside (0, 1]")
            if not 0.0 <= st.self_discharge < 1.0:
                bad.append(f"{tag}: self-discharge outside [0, 1)")
        if g.is_hydro:
            hy = g.hydro
            if hy.duration_h < 0:
                bad.append(f"{tag}: hydro duration must be nonnegative")
            if len(hy.inflow) != nh:
                bad.append(
                    f"{tag}: inflow profile has {len(hy.inflow)} entries, "
                    f"expected {nh}"
                )
            elif np.any(hy.inflow < 0):
                bad.append(f"{tag}: inflow must be nonnegative")

    seen = set()
    for l in case.lines:
        tag = f"line {l.id}"
        if l.id in seen:
            bad.append(f"{tag}: duplicate id")
        seen.add(l.id)
        if l.from_zone == l.to_zone:
            bad.append(f"{tag}: endpoints must differ")
        for z in (l.from_zone, l.to_zone):
            if z not in case.zones:
                bad.append(f"{tag}: references unknown zone {z!r}")
        if l.existing_mw < 0 or l.max_new_mw < 0:
            bad.append(f"{tag}: capacities must be nonnegative")

    for z in case.zones:
        if z not in case.demand:
            bad.append(f"zone {z}: no demand profile")
        elif len(case.demand[z]) != nh:
            bad.append(
                f"zone {z}: demand profile has {len(case.demand[z])} entries, "
                f"expected {nh}"
            )
        elif np.any(case.demand[z] < 0):
            bad.append(f"zone {z}: demand must be nonnegative")
    for z in case.demand:
        if z not in case.zones:
            bad.append(f"demand profile for unknown zone {z!r}")

    if not case.segments:
        bad.append("no consumer segments")
    for s in case.segments:
        if not 0.0 <= s.max_fraction <= 1.0:
            bad.append(f"segment {s.id}: curtailable fraction outside [0, 1]")
        if s.cost_per_mwh < 0:
            bad.append(f"segment {s.id}: curtailment cost must be nonnegative")
    cover = sum(s.max_fraction for s in case.segments)
    if case.segments and cover < 1.0 - 1e-12:
        # every zone must be fully curtailable, else a zero-capacity
        # dispatch subproblem is infeasible and no optimality cut exists
        for z in case.zones:
            bad.append(
                f"zone {z}: recourse not guaranteed "
                f"(curtailable fractions sum to {cover:g} < 1)"
            )

    if case.policy.scenario not in SCENARIOS:
        bad.append(f"unknown policy scenario {case.policy.scenario!r}")
    if case.policy.scenario == "rps" and not 0.0 <= case.policy.rps_share <= 1.0:
        bad.append("RPS share outside [0, 1]")
    if case.policy.scenario == "co2" and case.policy.co2_t_per_mwh < 0:
        bad.append("CO2 intensity bound must be nonnegative")
    if case.policy.penalty_rps <= 0 or case.policy.penalty_co2 <= 0:
        bad.append("policy penalties must be positive")

    return ValidationReport(tuple(bad))
