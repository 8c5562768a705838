"""Case bundle loading, writing, and subperiod selection.

A bundle is a directory of delimited text files plus a key-value
manifest:

    manifest.txt      name, scenario, tau, weeks, weights, policy numbers
    zones.csv         id
    segments.csv      id, cost_per_mwh, max_fraction
    resources.csv     one row per cluster; kind in {standard, uc, storage, hydro}
    transmission.csv  id, from_zone, to_zone, existing_mw, max_new_mw, cost_per_mw_yr
    demand.csv        hour, then one MW column per zone
    availability.csv  hour, then one column per profiled cluster (optional file)
    inflows.csv       hour, then one column per hydro cluster

Hour rows cover exactly the modeled hours, in subperiod order.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .model import (
    ConsumerSegment,
    HydroAttributes,
    PolicySpec,
    ResourceCluster,
    StorageAttributes,
    SystemCase,
    TimeStructure,
    TransmissionLine,
    validate_case,
)


class CaseError(ValueError):
    """Raised for unreadable, malformed, or invalid case bundles."""


_RESOURCE_FIELDS = [
    "id",
    "zone",
    "kind",
    "tech",
    "unit_size_mw",
    "existing_mw",
    "max_new_mw",
    "min_output_fraction",
    "ramp_up_fraction",
    "ramp_down_fraction",
    "emissions_t_per_mwh",
    "var_cost_per_mwh",
    "inv_cost_per_mw_yr",
    "fom_cost_per_mw_yr",
    "rps_eligible",
    "non_retirable",
    "startup_cost",
    "min_up_hours",
    "min_down_hours",
    "unit_energy_mwh",
    "existing_energy_mwh",
    "max_new_energy_mwh",
    "min_duration_h",
    "max_duration_h",
    "charge_efficiency",
    "discharge_efficiency",
    "self_discharge",
    "energy_inv_cost_per_mwh_yr",
    "energy_fom_cost_per_mwh_yr",
    "hydro_duration_h",
]


def _read_manifest(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CaseError(f"{path.name} line {ln}: expected 'key = value'")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _read_rows(path: Path) -> list[dict[str, str]]:
    if not path.exists():
        raise CaseError(f"missing file {path.name}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _read_matrix(
    path: Path, expected_hours: Sequence[int], required: bool = True
) -> dict[str, np.ndarray]:
    """Read an hour-by-entity matrix; errors name the offending row."""
    if not path.exists():
        if required:
            raise CaseError(f"missing file {path.name}")
        return {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "hour":
            raise CaseError(f"{path.name}: first column must be 'hour'")
        names = header[1:]
        data: list[list[float]] = []
        hours: list[int] = []
        for ln, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CaseError(
                    f"{path.name} row {ln}: {len(row)} fields, expected {len(header)}"
                )
            try:
                hours.append(int(row[0]))
                data.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise CaseError(f"{path.name} row {ln}: {exc}") from None
    if hours != list(expected_hours):
        raise CaseError(
            f"{path.name}: hour column does not match the modeled hours"
        )
    arr = np.asarray(data, dtype=float)
    return {name: arr[:, j] for j, name in enumerate(names)}


def _opt_float(row: dict[str, str], key: str) -> Optional[float]:
    v = row.get(key, "")
    return float(v) if v not in ("", None) else None


def _req_float(row: dict[str, str], key: str, where: str) -> float:
    v = _opt_float(row, key)
    if v is None:
        raise CaseError(f"{where}: missing value for {key}")
    return v


def _modeled_hours(ts: TimeStructure) -> list[int]:
    hours: list[int] = []
    for w in ts.weeks:
        hours.extend(ts.hours_of(w))
    return hours


def load_case(path) -> SystemCase:
    """Load and validate a case bundle directory."""
    root = Path(path)
    if not root.is_dir():
        raise CaseError(f"case bundle {root} is not a directory")
    man = _read_manifest(root / "manifest.txt") if (root / "manifest.txt").exists() else None
    if man is None:
        raise CaseError("missing file manifest.txt")

    try:
        tau = int(man["tau"])
        weeks = tuple(int(v) for v in man["weeks"].split(","))
        weights = tuple(float(v) for v in man["weights"].split(","))
    except KeyError as exc:
        raise CaseError(f"manifest.txt: missing key {exc}") from None
    ts = TimeStructure(weeks=weeks, tau=tau, rho=weights)
    hours = _modeled_hours(ts)

    zones = tuple(r["id"] for r in _read_rows(root / "zones.csv"))
    segments = tuple(
        ConsumerSegment(
            id=r["id"],
            cost_per_mwh=_req_float(r, "cost_per_mwh", f"segments.csv id {r['id']}"),
            max_fraction=_req_float(r, "max_fraction", f"segments.csv id {r['id']}"),
        )
        for r in _read_rows(root / "segments.csv")
    )

    avail = _read_matrix(root / "availability.csv", hours, required=False)
    inflows = _read_matrix(root / "inflows.csv", hours, required=False)

    clusters = []
    for r in _read_rows(root / "resources.csv"):
        where = f"resources.csv id {r.get('id', '?')}"
        kind = r.get("kind", "standard")
        if kind not in ("standard", "uc", "storage", "hydro"):
            raise CaseError(f"{where}: unknown resource kind {kind!r}")
        storage = None
        hydro = None
        if kind == "storage":
            storage = StorageAttributes(
                unit_energy_mwh=_req_float(r, "unit_energy_mwh", where),
                existing_energy_mwh=_opt_float(r, "existing_energy_mwh") or 0.0,
                max_new_energy_mwh=_opt_float(r, "max_new_energy_mwh") or 0.0,
                min_duration_h=_opt_float(r, "min_duration_h") or 0.0,
                max_duration_h=(
                    v if (v := _opt_float(r, "max_duration_h")) is not None else 1e9
                ),
                charge_efficiency=_opt_float(r, "charge_efficiency") or 1.0,
                discharge_efficiency=_opt_float(r, "discharge_efficiency") or 1.0,
                self_discharge=_opt_float(r, "self_discharge") or 0.0,
                energy_inv_cost_per_mwh_yr=_opt_float(r, "energy_inv_cost_per_mwh_yr")
                or 0.0,
                energy_fom_cost_per_mwh_yr=_opt_float(r, "energy_fom_cost_per_mwh_yr")
                or 0.0,
            )
        elif kind == "hydro":
            if r["id"] not in inflows:
                raise CaseError(f"{where}: no inflow profile in inflows.csv")
            hydro = HydroAttributes(
                duration_h=_req_float(r, "hydro_duration_h", where),
                inflow=inflows[r["id"]],
                energy_inv_cost_per_mwh_yr=_opt_float(r, "energy_inv_cost_per_mwh_yr")
                or 0.0,
                energy_fom_cost_per_mwh_yr=_opt_float(r, "energy_fom_cost_per_mwh_yr")
                or 0.0,
            )
        mu = _opt_float(r, "min_up_hours")
        md = _opt_float(r, "min_down_hours")
        clusters.append(
            ResourceCluster(
                id=r["id"],
                zone=r["zone"],
                unit_size_mw=_req_float(r, "unit_size_mw", where),
                existing_mw=_opt_float(r, "existing_mw") or 0.0,
                max_new_mw=_opt_float(r, "max_new_mw") or 0.0,
                availability=avail.get(r["id"]),
                min_output_fraction=_opt_float(r, "min_output_fraction") or 0.0,
                ramp_up_fraction=(
                    v if (v := _opt_float(r, "ramp_up_fraction")) is not None else 1.0
                ),
                ramp_down_fraction=(
                    v if (v := _opt_float(r, "ramp_down_fraction")) is not None else 1.0
                ),
                emissions_t_per_mwh=_opt_float(r, "emissions_t_per_mwh") or 0.0,
                var_cost_per_mwh=_opt_float(r, "var_cost_per_mwh") or 0.0,
                inv_cost_per_mw_yr=_opt_float(r, "inv_cost_per_mw_yr") or 0.0,
                fom_cost_per_mw_yr=_opt_float(r, "fom_cost_per_mw_yr") or 0.0,
                tech=r.get("tech", ""),
                rps_eligible=r.get("rps_eligible", "0") in ("1", "true", "True"),
                non_retirable=r.get("non_retirable", "0") in ("1", "true", "True"),
                is_uc=kind == "uc",
                startup_cost=_opt_float(r, "startup_cost"),
                min_up_hours=int(mu) if mu is not None else None,
                min_down_hours=int(md) if md is not None else None,
                storage=storage,
                hydro=hydro,
            )
        )

    lines = tuple(
        TransmissionLine(
            id=r["id"],
            from_zone=r["from_zone"],
            to_zone=r["to_zone"],
            existing_mw=_opt_float(r, "existing_mw") or 0.0,
            max_new_mw=_opt_float(r, "max_new_mw") or 0.0,
            cost_per_mw_yr=_opt_float(r, "cost_per_mw_yr") or 0.0,
        )
        for r in _read_rows(root / "transmission.csv")
    )

    demand = _read_matrix(root / "demand.csv", hours)
    missing = [z for z in zones if z not in demand]
    if missing:
        raise CaseError(f"demand.csv: no column for zone(s) {', '.join(missing)}")

    policy = PolicySpec(
        scenario=man.get("scenario", "ref").lower(),
        rps_share=float(man.get("rps_share", 0.70)),
        co2_t_per_mwh=float(man.get("co2_t_per_mwh", 0.05)),
        penalty_rps=float(man.get("penalty_rps", PolicySpec.penalty_rps)),
        penalty_co2=float(man.get("penalty_co2", PolicySpec.penalty_co2)),
    )

    case = SystemCase(
        name=man.get("name", root.name),
        zones=zones,
        clusters=tuple(clusters),
        lines=lines,
        demand={z: demand[z] for z in zones},
        segments=segments,
        policy=policy,
        time=ts,
    )
    report = validate_case(case)
    if not report.ok:
        raise CaseError("invalid case: " + "; ".join(report.violations))
    return case


def write_case(case: SystemCase, path) -> Path:
    """Write a bundle that :func:`load_case` reads back identically."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    ts = case.time
    hours = _modeled_hours(ts)

    man = [
        f"name = {case.name}",
        f"scenario = {case.policy.scenario}",
        f"tau = {ts.tau}",
        "weeks = " + ",".join(str(w) for w in ts.weeks),
        "weights = " + ",".join(repr(r) for r in ts.rho),
        f"rps_share = {case.policy.rps_share!r}",
        f"co2_t_per_mwh = {case.policy.co2_t_per_mwh!r}",
        f"penalty_rps = {case.policy.penalty_rps!r}",
        f"penalty_co2 = {case.policy.penalty_co2!r}",
    ]
    (root / "manifest.txt").write_text("\n".join(man) + "\n")

    def write_csv(name: str, header: list[str], rows: list[list]) -> None:
        with open(root / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)

    write_csv("zones.csv", ["id"], [[z] for z in case.zones])
    write_csv(
        "segments.csv",
        ["id", "cost_per_mwh", "max_fraction"],
        [[s.id, repr(s.cost_per_mwh), repr(s.max_fraction)] for s in case.segments],
    )

    rrows = []
    for g in case.clusters:
        kind = (
            "uc" if g.is_uc else "storage" if g.is_storage else "hydro" if g.is_hydro else "standard"
        )
        row = {
            "id": g.id,
            "zone": g.zone,
            "kind": kind,
            "tech": g.tech,
            "unit_size_mw": repr(g.unit_size_mw),
            "existing_mw": repr(g.existing_mw),
            "max_new_mw": repr(g.max_new_mw),
            "min_output_fraction": repr(g.min_output_fraction),
            "ramp_up_fraction": repr(g.ramp_up_fraction),
            "ramp_down_fraction": repr(g.ramp_down_fraction),
            "emissions_t_per_mwh": repr(g.emissions_t_per_mwh),
            "var_cost_per_mwh": repr(g.var_cost_per_mwh),
            "inv_cost_per_mw_yr": repr(g.inv_cost_per_mw_yr),
            "fom_cost_per_mw_yr": repr(g.fom_cost_per_mw_yr),
            "rps_eligible": int(g.rps_eligible),
            "non_retirable": int(g.non_retirable),
            "startup_cost": "" if g.startup_cost is None else repr(g.startup_cost),
            "min_up_hours": "" if g.min_up_hours is None else g.min_up_hours,
            "min_down_hours": "" if g.min_down_hours is None else g.min_down_hours,
        }
        if g.is_storage:
            st = g.storage
            row.update(
                unit_energy_mwh=repr(st.unit_energy_mwh),
                existing_energy_mwh=repr(st.existing_energy_mwh),
                max_new_energy_mwh=repr(st.max_new_energy_mwh),
                min_duration_h=repr(st.min_duration_h),
                max_duration_h=repr(st.max_duration_h),
                charge_efficiency=repr(st.charge_efficiency),
                discharge_efficiency=repr(st.discharge_efficiency),
                self_discharge=repr(st.self_discharge),
                energy_inv_cost_per_mwh_yr=repr(st.energy_inv_cost_per_mwh_yr),
                energy_fom_cost_per_mwh_yr=repr(st.energy_fom_cost_per_mwh_yr),
            )
        if g.is_hydro:
            hy = g.hydro
            row.update(
                hydro_duration_h=repr(hy.duration_h),
                energy_inv_cost_per_mwh_yr=repr(hy.energy_inv_cost_per_mwh_yr),
                energy_fom_cost_per_mwh_yr=repr(hy.energy_fom_cost_per_mwh_yr),
            )
        rrows.append([row.get(f, "") for f in _RESOURCE_FIELDS])
    write_csv("resources.csv", _RESOURCE_FIELDS, rrows)

    write_csv(
        "transmission.csv",
        ["id", "from_zone", "to_zone", "existing_mw", "max_new_mw", "cost_per_mw_yr"],
        [
            [l.id, l.from_zone, l.to_zone, repr(l.existing_mw), repr(l.max_new_mw), repr(l.cost_per_mw_yr)]
            for l in case.lines
        ],
    )

    def write_matrix(name: str, series: dict[str, np.ndarray]) -> None:
        if not series:
            return
        keys = list(series)
        with open(root / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["hour"] + keys)
            for i, h in enumerate(hours):
                w.writerow([h] + [repr(float(series[k][i])) for k in keys])

    write_matrix("demand.csv", {z: case.demand[z] for z in case.zones})
    write_matrix(
        "availability.csv",
        {g.id: g.availability for g in case.clusters if g.availability is not None},
    )
    write_matrix("inflows.csv", {g.id: g.hydro.inflow for g in case.hydro_clusters})
    return root


def select_weeks(
    case: SystemCase, weeks: Sequence[int], weights: Sequence[float]
) -> SystemCase:
    """Restrict a case to a subset of subperiods with new year weights.

    The weights must be positive and keep representing the same planning
    year: their sum must match the case's current represented hours.
    """
    weeks = [int(w) for w in weeks]
    weights = [float(v) for v in weights]
    if len(weeks) != len(weights):
        raise CaseError("one weight per selected subperiod required")
    if len(set(weeks)) != len(weeks):
        raise CaseError("selected subperiod ids must be distinct")
    if any(v <= 0 for v in weights):
        raise CaseError("subperiod weights must be positive")
    for w in weeks:
        if w not in case.time.weeks:
            raise CaseError(f"subperiod {w} not present in the case")
    target = case.time.year_hours
    if abs(sum(weights) - target) > 1e-6:
        raise CaseError(
            f"weights sum to {sum(weights):g} but the case represents {target:g} hours"
        )

    order = np.argsort(weeks)
    weeks_sorted = tuple(weeks[i] for i in order)
    rho_sorted = tuple(weights[i] for i in order)
    ts = TimeStructure(weeks=weeks_sorted, tau=case.time.tau, rho=rho_sorted)
    keep = np.concatenate(
        [np.arange(case.time.positions_of(w).start, case.time.positions_of(w).stop) for w in weeks_sorted]
    )

    def slice_cluster(g: ResourceCluster) -> ResourceCluster:
        kw = {}
        if g.availability is not None:
            kw["availability"] = g.availability[keep]
        if g.is_hydro:
            kw["hydro"] = HydroAttributes(
                duration_h=g.hydro.duration_h,
                inflow=g.hydro.inflow[keep],
                energy_inv_cost_per_mwh_yr=g.hydro.energy_inv_cost_per_mwh_yr,
                energy_fom_cost_per_mwh_yr=g.hydro.energy_fom_cost_per_mwh_yr,
            )
        if kw:
            from dataclasses import replace

            return replace(g, **kw)
        return g

    return SystemCase(
        name=case.name,
        zones=case.zones,
        clusters=tuple(slice_cluster(g) for g in case.clusters),
        lines=case.lines,
        demand={z: d[keep] for z, d in case.demand.items()},
        segments=case.segments,
        policy=case.policy,
        time=ts,
    )


def cases_equal(a: SystemCase, b: SystemCase) -> bool:
    """Field-by-field equality including profile arrays."""
    if (
        a.name != b.name
        or a.zones != b.zones
        or a.time != b.time
        or len(a.clusters) != len(b.clusters)
        or len(a.lines) != len(b.lines)
        or len(a.segments) != len(b.segments)
    ):
        return False
    for z in a.zones:
        if not np.array_equal(a.demand[z], b.demand[z]):
            return False
    for s, t in zip(a.segments, b.segments):
        if (s.id, s.cost_per_mwh, s.max_fraction) != (t.id, t.cost_per_mwh, t.max_fraction):
            return False
    for l, m in zip(a.lines, b.lines):
        if (l.id, l.from_zone, l.to_zone, l.existing_mw, l.max_new_mw, l.cost_per_mw_yr) != (
            m.id,
            m.from_zone,
            m.to_zone,
            m.existing_mw,
            m.max_new_mw,
            m.cost_per_mw_yr,
        ):
            return False
    pa, pb = a.policy, b.policy
    if (pa.scenario, pa.rps_share, pa.co2_t_per_mwh, pa.penalty_rps, pa.penalty_co2) != (
        pb.scenario,
        pb.rps_share,
        pb.co2_t_per_mwh,
        pb.penalty_rps,
        pb.penalty_co2,
    ):
        return False
    for g, h in zip(a.clusters, b.clusters):
        scalar = (
            g.id, g.zone, g.unit_size_mw, g.existing_mw, g.max_new_mw,
            g.min_output_fraction, g.ramp_up_fraction, g.ramp_down_fraction,
            g.emissions_t_per_mwh, g.var_cost_per_mwh, g.inv_cost_per_mw_yr,
            g.fom_cost_per_mw_yr, g.tech, g.rps_eligible, g.non_retirable,
            g.is_uc, g.startup_cost, g.min_up_hours, g.min_down_hours,
        )
        other = (
            h.id, h.zone, h.unit_size_mw, h.existing_mw, h.max_new_mw,
            h.min_output_fraction, h.ramp_up_fraction, h.ramp_down_fraction,
            h.emissions_t_per_mwh, h.var_cost_per_mwh, h.inv_cost_per_mw_yr,
            h.fom_cost_per_mw_yr, h.tech, h.rps_eligible, h.non_retirable,
            h.is_uc, h.startup_cost, h.min_up_hours, h.min_down_hours,
        )
        if scalar != other:
            return False
        if (g.availability is None) != (h.availability is None):
            return False
        if g.availability is not None and not np.array_equal(g.availability, h.availability):
            return False
        if (g.storage is None) != (h.storage is None):
            return False
        if g.storage is not None:
            if (
                g.storage.unit_energy_mwh, g.storage.existing_energy_mwh,
                g.storage.max_new_energy_mwh, g.storage.min_duration_h,
                g.storage.max_duration_h, g.storage.charge_efficiency,
                g.storage.discharge_efficiency, g.storage.self_discharge,
                g.storage.energy_inv_cost_per_mwh_yr, g.storage.energy_fom_cost_per_mwh_yr,
            ) != (
                h.storage.unit_energy_mwh, h.storage.existing_energy_mwh,
                h.storage.max_new_energy_mwh, h.storage.min_duration_h,
                h.storage.max_duration_h, h.storage.charge_efficiency,
                h.storage.discharge_efficiency, h.storage.self_discharge,
                h.storage.energy_inv_cost_per_mwh_yr, h.storage.energy_fom_cost_per_mwh_yr,
            ):
                return False
        if (g.hydro is None) != (h.hydro is None):
            return False
        if g.hydro is not None:
            if (
                g.hydro.duration_h != h.hydro.duration_h
                or g.hydro.energy_inv_cost_per_mwh_yr != h.hydro.energy_inv_cost_per_mwh_yr
                or g.hydro.energy_fom_cost_per_mwh_yr != h.hydro.energy_fom_cost_per_mwh_yr
                or not np.array_equal(g.hydro.inflow, h.hydro.inflow)
            ):
                return False
    return True
