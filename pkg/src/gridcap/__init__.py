"""Capacity expansion planning with a budgeted multi-cut Benders engine."""

from .benders import (
    BendersError,
    BendersOptions,
    BendersState,
    CutRecord,
    MasterProblem,
    init_state,
    optimality_gap,
    run_benders,
    run_classic_benders,
    solve_master,
    solve_subproblem,
)
from .caseio import CaseError, cases_equal, load_case, select_weeks, write_case
from .formulation import (
    AssembledInstance,
    CompactBlocks,
    Dispatch,
    assemble_budgeted,
    assemble_monolithic,
    build_blocks,
    build_investment_block,
    build_operational_block,
    build_policy_block,
    extract_dispatch,
)
from .model import (
    ConsumerSegment,
    HydroAttributes,
    PolicySpec,
    ResourceCluster,
    StorageAttributes,
    SystemCase,
    TimeStructure,
    TransmissionLine,
    ValidationReport,
    circular_prev,
    timestep_weight,
    validate_case,
)
from .report import (
    CostBreakdown,
    SolveReport,
    TraceRow,
    cost_breakdown,
    emit_trace,
    rps_share_achieved,
    total_emissions,
    write_report,
)
from .runner import METHODS, compute_capacity_mse, run
from .solver import (
    HighsBackend,
    Instance,
    LpSolution,
    MilpSolution,
    SimplexBackend,
    SolveStatus,
    fix_columns,
    solve_lp,
    solve_milp,
)

__version__ = "0.1.0"
