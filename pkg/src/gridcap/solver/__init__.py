"""Desk-scale LP/MILP solving with dual extraction.

The reference backend is a deterministic two-phase simplex plus branch
and bound. Any engine satisfying :class:`SolverBackend` can be swapped in
without touching the decomposition engine; an adapter over scipy's HiGHS
bindings ships alongside the reference implementation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from .bnb import MilpSolution
from .bnb import solve_milp as _solve_milp_ref
from .instance import EQ, GE, LE, Instance, build_instance, fix_columns, repin
from .lptext import write_lp_text
from .simplex import LpSolution, SolveStatus
from .simplex import solve_lp as _solve_lp_ref


class SolverBackend(Protocol):
    def solve_lp(self, inst: Instance) -> LpSolution: ...

    def solve_milp(
        self, inst: Instance, gap_tol: float, node_limit: int
    ) -> MilpSolution: ...


@dataclass(frozen=True)
class SimplexBackend:
    """Reference backend: dense two-phase simplex + branch and bound."""

    def solve_lp(self, inst: Instance) -> LpSolution:
        return _solve_lp_ref(inst)

    def solve_milp(
        self, inst: Instance, gap_tol: float = 1e-3, node_limit: int = 100_000
    ) -> MilpSolution:
        return _solve_milp_ref(inst, gap_tol=gap_tol, node_limit=node_limit)


@dataclass(frozen=True)
class HighsBackend:
    """Adapter over scipy's HiGHS bindings (same contracts, faster)."""

    def solve_lp(self, inst: Instance) -> LpSolution:
        from .highs import solve_lp_highs

        return solve_lp_highs(inst)

    def solve_milp(
        self, inst: Instance, gap_tol: float = 1e-3, node_limit: int = 1_000_000
    ) -> MilpSolution:
        from .highs import solve_milp_highs

        return solve_milp_highs(inst, gap_tol=gap_tol, node_limit=node_limit)


DEFAULT_BACKEND = SimplexBackend()


def solve_lp(inst: Instance) -> LpSolution:
    """Solve an LP with the reference backend."""
    return DEFAULT_BACKEND.solve_lp(inst)


def solve_milp(
    inst: Instance, gap_tol: float = 1e-3, node_limit: int = 100_000
) -> MilpSolution:
    """Solve a MILP with the reference backend."""
    return DEFAULT_BACKEND.solve_milp(inst, gap_tol=gap_tol, node_limit=node_limit)


__all__ = [
    "EQ",
    "GE",
    "LE",
    "Instance",
    "LpSolution",
    "MilpSolution",
    "SolveStatus",
    "SolverBackend",
    "SimplexBackend",
    "HighsBackend",
    "DEFAULT_BACKEND",
    "build_instance",
    "fix_columns",
    "repin",
    "solve_lp",
    "solve_milp",
    "write_lp_text",
]
