"""Sparse LP/MILP instance container shared by all solver backends."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

LE = "<"
GE = ">"
EQ = "="


@dataclass(frozen=True, eq=False)
class Instance:
    """min objective . x subject to rows, x >= 0 except free columns.

    Rows carry a sense in {<, >, =}. Integrality flags mark columns that a
    MILP solve restricts to integers; an LP solve ignores them. Matrices
    are shared, never mutated.
    """

    objective: np.ndarray
    matrix: sp.csr_matrix
    senses: np.ndarray  # one of LE/GE/EQ per row
    rhs: np.ndarray
    free: np.ndarray  # bool per column
    integer: np.ndarray  # bool per column
    name: str = ""

    def __post_init__(self):
        nr, nc = self.matrix.shape
        if not (
            len(self.objective) == len(self.free) == len(self.integer) == nc
            and len(self.senses) == len(self.rhs) == nr
        ):
            raise ValueError("inconsistent instance dimensions")

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    def relaxed(self) -> "Instance":
        """Copy with all integrality dropped."""
        return replace(self, integer=np.zeros(self.n_cols, dtype=bool))


def build_instance(
    n_cols: int,
    objective: np.ndarray,
    rows: Iterable[tuple[Sequence[int], Sequence[float], str, float]] | None = None,
    *,
    coo: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None = None,
    free_cols: Sequence[int] = (),
    integer_cols: Sequence[int] = (),
    name: str = "",
) -> Instance:
    """Assemble an Instance from per-row triplets or raw COO data.

    ``rows`` is an iterable of (cols, vals, sense, rhs); ``coo`` supplies
    (row_idx, col_idx, vals, senses, rhs) directly for bulk construction.
    """
    if coo is not None:
        ri, ci, vals, senses, rhs = coo
        n_rows = len(rhs)
        mat = sp.csr_matrix(
            (np.asarray(vals, dtype=float), (ri, ci)), shape=(n_rows, n_cols)
        )
        senses = np.asarray(senses, dtype="<U1")
        rhs = np.asarray(rhs, dtype=float)
    else:
        ri_l: list[int] = []
        ci_l: list[int] = []
        va_l: list[float] = []
        senses_l: list[str] = []
        rhs_l: list[float] = []
        for k, (cols, vals, sense, b) in enumerate(rows or ()):
            ri_l.extend([k] * len(cols))
            ci_l.extend(cols)
            va_l.extend(vals)
            senses_l.append(sense)
            rhs_l.append(b)
        mat = sp.csr_matrix(
            (va_l, (ri_l, ci_l)), shape=(len(rhs_l), n_cols)
        )
        senses = np.asarray(senses_l, dtype="<U1")
        rhs = np.asarray(rhs_l, dtype=float)

    free = np.zeros(n_cols, dtype=bool)
    free[list(free_cols)] = True
    integer = np.zeros(n_cols, dtype=bool)
    integer[list(integer_cols)] = True
    return Instance(
        objective=np.asarray(objective, dtype=float),
        matrix=mat,
        senses=senses,
        rhs=rhs,
        free=free,
        integer=integer,
        name=name,
    )


def fix_columns(
    instance: Instance, assignments: Mapping[int, float]
) -> tuple[Instance, dict[int, int]]:
    """Pin columns to values via appended equality rows.

    Returns the extended instance and a map from column index to the row
    that pins it, so callers can read each pin's dual multiplier (the
    sensitivity of the optimum to the pinned value) by column identity.
    An empty assignment returns the instance unchanged.
    """
    if not assignments:
        return instance, {}
    cols = list(assignments)
    for c in cols:
        if not 0 <= c < instance.n_cols:
            raise KeyError(f"unknown column {c}")
    n_new = len(cols)
    pin = sp.csr_matrix(
        (np.ones(n_new), (np.arange(n_new), np.asarray(cols))),
        shape=(n_new, instance.n_cols),
    )
    mat = sp.vstack([instance.matrix, pin], format="csr")
    senses = np.concatenate([instance.senses, np.full(n_new, EQ, dtype="<U1")])
    rhs = np.concatenate(
        [instance.rhs, np.asarray([assignments[c] for c in cols], dtype=float)]
    )
    row_of = {c: instance.n_rows + k for k, c in enumerate(cols)}
    return (
        replace(instance, matrix=mat, senses=senses, rhs=rhs),
        row_of,
    )


def repin(instance: Instance, row_of: Mapping[int, int], values: Mapping[int, float]) -> Instance:
    """Cheap variant of :func:`fix_columns` for re-solving with new pins.

    ``instance`` must already carry the pin rows (from a previous
    ``fix_columns`` call); only the right-hand sides change.
    """
    rhs = instance.rhs.copy()
    for c, v in values.items():
        rhs[row_of[c]] = v
    return replace(instance, rhs=rhs)
