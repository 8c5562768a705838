"""Dump an instance in CPLEX LP text format for external cross-checks."""

from __future__ import annotations

from .instance import EQ, GE, Instance

_REL = {"<": "<=", ">": ">=", "=": "="}


def _terms(cols, vals) -> str:
    parts = []
    for c, v in zip(cols, vals):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {abs(v):.17g} x{c}")
    if not parts:
        return "0 x0"
    out = " ".join(parts)
    return out[2:] if out.startswith("+ ") else out


def write_lp_text(inst: Instance, path) -> None:
    """Write ``inst`` as an .lp file readable by standard LP tools."""
    mat = inst.matrix.tocsr()
    lines = ["Minimize", " obj: " + _terms(range(inst.n_cols), inst.objective)]
    lines.append("Subject To")
    for i in range(inst.n_rows):
        lo, hi = mat.indptr[i], mat.indptr[i + 1]
        lines.append(
            f" r{i}: "
            + _terms(mat.indices[lo:hi], mat.data[lo:hi])
            + f" {_REL[str(inst.senses[i])]} {inst.rhs[i]:.17g}"
        )
    free = [j for j in range(inst.n_cols) if inst.free[j]]
    if free:
        lines.append("Bounds")
        lines.extend(f" x{j} free" for j in free)
    ints = [j for j in range(inst.n_cols) if inst.integer[j]]
    if ints:
        lines.append("Generals")
        lines.append(" " + " ".join(f"x{j}" for j in ints))
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
