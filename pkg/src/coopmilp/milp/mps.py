"""Fixed-format MPS export."""

from __future__ import annotations

import math

from .model import MilpModel, Sense

OBJ_ROW = "COST"

_SENSE_CODE = {Sense.LE: "L", Sense.GE: "G", Sense.EQ: "E"}


def _fmt(v: float) -> str:
    # fixed-format numeric fields are 12 characters wide
    for p in range(12, 0, -1):
        s = f"{v:.{p}g}"
        if len(s) <= 12:
            return s
    raise ValueError(f"cannot fit {v!r} into a 12-character MPS field")


def _usable(name: str) -> bool:
    return 0 < len(name) <= 8 and not any(ch.isspace() for ch in name) and not name.startswith("*")


def _assign_names(names: list[str], prefix: str, reserved: set[str]) -> list[str]:
    """Keep names that fit the 8-character field; generate the rest from the index."""
    out: list[str] = []
    taken = set(reserved)
    for name in names:
        if _usable(name) and name not in taken:
            out.append(name)
            taken.add(name)
        else:
            out.append("")
    for i, name in enumerate(out):
        if not name:
            gen = f"{prefix}{i:06d}"
            while gen in taken:
                gen = "_" + gen[:7]
            out[i] = gen
            taken.add(gen)
    return out


def _line(code: str, a: str = "", b: str = "", v1: str = "", c: str = "", v2: str = "") -> str:
    # fields start at columns 2, 5, 15, 25, 40, 50
    s = f" {code:<2} {a:<8}  {b:<8}  {v1:>12}"
    if c:
        s += f"   {c:<8}  {v2:>12}"
    return s.rstrip()


def export_mps(model: MilpModel) -> str:
    """Render ``model`` as a fixed-format MPS document.

    Binaries are declared with ``BV`` bound entries. Names longer than eight
    characters (or missing, or duplicated) are replaced by ``_C``/``_R`` plus
    the zero-padded index. An objective constant is written as the negated
    RHS of the objective row, the usual convention for an objective offset.
    """
    col_names = _assign_names([v.name for v in model.variables], "_C", {OBJ_ROW})
    row_names = _assign_names([c.name for c in model.constraints], "_R", {OBJ_ROW})

    lines = [f"NAME          {model.name[:8] if _usable(model.name[:8]) else 'MODEL'}", "ROWS", f" N  {OBJ_ROW}"]
    for name, con in zip(row_names, model.constraints):
        lines.append(f" {_SENSE_CODE[con.sense]}  {name}")

    entries: list[list[tuple[str, float]]] = [[] for _ in model.variables]
    for vid, coef in sorted(model.objective.terms.items()):
        entries[vid].append((OBJ_ROW, coef))
    rhs: list[tuple[str, float]] = []
    for name, con in zip(row_names, model.constraints):
        terms, b = con.normalized()
        for vid, coef in sorted(terms.items()):
            entries[vid].append((name, coef))
        if b != 0.0:
            rhs.append((name, b))
    if model.objective.constant != 0.0:
        rhs.insert(0, (OBJ_ROW, -model.objective.constant))

    lines.append("COLUMNS")
    for cname, ents in zip(col_names, entries):
        if not ents:
            ents = [(OBJ_ROW, 0.0)]
        for k in range(0, len(ents), 2):
            (r1, a1), *rest = ents[k:k + 2]
            if rest:
                r2, a2 = rest[0]
                lines.append(_line("", cname, r1, _fmt(a1), r2, _fmt(a2)))
            else:
                lines.append(_line("", cname, r1, _fmt(a1)))

    lines.append("RHS")
    for k in range(0, len(rhs), 2):
        (r1, b1), *rest = rhs[k:k + 2]
        if rest:
            lines.append(_line("", "RHS", r1, _fmt(b1), rest[0][0], _fmt(rest[0][1])))
        else:
            lines.append(_line("", "RHS", r1, _fmt(b1)))

    lines.append("BOUNDS")
    for cname, var in zip(col_names, model.variables):
        lo, hi = var.lower, var.upper
        if var.is_binary:
            lines.append(_line("BV", "BND", cname))
        elif lo == -math.inf and hi == math.inf:
            lines.append(_line("FR", "BND", cname))
        elif lo == hi:
            lines.append(_line("FX", "BND", cname, _fmt(lo)))
        else:
            if lo == -math.inf:
                lines.append(_line("MI", "BND", cname))
            elif lo != 0.0:
                lines.append(_line("LO", "BND", cname, _fmt(lo)))
            if hi != math.inf:
                lines.append(_line("UP", "BND", cname, _fmt(hi)))
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"
