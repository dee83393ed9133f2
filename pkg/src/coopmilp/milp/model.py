"""Linear model containers: variables, affine expressions, constraints, solutions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp


class VarKind(enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Sense(enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    TIME_LIMIT = "time_limit"
    # iteration cap hit or the basis went numerically bad
    ERROR = "error"


class ModelError(ValueError):
    """Raised for malformed variables, constraints or models."""


@dataclass(frozen=True)
class Variable:
    id: int
    kind: VarKind
    lower: float
    upper: float
    name: str

    @property
    def is_binary(self) -> bool:
        return self.kind is VarKind.BINARY


class AffineExpr:
    """Sparse affine form ``sum(coef * var) + constant`` over variable ids.

    Coefficients of repeated ids are merged and zero terms dropped, so two
    expressions that denote the same function compare equal term-by-term.
    Supports ``+``, ``-``, scalar ``*`` and ``<=``/``>=`` (which build a
    :class:`Constraint`). Equality constraints go through :meth:`eq`.
    """

    __slots__ = ("terms", "constant")

    def __init__(self, terms: Mapping[int, float] | Iterable[tuple[int, float]] = (),
                 constant: float = 0.0):
        merged: dict[int, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for vid, coef in items:
            merged[int(vid)] = merged.get(int(vid), 0.0) + float(coef)
        self.terms = {k: v for k, v in merged.items() if v != 0.0}
        self.constant = float(constant)

    @classmethod
    def term(cls, vid: int, coef: float = 1.0) -> AffineExpr:
        return cls({vid: coef})

    @classmethod
    def const(cls, value: float) -> AffineExpr:
        return cls((), value)

    @classmethod
    def sum(cls, items: Iterable[AffineExpr | float | int]) -> AffineExpr:
        acc: dict[int, float] = {}
        const = 0.0
        for it in items:
            if isinstance(it, AffineExpr):
                for k, v in it.terms.items():
                    acc[k] = acc.get(k, 0.0) + v
                const += it.constant
            else:
                const += float(it)
        return cls(acc, const)

    def copy(self) -> AffineExpr:
        return AffineExpr(dict(self.terms), self.constant)

    def variables(self) -> set[int]:
        return set(self.terms)

    def evaluate(self, values) -> float:
        """Value of the expression at ``values`` (array or mapping indexed by id)."""
        return self.constant + sum(c * float(values[k]) for k, c in self.terms.items())

    def _coerce(self, other) -> AffineExpr:
        if isinstance(other, AffineExpr):
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return AffineExpr.const(float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return AffineExpr.sum((self, other))

    __radd__ = __add__

    def __neg__(self) -> AffineExpr:
        return AffineExpr({k: -v for k, v in self.terms.items()}, -self.constant)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, scalar):
        if not isinstance(scalar, (int, float, np.floating, np.integer)):
            return NotImplemented
        s = float(scalar)
        return AffineExpr({k: v * s for k, v in self.terms.items()}, self.constant * s)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def le(self, rhs: float | AffineExpr = 0.0) -> Constraint:
        return Constraint.build(self, Sense.LE, rhs)

    def ge(self, rhs: float | AffineExpr = 0.0) -> Constraint:
        return Constraint.build(self, Sense.GE, rhs)

    def eq(self, rhs: float | AffineExpr = 0.0) -> Constraint:
        return Constraint.build(self, Sense.EQ, rhs)

    def __le__(self, rhs):
        return self.le(rhs)

    def __ge__(self, rhs):
        return self.ge(rhs)

    def __repr__(self) -> str:
        parts = [f"{c:+g}*v{k}" for k, c in sorted(self.terms.items())]
        if self.constant or not parts:
            parts.append(f"{self.constant:+g}")
        return "AffineExpr(" + " ".join(parts) + ")"


@dataclass
class Constraint:
    expr: AffineExpr
    sense: Sense
    rhs: float
    name: str = ""

    def __post_init__(self):
        if not math.isfinite(self.rhs):
            raise ModelError(f"constraint rhs must be finite, got {self.rhs}")

    @classmethod
    def build(cls, lhs: AffineExpr, sense: Sense, rhs: float | AffineExpr, name: str = "") -> Constraint:
        if isinstance(rhs, AffineExpr):
            lhs = lhs - rhs
            rhs = 0.0
        return cls(lhs, sense, float(rhs), name)

    def normalized(self) -> tuple[dict[int, float], float]:
        """Terms and right-hand side with the expression constant moved over."""
        return self.expr.terms, self.rhs - self.expr.constant

    def violation(self, values) -> float:
        act = self.expr.evaluate(values)
        if self.sense is Sense.LE:
            return max(0.0, act - self.rhs)
        if self.sense is Sense.GE:
            return max(0.0, self.rhs - act)
        return abs(act - self.rhs)

    def is_satisfied(self, values, tol: float = 1e-9) -> bool:
        return self.violation(values) <= tol


@dataclass
class SolveStats:
    nodes: int = 0
    lp_iterations: int = 0
    wall_time: float = 0.0


@dataclass
class Solution:
    status: Status
    values: np.ndarray | None = None
    objective: float = math.nan
    # best proven lower bound (B&B); equals objective for proven optima
    bound: float = math.nan
    stats: SolveStats = field(default_factory=SolveStats)
    message: str = ""

    @property
    def is_optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def value(self, vid: int) -> float:
        if self.values is None:
            raise ValueError(f"no values available (status {self.status.value})")
        return float(self.values[vid])

    def eval(self, expr: AffineExpr) -> float:
        if self.values is None:
            raise ValueError(f"no values available (status {self.status.value})")
        return expr.evaluate(self.values)


@dataclass
class LinearArrays:
    """Column/row form of a model: ``row_lo <= A x <= row_hi``, ``col_lo <= x <= col_hi``."""

    c: np.ndarray
    obj_const: float
    A: sp.csc_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    col_lo: np.ndarray
    col_hi: np.ndarray
    binary: np.ndarray


class MilpModel:
    """A minimization MILP over continuous and binary variables."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective = AffineExpr()
        self._names: dict[str, int] = {}

    def add_variable(self, name: str = "", kind: VarKind | str = VarKind.CONTINUOUS,
                     lower: float | None = None, upper: float | None = None) -> int:
        """Append a variable and return its id.

        Omitted bounds default to ``[0, 1]`` for binaries and to a free
        variable otherwise. Binaries given any other bounds are rejected.
        """
        kind = VarKind(kind) if isinstance(kind, str) else kind
        if kind is VarKind.BINARY:
            lo = 0.0 if lower is None else float(lower)
            hi = 1.0 if upper is None else float(upper)
            if (lo, hi) != (0.0, 1.0):
                raise ModelError(f"binary {name!r} must have bounds [0, 1], got [{lo}, {hi}]")
        else:
            lo = -math.inf if lower is None else float(lower)
            hi = math.inf if upper is None else float(upper)
        if math.isnan(lo) or math.isnan(hi) or lo > hi or lo == math.inf or hi == -math.inf:
            raise ModelError(f"invalid bounds for {name!r}: [{lo}, {hi}]")
        vid = len(self.variables)
        self.variables.append(Variable(vid, kind, lo, hi, name))
        if name:
            self._names.setdefault(name, vid)
        return vid

    def add_binary(self, name: str = "") -> int:
        return self.add_variable(name, VarKind.BINARY)

    def add_continuous(self, name: str = "", lower: float = -math.inf, upper: float = math.inf) -> int:
        return self.add_variable(name, VarKind.CONTINUOUS, lower, upper)

    def add_constraint(self, con: Constraint, name: str | None = None) -> Constraint:
        for vid in con.expr.terms:
            if not 0 <= vid < len(self.variables):
                raise ModelError(f"constraint references unknown variable id {vid}")
        if name is not None:
            con.name = name
        self.constraints.append(con)
        return con

    def add_constraints(self, cons: Iterable[Constraint]) -> None:
        for con in cons:
            self.add_constraint(con)

    def set_objective(self, expr: AffineExpr) -> None:
        for vid in expr.terms:
            if not 0 <= vid < len(self.variables):
                raise ModelError(f"objective references unknown variable id {vid}")
        self.objective = expr

    def var_id(self, name: str) -> int:
        return self._names[name]

    def counts(self) -> tuple[int, int]:
        """(binary count, continuous count)."""
        nb = sum(v.is_binary for v in self.variables)
        return nb, len(self.variables) - nb

    @property
    def binary_ids(self) -> list[int]:
        return [v.id for v in self.variables if v.is_binary]

    def to_arrays(self) -> LinearArrays:
        n = len(self.variables)
        m = len(self.constraints)
        rows, cols, vals = [], [], []
        row_lo = np.empty(m)
        row_hi = np.empty(m)
        for i, con in enumerate(self.constraints):
            terms, rhs = con.normalized()
            for vid, coef in terms.items():
                rows.append(i)
                cols.append(vid)
                vals.append(coef)
            row_lo[i] = rhs if con.sense in (Sense.GE, Sense.EQ) else -np.inf
            row_hi[i] = rhs if con.sense in (Sense.LE, Sense.EQ) else np.inf
        A = sp.csc_matrix((vals, (rows, cols)), shape=(m, n))
        c = np.zeros(n)
        for vid, coef in self.objective.terms.items():
            c[vid] = coef
        return LinearArrays(
            c=c,
            obj_const=self.objective.constant,
            A=A,
            row_lo=row_lo,
            row_hi=row_hi,
            col_lo=np.array([v.lower for v in self.variables], dtype=float),
            col_hi=np.array([v.upper for v in self.variables], dtype=float),
            binary=np.array([v.is_binary for v in self.variables], dtype=bool),
        )

    def max_violation(self, values) -> float:
        """Largest violation over all constraints and variable bounds."""
        worst = 0.0
        for con in self.constraints:
            worst = max(worst, con.violation(values))
        for v in self.variables:
            x = float(values[v.id])
            worst = max(worst, v.lower - x, x - v.upper)
        return worst

    def integrality_violation(self, values) -> float:
        worst = 0.0
        for vid in self.binary_ids:
            x = float(values[vid])
            worst = max(worst, min(abs(x), abs(x - 1.0)))
        return worst

    def __repr__(self) -> str:
        nb, nc = self.counts()
        return f"MilpModel({self.name!r}, binaries={nb}, continuous={nc}, constraints={len(self.constraints)})"
