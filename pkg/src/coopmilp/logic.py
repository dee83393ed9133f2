"""Propositional logic over binaries and big-M indicator encodings.

Expressions are compiled to CNF by plain distribution (no auxiliary
variables); each clause then becomes one linear inequality over the
binaries. Halfplane indicators tie a binary to the truth of
``a*x + b*y <= c`` for affine ``x, y``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from .milp import AffineExpr, Constraint, MilpModel


class BoolExpr:
    """Base class; combine with ``&``, ``|``, ``~``, ``>>`` (implies)."""

    def __and__(self, other: BoolExpr) -> BoolExpr:
        return And((self, other))

    def __or__(self, other: BoolExpr) -> BoolExpr:
        return Or((self, other))

    def __invert__(self) -> BoolExpr:
        return Not(self)

    def __rshift__(self, other: BoolExpr) -> BoolExpr:
        return Implies(self, other)

    def evaluate(self, values: Mapping[int, int]) -> bool:
        raise NotImplementedError

    def variables(self) -> set[int]:
        raise NotImplementedError


@dataclass(frozen=True)
class Literal(BoolExpr):
    var: int
    positive: bool = True

    def evaluate(self, values):
        return bool(round(values[self.var])) == self.positive

    def variables(self):
        return {self.var}

    def negated(self) -> Literal:
        return Literal(self.var, not self.positive)


@dataclass(frozen=True)
class Not(BoolExpr):
    arg: BoolExpr

    def evaluate(self, values):
        return not self.arg.evaluate(values)

    def variables(self):
        return self.arg.variables()


@dataclass(frozen=True)
class And(BoolExpr):
    args: tuple[BoolExpr, ...]

    def __post_init__(self):
        if not self.args:
            raise ValueError("And needs at least one argument")

    def evaluate(self, values):
        return all(a.evaluate(values) for a in self.args)

    def variables(self):
        return set().union(*(a.variables() for a in self.args))


@dataclass(frozen=True)
class Or(BoolExpr):
    args: tuple[BoolExpr, ...]

    def __post_init__(self):
        if not self.args:
            raise ValueError("Or needs at least one argument")

    def evaluate(self, values):
        return any(a.evaluate(values) for a in self.args)

    def variables(self):
        return set().union(*(a.variables() for a in self.args))


@dataclass(frozen=True)
class Implies(BoolExpr):
    lhs: BoolExpr
    rhs: BoolExpr

    def evaluate(self, values):
        return (not self.lhs.evaluate(values)) or self.rhs.evaluate(values)

    def variables(self):
        return self.lhs.variables() | self.rhs.variables()


@dataclass(frozen=True)
class Iff(BoolExpr):
    lhs: BoolExpr
    rhs: BoolExpr

    def evaluate(self, values):
        return self.lhs.evaluate(values) == self.rhs.evaluate(values)

    def variables(self):
        return self.lhs.variables() | self.rhs.variables()


def lit(var: int) -> Literal:
    return Literal(var, True)


def neg(var: int) -> Literal:
    return Literal(var, False)


def all_of(*args: BoolExpr) -> BoolExpr:
    return args[0] if len(args) == 1 else And(tuple(args))


def any_of(*args: BoolExpr) -> BoolExpr:
    return args[0] if len(args) == 1 else Or(tuple(args))


@dataclass(frozen=True)
class Clause:
    """Disjunction of literals, kept in first-appearance order."""

    literals: tuple[tuple[int, bool], ...]

    def __post_init__(self):
        if not self.literals:
            raise ValueError("a clause needs at least one literal")
        seen = [v for v, _ in self.literals]
        if len(seen) != len(set(seen)):
            raise ValueError("a clause may mention each variable once")

    def evaluate(self, values) -> bool:
        return any(bool(round(values[v])) == pol for v, pol in self.literals)

    def variables(self) -> set[int]:
        return {v for v, _ in self.literals}


def _nnf(expr: BoolExpr, positive: bool = True) -> BoolExpr:
    """Negation normal form: only literals under And/Or."""
    if isinstance(expr, Literal):
        return expr if positive else expr.negated()
    if isinstance(expr, Not):
        return _nnf(expr.arg, not positive)
    if isinstance(expr, And):
        parts = tuple(_nnf(a, positive) for a in expr.args)
        return And(parts) if positive else Or(parts)
    if isinstance(expr, Or):
        parts = tuple(_nnf(a, positive) for a in expr.args)
        return Or(parts) if positive else And(parts)
    if isinstance(expr, Implies):
        return _nnf(Or((Not(expr.lhs), expr.rhs)), positive)
    if isinstance(expr, Iff):
        both = And((Implies(expr.lhs, expr.rhs), Implies(expr.rhs, expr.lhs)))
        return _nnf(both, positive)
    raise TypeError(f"not a boolean expression: {expr!r}")


# a clause under construction: ordered literals, or None for a tautology
_Raw = tuple[tuple[int, bool], ...]


def _merge(a: _Raw, b: _Raw) -> _Raw | None:
    out = list(a)
    pol = dict(a)
    for v, p in b:
        if v in pol:
            if pol[v] != p:
                return None
            continue
        pol[v] = p
        out.append((v, p))
    return tuple(out)


def _dedupe(clauses: Iterable[_Raw]) -> tuple[_Raw, ...]:
    seen = set()
    out = []
    for c in clauses:
        key = frozenset(c)
        if key not in seen:
            seen.add(key)
            out.append(c)
    return tuple(out)


@lru_cache(maxsize=4096)
def _cnf(expr: BoolExpr) -> tuple[_Raw, ...]:
    # memoized on the (hashable) subtree, so repeated subtrees are shared
    if isinstance(expr, Literal):
        return (((expr.var, expr.positive),),)
    if isinstance(expr, And):
        return _dedupe(c for a in expr.args for c in _cnf(a))
    if isinstance(expr, Or):
        acc: tuple[_Raw, ...] = ((),)
        for a in expr.args:
            nxt = []
            for c1 in acc:
                for c2 in _cnf(a):
                    m = _merge(c1, c2)
                    if m is not None:
                        nxt.append(m)
            acc = _dedupe(nxt)
        return acc
    raise TypeError(f"expected negation normal form, got {expr!r}")


def to_cnf(expr: BoolExpr) -> list[Clause]:
    """Equivalent clause list; an empty list means ``expr`` is a tautology."""
    return [Clause(c) for c in _cnf(_nnf(expr))]


def clause_inequality(clause: Clause) -> Constraint:
    """``sum(positive) + sum(1 - negative) >= 1``."""
    expr = AffineExpr.sum(
        AffineExpr.term(v) if pol else 1.0 - AffineExpr.term(v) for v, pol in clause.literals
    )
    return expr.ge(1.0)


def clauses_to_inequalities(model: MilpModel, clauses: Sequence[Clause]) -> list[Constraint]:
    cons = []
    for clause in clauses:
        for v, _ in clause.literals:
            if not model.variables[v].is_binary:
                raise ValueError(f"clause literal on non-binary variable {model.variables[v].name!r}")
        cons.append(clause_inequality(clause))
    return cons


def encode(model: MilpModel, expr: BoolExpr) -> list[Constraint]:
    """Inequalities equivalent to ``expr`` over binary assignments."""
    return clauses_to_inequalities(model, to_cnf(expr))


@dataclass(frozen=True)
class Halfplane:
    """``a*x + b*y <= c``."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a == 0.0 and self.b == 0.0:
            raise ValueError("halfplane normal must be nonzero")

    def lhs(self, x, y):
        return self.a * x + self.b * y

    def contains(self, x: float, y: float) -> bool:
        return self.lhs(x, y) <= self.c


def polygon_halfplanes(radius: float, sides: int, center=(0.0, 0.0)) -> list[Halfplane]:
    """Face rows of the regular polygon of inscribed ``radius`` about ``center``."""
    from .geometry import face_normals

    cx, cy = center
    return [Halfplane(float(s), float(c), radius + s * cx + c * cy) for s, c in face_normals(sides)]


@dataclass(frozen=True)
class BigMParams:
    big_m: float
    eps: float = 1e-4

    def __post_init__(self):
        if not (self.big_m > 0 and math.isfinite(self.big_m)):
            raise ValueError(f"big-M constant must be positive and finite, got {self.big_m}")
        if not (self.eps > 0):
            raise ValueError(f"indicator margin must be positive, got {self.eps}")


def halfplane_indicator(g: int, point: tuple[AffineExpr, AffineExpr], hp: Halfplane,
                        params: BigMParams) -> list[Constraint]:
    """``g = 1`` iff ``a*x + b*y <= c``, exact when the point is at least ``eps`` off the line.

    Rows: ``lhs <= c + H(1 - g)`` and ``lhs >= c + eps - (H + eps) g``.
    """
    H, eps = params.big_m, params.eps
    x, y = point
    lhs = hp.a * x + hp.b * y
    gt = AffineExpr.term(g)
    return [
        (lhs + H * gt).le(hp.c + H),
        (lhs + (H + eps) * gt).ge(hp.c + eps),
    ]


def conjunction_indicator(out: int, parts: Sequence[int]) -> list[Constraint]:
    """``out = AND(parts)``: ``part - out >= 0`` each, ``sum(1 - part) + out >= 1``."""
    if not parts:
        raise ValueError("conjunction needs at least one part")
    cons = [AffineExpr({p: 1.0, out: -1.0}).ge(0.0) for p in parts]
    total = AffineExpr.sum(1.0 - AffineExpr.term(p) for p in parts) + AffineExpr.term(out)
    cons.append(total.ge(1.0))
    return cons


def disjunction_indicator(out: int, parts: Sequence[int]) -> list[Constraint]:
    """``out = OR(parts)``: ``out - part >= 0`` each, ``sum(part) - out >= 0``."""
    if not parts:
        raise ValueError("disjunction needs at least one part")
    cons = [AffineExpr({out: 1.0, p: -1.0}).ge(0.0) for p in parts]
    cons.append((AffineExpr({p: 1.0 for p in parts}) - AffineExpr.term(out)).ge(0.0))
    return cons


MAX_VERIFY_VARIABLES = 20


@dataclass
class EncodingReport:
    variables: tuple[int, ...]
    checked: int = 0
    disagreements: list[dict[int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.disagreements


def verify_encoding(expr: BoolExpr, constraints: Sequence[Constraint],
                    assume: BoolExpr | None = None, tol: float = 1e-9) -> EncodingReport:
    """Compare ``expr`` with feasibility of ``constraints`` on every 0/1 assignment.

    Only assignments satisfying ``assume`` are checked. Every variable in the
    constraints must also be enumerated, so the constraints must be purely
    over the binaries of ``expr`` (plus ``assume``).
    """
    names = set(expr.variables())
    if assume is not None:
        names |= assume.variables()
    for con in constraints:
        names |= con.expr.variables()
    variables = tuple(sorted(names))
    if len(variables) > MAX_VERIFY_VARIABLES:
        raise ValueError(f"{len(variables)} variables exceeds the limit of {MAX_VERIFY_VARIABLES}")
    report = EncodingReport(variables)
    for bits in itertools.product((0, 1), repeat=len(variables)):
        values = dict(zip(variables, bits))
        if assume is not None and not assume.evaluate(values):
            continue
        report.checked += 1
        truth = expr.evaluate(values)
        feasible = all(c.violation(values) <= tol for c in constraints)
        if truth != feasible:
            report.disagreements.append(values)
    return report
