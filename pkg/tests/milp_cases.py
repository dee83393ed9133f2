"""Seeded random MILPs for oracle comparisons."""

import math

import numpy as np

from coopmilp.milp import AffineExpr, MilpModel


def random_model(seed: int, max_binaries: int = 10, max_continuous: int = 10, max_rows: int = 20) -> MilpModel:
    """Small MILP; most rows hold at a hidden point so many models are feasible."""
    rng = np.random.default_rng(seed)
    m = MilpModel(f"rand{seed}")
    nb = int(rng.integers(0, max_binaries + 1))
    nc = int(rng.integers(0, max_continuous + 1))
    if nb + nc == 0:
        nb = 1
    ids, point = [], []
    for i in range(nb):
        ids.append(m.add_binary(f"b{i}"))
        point.append(float(rng.integers(0, 2)))
    for i in range(nc):
        lo = float(rng.integers(-5, 1)) if rng.random() < 0.9 else -math.inf
        hi = float(rng.integers(1, 6)) if rng.random() < 0.9 else math.inf
        ids.append(m.add_continuous(f"x{i}", lo, hi))
        point.append(float(rng.uniform(max(lo, -5.0), min(hi, 5.0))))
    for _ in range(int(rng.integers(1, max_rows + 1))):
        k = int(rng.integers(1, min(5, len(ids)) + 1))
        vs = rng.choice(len(ids), size=k, replace=False)
        expr = AffineExpr({ids[v]: float(rng.integers(-5, 6)) for v in vs})
        at_point = sum(expr.terms.get(ids[v], 0.0) * point[v] for v in vs)
        kind = rng.integers(0, 5)
        if rng.random() < 0.8:
            slack = float(rng.integers(0, 3))
            rhs = math.floor(at_point) + slack if kind < 3 else (math.ceil(at_point) - slack if kind < 4 else at_point)
        else:
            rhs = float(rng.integers(-4, 8))
        if kind < 3:
            m.add_constraint(expr.le(rhs))
        elif kind < 4:
            m.add_constraint(expr.ge(rhs))
        else:
            m.add_constraint(expr.eq(rhs))
    m.set_objective(AffineExpr({i: float(rng.integers(-5, 6)) for i in ids}))
    return m
