import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopmilp.milp import (
    AffineExpr,
    MilpModel,
    ModelError,
    Status,
    TooManyBinaries,
    brute_force_solve,
    export_mps,
    solve_lp,
    solve_milp,
)
from coopmilp.milp.propagate import Propagator
from milp_cases import random_model


def test_binary_gets_unit_bounds():
    m = MilpModel()
    g = m.add_binary("gamma_1")
    assert g == 0
    v = m.variables[g]
    assert (v.lower, v.upper) == (0.0, 1.0)


def test_counts():
    m = MilpModel()
    m.add_binary()
    m.add_binary()
    u = m.add_continuous("u_x_0", -1, 1)
    m.add_constraint(AffineExpr.term(u).le(0.5))
    assert m.counts() == (2, 1)


@pytest.mark.parametrize("kind,lo,hi", [("continuous", 2.0, 1.0), ("binary", 0.0, 2.0), ("binary", -1.0, 1.0)])
def test_bad_bounds_rejected(kind, lo, hi):
    with pytest.raises(ModelError):
        MilpModel().add_variable("v", kind, lo, hi)


def test_unknown_variable_rejected():
    m = MilpModel()
    with pytest.raises(ModelError):
        m.add_constraint(AffineExpr.term(3).le(1.0))


def test_affine_terms_merge_and_drop_zeros():
    e = AffineExpr.term(0, 2.0) + AffineExpr.term(1) - AffineExpr.term(0, 2.0) + 3.0
    assert e.terms == {1: 1.0}
    assert e.constant == 3.0


def test_lp_single_bound():
    m = MilpModel()
    x = m.add_continuous("x")
    m.add_constraint(AffineExpr.term(x).ge(3.0))
    m.set_objective(AffineExpr.term(x))
    sol = solve_lp(m)
    assert sol.status is Status.OPTIMAL
    assert sol.value(x) == pytest.approx(3.0)
    assert sol.objective == pytest.approx(3.0)


def test_lp_absolute_value_gadget():
    m = MilpModel()
    z = m.add_continuous("z_x")
    m.add_constraint(AffineExpr.term(z).ge(0.5))
    m.add_constraint((-AffineExpr.term(z)).le(0.5))
    m.set_objective(AffineExpr.term(z))
    sol = solve_lp(m)
    assert sol.value(z) == pytest.approx(0.5)


def test_lp_face_of_simplex():
    m = MilpModel()
    x = m.add_continuous("x", 0.0)
    y = m.add_continuous("y", 0.0)
    m.add_constraint(AffineExpr({x: 1.0, y: 1.0}).le(1.0))
    m.set_objective(AffineExpr({x: -1.0, y: -1.0}))
    sol = solve_lp(m)
    assert sol.objective == pytest.approx(-1.0)
    assert sol.value(x) + sol.value(y) == pytest.approx(1.0)


def test_lp_infeasible_and_unbounded():
    m = MilpModel()
    x = m.add_continuous("x", 0.0, 1.0)
    m.add_constraint(AffineExpr.term(x).ge(2.0))
    assert solve_lp(m).status is Status.INFEASIBLE
    m = MilpModel()
    x = m.add_continuous("x")
    m.set_objective(AffineExpr.term(x))
    assert solve_lp(m).status is Status.UNBOUNDED


def _nonbasic_move_improves(model, values, step=1e-4):
    """First-order check: no single coordinate move that stays feasible lowers the objective."""
    base = model.objective.evaluate(values)
    for v in model.variables:
        for d in (step, -step):
            x = values.copy()
            x[v.id] += d
            if x[v.id] < v.lower - 1e-12 or x[v.id] > v.upper + 1e-12:
                continue
            if model.max_violation(x) <= 1e-9 and model.objective.evaluate(x) < base - 1e-9:
                return True
    return False


@pytest.mark.parametrize("seed", range(20))
def test_lp_optimum_has_no_improving_coordinate_move(seed):
    m = random_model(seed, max_binaries=0)
    sol = solve_lp(m)
    if sol.status is Status.OPTIMAL:
        assert m.max_violation(sol.values) <= 1e-7
        assert not _nonbasic_move_improves(m, sol.values)


def test_milp_rounds_up():
    m = MilpModel()
    g = m.add_binary("gamma")
    m.add_constraint(AffineExpr.term(g).ge(0.3))
    m.set_objective(AffineExpr.term(g))
    sol = solve_milp(m)
    assert sol.status is Status.OPTIMAL
    assert sol.value(g) == 1.0
    assert sol.objective == pytest.approx(1.0)


def test_brute_force_two_branches():
    m = MilpModel()
    b = m.add_binary("b")
    x = m.add_continuous("x", 0.0)
    m.add_constraint((AffineExpr.term(x) + AffineExpr.term(b)).ge(1.0))
    m.set_objective(AffineExpr({b: 1.0, x: 1.0}))
    sol = brute_force_solve(m)
    assert sol.objective == pytest.approx(1.0)


def test_brute_force_without_binaries_matches_lp():
    m = random_model(3, max_binaries=0)
    a, b = brute_force_solve(m), solve_lp(m)
    assert a.status is b.status
    if a.status is Status.OPTIMAL:
        assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_brute_force_infeasible_everywhere():
    m = MilpModel()
    a, b = m.add_binary(), m.add_binary()
    m.add_constraint(AffineExpr({a: 1.0, b: 1.0}).ge(3.0))
    assert brute_force_solve(m).status is Status.INFEASIBLE
    assert solve_milp(m).status is Status.INFEASIBLE


def test_brute_force_refuses_large_models():
    m = MilpModel()
    for _ in range(21):
        m.add_binary()
    with pytest.raises(TooManyBinaries):
        brute_force_solve(m)


@pytest.mark.parametrize("seed", range(1000, 1040))
def test_milp_matches_brute_force(seed):
    m = random_model(seed)
    a, b = solve_milp(m), brute_force_solve(m)
    assert a.status is b.status
    if a.status is Status.OPTIMAL:
        assert a.objective == pytest.approx(b.objective, abs=1e-6)
        assert m.max_violation(a.values) <= 1e-6
        assert m.integrality_violation(a.values) <= 1e-6


@pytest.mark.parametrize("seed", range(2000, 2010))
def test_milp_is_deterministic(seed):
    m = random_model(seed)
    a, b = solve_milp(m), solve_milp(m)
    assert a.status is b.status
    assert (a.objective == b.objective) or (math.isnan(a.objective) and math.isnan(b.objective))
    assert a.stats.nodes == b.stats.nodes


@pytest.mark.parametrize("seed", range(3000, 3015))
def test_hints_do_not_change_the_optimum(seed):
    m = random_model(seed)
    ref = brute_force_solve(m)
    bins = m.binary_ids
    rng = np.random.default_rng(seed)
    start = {b: float(rng.integers(0, 2)) for b in bins}
    prio = {b: int(rng.integers(0, 3)) for b in bins}
    eager = list(rng.permutation(bins)[: len(bins) // 2])
    sol = solve_milp(m, starts=[start], priority=prio, eager=eager)
    assert sol.status is ref.status
    if ref.status is Status.OPTIMAL:
        assert sol.objective == pytest.approx(ref.objective, abs=1e-6)


def test_time_limit_reports_status():
    m = random_model(5)
    sol = solve_milp(m, max_nodes=0)
    assert sol.status in (Status.TIME_LIMIT, Status.OPTIMAL, Status.INFEASIBLE, Status.UNBOUNDED)


def test_node_cap_keeps_incumbent_and_bound():
    # knapsack whose relaxation is fractional, so the root cannot settle it
    m = MilpModel()
    w = [3, 4, 5, 6, 7, 8, 9]
    xs = [m.add_binary(f"x{i}") for i in range(len(w))]
    m.add_constraint(AffineExpr({x: float(wi) for x, wi in zip(xs, w)}).le(20.5))
    m.set_objective(AffineExpr({x: -float(wi) - 0.5 * (i % 2) for i, (x, wi) in enumerate(zip(xs, w))}))
    capped = solve_milp(m, max_nodes=1)
    full = solve_milp(m)
    assert full.status is Status.OPTIMAL
    assert full.objective == pytest.approx(brute_force_solve(m).objective)
    if capped.status is Status.TIME_LIMIT:
        assert capped.bound <= full.objective + 1e-9
        if capped.values is not None:
            assert capped.objective >= full.objective - 1e-9


def test_mps_empty_model():
    text = export_mps(MilpModel("empty"))
    for section in ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
        assert section in text


def test_mps_binary_row():
    m = MilpModel("bin")
    g = m.add_binary("gamma")
    x = m.add_continuous("x", -1.0, 2.0)
    m.add_constraint(AffineExpr({g: 1.0, x: 1.0}).le(1.5), name="c1")
    m.set_objective(AffineExpr.term(x))
    lines = export_mps(m).splitlines()
    assert any(line.split()[:3] == ["BV", "BND", "gamma"] for line in lines)
    assert any(line.split()[:3] == ["LO", "BND", "x"] for line in lines)


def test_mps_long_names_are_generated_deterministically():
    m = MilpModel()
    a = m.add_continuous("a_very_long_name", 0.0)
    m.add_constraint(AffineExpr.term(a).ge(1.0))
    m.add_constraint(AffineExpr.term(a).le(5.0))
    assert export_mps(m) == export_mps(m)
    assert "_C000000" in export_mps(m)


def test_propagation_fixes_and_detects_infeasibility():
    m = MilpModel()
    a, b = m.add_binary(), m.add_binary()
    x = m.add_continuous("x", 0.0, 1.0)
    m.add_constraint(AffineExpr({a: 1.0, b: 1.0}).ge(2.0))
    m.add_constraint(AffineExpr({x: 1.0, a: -2.0}).ge(-1.5))
    arr = m.to_arrays()
    prop = Propagator(arr.A, arr.row_lo, arr.row_hi, arr.binary)
    lo, hi = prop.run(arr.col_lo, arr.col_hi)
    assert lo[a] == 1 and lo[b] == 1
    hi2 = arr.col_hi.copy()
    hi2[a] = 0.0
    assert prop.run(arr.col_lo, hi2) is None


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_propagation_never_cuts_off_optimum(seed):
    m = random_model(seed, max_binaries=6, max_continuous=4, max_rows=8)
    ref = brute_force_solve(m)
    if ref.status is not Status.OPTIMAL:
        return
    arr = m.to_arrays()
    out = Propagator(arr.A, arr.row_lo, arr.row_hi, arr.binary).run(arr.col_lo, arr.col_hi)
    assert out is not None
    lo, hi = out
    b = arr.binary
    assert np.all(ref.values[b] >= lo[b] - 1e-9) and np.all(ref.values[b] <= hi[b] + 1e-9)
