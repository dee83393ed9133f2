import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopmilp.dynamics import (
    TimeGrid,
    VehicleState,
    add_controls,
    control_polygon_constraints,
    discretize,
    intersample_expr,
    intersample_state,
    propagate,
    state_expr,
    trajectory_samples,
)
from coopmilp.milp import MilpModel


def test_step_matrix_entries():
    d = discretize(TimeGrid.uniform(1, 0.3))
    A, B = d.A[0], d.B[0]
    assert A[0, 2] == pytest.approx(0.2591817793, abs=1e-10)
    assert A[2, 2] == pytest.approx(0.7408182207, abs=1e-10)
    assert B[0, 0] == pytest.approx(0.0408182207, abs=1e-10)
    assert B[2, 0] == pytest.approx(0.2591817793, abs=1e-10)


def test_small_step_is_near_identity():
    d = discretize(TimeGrid.uniform(1, 0.001))
    assert np.allclose(d.A[0], np.eye(4), atol=1.1e-3)
    assert np.all(np.abs(d.B[0]) < 1.1e-3)


def test_nonuniform_steps_differ():
    d = discretize(TimeGrid((0.3, 0.5)))
    assert not np.allclose(d.A[0], d.A[1])


def test_zero_is_a_fixed_point():
    states = propagate(VehicleState(0, 0, 0, 0), np.zeros((5, 2)), discretize(TimeGrid.uniform(5, 0.3)))
    assert all(np.all(s.as_array() == 0) for s in states)


def test_coasting_step():
    s = propagate(VehicleState(0, 0, 1, 0), np.zeros((1, 2)), discretize(TimeGrid.uniform(1, 0.3)))[1]
    assert s.as_array() == pytest.approx([0.2591817793, 0.0, 0.7408182207, 0.0], abs=1e-10)


def test_intersample_midpoint():
    s = intersample_state(VehicleState(0, 0, 1, 0), (0.0, 0.0), 0.0, 0.15)
    assert s.x == pytest.approx(0.1392920236, abs=1e-10)


def test_intersample_matches_nodes():
    grid = TimeGrid.uniform(3, 0.4)
    rng = np.random.default_rng(0)
    u = rng.uniform(-0.7, 0.7, (3, 2))
    start = VehicleState(0.1, -0.2, 0.3, 0.0)
    nodes = propagate(start, u, discretize(grid))
    for k in range(3):
        t0, t1 = grid.nodes[k], grid.nodes[k + 1]
        assert intersample_state(nodes[k], u[k], t0, t0).as_array() == pytest.approx(nodes[k].as_array())
        end = intersample_state(nodes[k], u[k], t0, t1).as_array()
        assert np.max(np.abs(end - nodes[k + 1].as_array())) <= 1e-12


def test_step_index_is_left_closed():
    grid = TimeGrid.uniform(3, 1.0)
    assert grid.step_index(0.0) == 0
    assert grid.step_index(1.0) == 1
    assert grid.step_index(3.0) == 2
    with pytest.raises(ValueError):
        grid.step_index(3.5)


def test_expression_at_zero_is_initial_position():
    m = MilpModel()
    ids = add_controls(m, 2)
    x, y = intersample_expr((0.5, -0.25, 1.0, 1.0), ids, TimeGrid.uniform(2, 0.3), 0.0)
    assert not x.terms and x.constant == 0.5
    assert not y.terms and y.constant == -0.25


def test_expression_control_coefficient():
    m = MilpModel()
    ids = add_controls(m, 2)
    x, _ = intersample_expr((0.0, 0.0, 0.0, 0.0), ids, TimeGrid.uniform(2, 0.3), 0.3)
    assert x.terms[ids[0][0]] == pytest.approx(0.3 - 1 + math.exp(-0.3))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 1.0))
def test_expression_matches_numeric(seed, frac):
    rng = np.random.default_rng(seed)
    grid = TimeGrid(tuple(rng.uniform(0.1, 0.6, 4)))
    u = rng.uniform(-0.7, 0.7, (4, 2))
    start = rng.uniform(-1, 1, 4)
    t = frac * grid.horizon
    m = MilpModel()
    ids = add_controls(m, 4)
    values = np.zeros(len(m.variables))
    for (a, b), (ux, uy) in zip(ids, u):
        values[a], values[b] = ux, uy
    expr = state_expr(tuple(start), ids, grid, t)
    numeric = trajectory_samples(start, u, grid, [t])[0]
    assert [e.evaluate(values) for e in expr] == pytest.approx(list(numeric), abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(-1, 1), st.floats(-1, 1))
def test_split_steps_compose(t1, t2, ux, uy):
    start = VehicleState(0.2, -0.1, 0.5, -0.3)
    u = np.array([[ux, uy], [ux, uy]])
    two = propagate(start, u, discretize(TimeGrid((t1, t2))))[-1].as_array()
    one = propagate(start, u[:1], discretize(TimeGrid((t1 + t2,))))[-1].as_array()
    assert np.max(np.abs(two - one)) <= 1e-10


def test_explicit_sum_agrees_with_iteration():
    rng = np.random.default_rng(7)
    grid = TimeGrid(tuple(rng.uniform(0.1, 0.5, 6)))
    u = rng.uniform(-0.7, 0.7, (6, 2))
    x0 = rng.uniform(-1, 1, 4)
    d = discretize(grid)
    # x[N] = A[N-1]...A[0] x0 + sum_k A[N-1]...A[k+1] B[k] u[k]
    total = x0.copy()
    for A in d.A:
        total = A @ total
    for k in range(6):
        term = d.B[k] @ u[k]
        for A in d.A[k + 1:]:
            term = A @ term
        total += term
    iterated = propagate(x0, u, d)[-1].as_array()
    assert np.max(np.abs(total - iterated)) <= 1e-10


def test_four_sided_input_polygon_is_a_box():
    m = MilpModel()
    ids = add_controls(m, 1)
    cons = control_polygon_constraints(ids, 4)
    for c in cons:
        terms, rhs = c.normalized()
        assert rhs == pytest.approx(0.7071067812, abs=1e-10)
        assert len(terms) == 1


def test_input_polygon_membership():
    m = MilpModel()
    ids = add_controls(m, 1)
    ux, uy = ids[0]
    cons = control_polygon_constraints(ids, 20)
    vals = np.zeros(2)
    assert all(c.violation(vals) <= 0 for c in cons)
    vals[ux] = 1.0
    assert max(c.violation(vals) for c in cons) > 0
    assert math.cos(math.pi / 20) == pytest.approx(0.9876883406, abs=1e-10)


@pytest.mark.parametrize("sides", [4, 8, 20])
def test_input_polygon_vertices_lie_in_unit_disk(sides):
    from coopmilp.geometry import vertices

    r = math.cos(math.pi / sides)
    assert np.all(np.hypot(*vertices((0, 0), r, sides).T) <= 1 + 1e-9)
