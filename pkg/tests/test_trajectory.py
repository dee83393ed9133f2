import numpy as np
import pytest

from coopmilp.dynamics import TimeGrid, VehicleState, discretize, propagate
from coopmilp.milp import Status, export_mps
from coopmilp.trajectory import TrajectoryProblem, uniform_avoid_times

START = VehicleState(-0.25, -0.2, -0.5, -0.2)
FINISH = VehicleState(0.4, 0.3, 0.0, 0.0)


def test_forced_single_control():
    # one step from rest with terminal velocity chosen so u_x = 0.5
    T = 0.3
    v = 0.5 * (1 - np.exp(-T))
    x = 0.5 * (T - 1 + np.exp(-T))
    p = TrajectoryProblem(VehicleState(0, 0, 0, 0), VehicleState(x, 0, v, 0), TimeGrid.uniform(1, T), 20)
    sol = p.solve()
    assert sol.status is Status.OPTIMAL
    assert sol.controls[0] == pytest.approx([0.5, 0.0], abs=1e-9)
    assert sol.objective == pytest.approx(0.5, abs=1e-9)


def test_free_end_needs_no_effort():
    sol = TrajectoryProblem(START, None, TimeGrid.uniform(5, 0.3), 20).solve()
    assert sol.objective == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.abs(sol.controls) <= 1e-12)


def test_transfer_is_an_lp_and_hits_the_target():
    p = TrajectoryProblem(START, FINISH, TimeGrid.uniform(10, 0.3), 20)
    model, _ = p.build()
    assert model.counts()[0] == 0
    sol = p.solve()
    assert sol.status is Status.OPTIMAL
    assert np.max(np.abs(sol.final_state.as_array() - FINISH.as_array())) <= 1e-6
    replay = propagate(START, sol.controls, discretize(p.grid))[-1]
    assert np.max(np.abs(replay.as_array() - FINISH.as_array())) <= 1e-6
    assert np.all(np.sum(sol.controls ** 2, axis=1) <= 1 + 1e-9)


def test_objective_is_sum_of_absolute_controls():
    sol = TrajectoryProblem(START, FINISH, TimeGrid.uniform(10, 0.3), 20).solve()
    assert sol.objective == pytest.approx(np.abs(sol.controls).sum(), abs=1e-8)


def test_unreachable_target_is_infeasible():
    far = VehicleState(50.0, 0.0, 0.0, 0.0)
    assert TrajectoryProblem(START, far, TimeGrid.uniform(3, 0.3), 8).solve().status is Status.INFEASIBLE


def test_uniform_avoid_times():
    assert uniform_avoid_times(TimeGrid.uniform(10, 0.3), 10) == pytest.approx([0.3 * (k + 1) for k in range(10)])
    assert uniform_avoid_times(TimeGrid.uniform(10, 0.3), 0) == ()


def test_mps_export_of_transfer_is_deterministic():
    p = TrajectoryProblem(START, FINISH, TimeGrid.uniform(10, 0.3), 20)
    assert export_mps(p.build()[0]) == export_mps(p.build()[0])
