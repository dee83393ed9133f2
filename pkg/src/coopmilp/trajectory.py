"""Minimum-effort trajectories between two states, optionally around obstacles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .avoidance import Obstacle, avoidance_constraints, refine_avoidance_times
from .dynamics import (
    TimeGrid,
    VehicleState,
    add_controls,
    control_polygon_constraints,
    discretize,
    min_effort_objective,
    propagate,
    state_expr,
)
from .milp import MilpModel, Solution, Status, solve_lp, solve_milp


def reach_bound(state: VehicleState, horizon: float) -> float:
    """Upper bound on ``|(x(t), y(t))|`` over the horizon for inputs in the unit disk."""
    return math.hypot(state.x, state.y) + math.hypot(state.vx, state.vy) + horizon


def default_big_m(reach: float, max_radius: float) -> float:
    """Big-M constant for face rows ``n . (p - c)`` with ``|p|, |c| <= reach``."""
    return 2.0 * reach + max_radius + 1.0


@dataclass
class TrajectorySolution:
    status: Status
    objective: float
    controls: np.ndarray
    states: list[VehicleState]
    avoid_times: tuple[float, ...]
    raw: Solution
    model: MilpModel

    @property
    def final_state(self) -> VehicleState:
        return self.states[-1]


@dataclass
class TrajectoryProblem:
    """Drive a vehicle from ``start`` to ``finish`` over ``grid`` with least ``sum |u|``.

    Obstacles are kept out of at the avoidance times passed to :meth:`solve`.
    """

    start: VehicleState
    finish: VehicleState | None
    grid: TimeGrid
    control_sides: int = 20
    obstacles: Sequence[Obstacle] = ()
    big_m: float | None = None
    time_limit: float | None = None
    gap: float = 1e-6

    def effective_big_m(self) -> float:
        if self.big_m is not None:
            return self.big_m
        reach = reach_bound(self.start, self.grid.horizon)
        if self.finish is not None:
            reach = max(reach, math.hypot(self.finish.x, self.finish.y))
        for o in self.obstacles:
            reach = max(reach, o.max_extent)
        # leave room for inflated polygons
        radius = max((o.radius for o in self.obstacles), default=0.0)
        return default_big_m(reach, 1.5 * radius)

    def build(self, avoid_times: Sequence[float] = (),
              inflation: float = 0.0) -> tuple[MilpModel, list[tuple[int, int]]]:
        """The MILP and its control variable pairs."""
        model = MilpModel("traj")
        controls = add_controls(model, len(self.grid))
        model.add_constraints(control_polygon_constraints(controls, self.control_sides))
        _, _, objective = min_effort_objective(model, controls)
        model.set_objective(objective)
        initial = tuple(self.start.as_array())
        if self.finish is not None:
            final = state_expr(initial, controls, self.grid, self.grid.horizon)
            for expr, target in zip(final, self.finish.as_array()):
                model.add_constraint(expr.eq(float(target)))
        H = self.effective_big_m()
        for k, t in enumerate(sorted(avoid_times)):
            x, y, _, _ = state_expr(initial, controls, self.grid, t)
            for j, obs in enumerate(self.obstacles):
                center = obs.center_at(t)
                avoidance_constraints(model, (x, y), center, obs.radius * (1.0 + inflation),
                                      obs.sides, H, tag=f"b_{j + 1}[{k}]")
        return model, controls

    def solve(self, avoid_times: Sequence[float] = (), inflation: float = 0.0) -> TrajectorySolution:
        times = tuple(sorted(float(t) for t in avoid_times))
        model, controls = self.build(times, inflation)
        if model.binary_ids:
            raw = solve_milp(model, time_limit=self.time_limit, gap=self.gap)
        else:
            raw = solve_lp(model)
        n = len(self.grid)
        if raw.values is not None and len(raw.values):
            u = np.array([[raw.values[a], raw.values[b]] for a, b in controls])
            states = propagate(self.start, u, discretize(self.grid))
        else:
            u = np.full((n, 2), np.nan)
            states = []
        return TrajectorySolution(raw.status, raw.objective, u, states, times, raw, model)

    def solve_with_refinement(self, initial_times: Sequence[float], max_iterations: int = 10,
                              inflation: float = 0.05, samples: int = 1000):
        return refine_avoidance_times(self, initial_times, max_iterations, inflation, samples)


def uniform_avoid_times(grid: TimeGrid, count: int) -> tuple[float, ...]:
    """``count`` evenly spaced avoidance times ending at the horizon."""
    if count <= 0:
        return ()
    return tuple(grid.horizon * (k + 1) / count for k in range(count))
