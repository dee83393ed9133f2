"""Damped double-integrator vehicle: ``x'' + x' = u_x``, ``y'' + y' = u_y``.

Controls are held constant over each step of a (possibly nonuniform) time
grid, which gives exact affine step maps. Positions between grid nodes are
available numerically (:func:`intersample_state`) and as affine expressions
in the control variables (:func:`intersample_expr`) so they can appear in
MILP constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import face_normals
from .milp import AffineExpr, Constraint, MilpModel

Scalar = float | AffineExpr


@dataclass(frozen=True)
class TimeGrid:
    """Step durations ``T[k] > 0``; node times ``t[k] = sum(T[:k])``."""

    steps: tuple[float, ...]

    def __post_init__(self):
        steps = tuple(float(s) for s in self.steps)
        if not steps:
            raise ValueError("a time grid needs at least one step")
        for s in steps:
            if not (s > 0.0 and math.isfinite(s)):
                raise ValueError(f"step durations must be positive and finite, got {s}")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def uniform(cls, n: int, step: float) -> TimeGrid:
        return cls((step,) * n)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def nodes(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.steps)])

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    def step_index(self, t: float, tol: float = 1e-12) -> int:
        """The step ``k`` with ``t[k] <= t <= t[k+1]``; interior nodes bind to the later step."""
        nodes = self.nodes
        if t < -tol or t > nodes[-1] + tol:
            raise ValueError(f"time {t} outside grid span [0, {nodes[-1]}]")
        k = int(np.searchsorted(nodes, t, side="right")) - 1
        return min(max(k, 0), len(self.steps) - 1)


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    vx: float
    vy: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy])

    @classmethod
    def from_array(cls, a) -> VehicleState:
        return cls(*(float(v) for v in a))

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class DiscreteDynamics:
    A: tuple[np.ndarray, ...]
    B: tuple[np.ndarray, ...]
    grid: TimeGrid


def _step_matrices(T: float) -> tuple[np.ndarray, np.ndarray]:
    e = math.exp(-T)
    a = 1.0 - e
    b = T - 1.0 + e
    A = np.array([[1.0, 0.0, a, 0.0],
                  [0.0, 1.0, 0.0, a],
                  [0.0, 0.0, e, 0.0],
                  [0.0, 0.0, 0.0, e]])
    B = np.array([[b, 0.0],
                  [0.0, b],
                  [a, 0.0],
                  [0.0, a]])
    return A, B


def discretize(grid: TimeGrid) -> DiscreteDynamics:
    mats = [_step_matrices(T) for T in grid.steps]
    return DiscreteDynamics(tuple(m[0] for m in mats), tuple(m[1] for m in mats), grid)


def _as_state_array(state) -> np.ndarray:
    if isinstance(state, VehicleState):
        return state.as_array()
    arr = np.asarray(state, dtype=float)
    if arr.shape != (4,):
        raise ValueError(f"state must have 4 components, got shape {arr.shape}")
    return arr


def propagate(state, controls, dynamics: DiscreteDynamics) -> list[VehicleState]:
    """Node states ``x[0..N]`` from ``x[k+1] = A[k] x[k] + B[k] u[k]``."""
    u = np.asarray(controls, dtype=float).reshape(-1, 2) if len(controls) else np.zeros((0, 2))
    if len(u) != len(dynamics.A):
        raise ValueError(f"expected {len(dynamics.A)} controls, got {len(u)}")
    x = _as_state_array(state)
    out = [VehicleState.from_array(x)]
    for A, B, uk in zip(dynamics.A, dynamics.B, u):
        x = A @ x + B @ uk
        out.append(VehicleState.from_array(x))
    return out


def intersample_state(node_state, control, t_start: float, t: float,
                      t_end: float | None = None, tol: float = 1e-12) -> VehicleState:
    """State at time ``t`` inside the step that starts at ``t_start`` with ``node_state``."""
    if t < t_start - tol or (t_end is not None and t > t_end + tol):
        raise ValueError(f"time {t} outside step [{t_start}, {t_end}]")
    x, y, vx, vy = _as_state_array(node_state)
    ux, uy = (float(c) for c in control)
    tau = t - t_start
    e = math.exp(-tau)
    return VehicleState(
        x + (1.0 - e) * vx + (tau - 1.0 + e) * ux,
        y + (1.0 - e) * vy + (tau - 1.0 + e) * uy,
        e * vx + (1.0 - e) * ux,
        e * vy + (1.0 - e) * uy,
    )


def state_at(initial, controls, grid: TimeGrid, t: float) -> VehicleState:
    """Numeric state at any ``t`` in the grid span for a given control sequence."""
    return VehicleState.from_array(trajectory_samples(initial, controls, grid, [t])[0])


def trajectory_samples(initial, controls, grid: TimeGrid, times) -> np.ndarray:
    """States (rows of x, y, vx, vy) at each of ``times``, via one propagation."""
    u = np.asarray(controls, dtype=float).reshape(-1, 2)
    states = propagate(initial, u, discretize(grid))
    nodes = grid.nodes
    out = np.empty((len(times), 4))
    for i, t in enumerate(times):
        k = grid.step_index(float(t))
        s = intersample_state(states[k], u[k], nodes[k], float(t), nodes[k + 1], tol=1e-9)
        out[i] = s.as_array()
    return out


def _as_expr(v: Scalar) -> AffineExpr:
    return v if isinstance(v, AffineExpr) else AffineExpr.const(float(v))


def state_expr(initial: Sequence[Scalar], control_ids: Sequence[tuple[int, int]],
               grid: TimeGrid, t: float) -> tuple[AffineExpr, AffineExpr, AffineExpr, AffineExpr]:
    """Full state ``(x, y, vx, vy)`` at time ``t`` as affine expressions.

    ``initial`` holds numbers or expressions; ``control_ids[k]`` is the
    ``(u_x[k], u_y[k])`` variable pair for step ``k``.
    """
    if len(control_ids) != len(grid):
        raise ValueError(f"expected {len(grid)} control pairs, got {len(control_ids)}")
    k = grid.step_index(t)
    px, py, vx, vy = (_as_expr(v) for v in initial)
    for i in range(k):
        T = grid.steps[i]
        e = math.exp(-T)
        ux, uy = (AffineExpr.term(v) for v in control_ids[i])
        px = px + (1.0 - e) * vx + (T - 1.0 + e) * ux
        py = py + (1.0 - e) * vy + (T - 1.0 + e) * uy
        vx = e * vx + (1.0 - e) * ux
        vy = e * vy + (1.0 - e) * uy
    tau = t - grid.nodes[k]
    if tau == 0.0:
        return px, py, vx, vy
    e = math.exp(-tau)
    ux, uy = (AffineExpr.term(v) for v in control_ids[k])
    return (
        px + (1.0 - e) * vx + (tau - 1.0 + e) * ux,
        py + (1.0 - e) * vy + (tau - 1.0 + e) * uy,
        e * vx + (1.0 - e) * ux,
        e * vy + (1.0 - e) * uy,
    )


def intersample_expr(initial: Sequence[Scalar], control_ids: Sequence[tuple[int, int]],
                     grid: TimeGrid, t: float) -> tuple[AffineExpr, AffineExpr]:
    """Position ``(x(t), y(t))`` as affine expressions in the control variables."""
    x, y, _, _ = state_expr(initial, control_ids, grid, t)
    return x, y


def add_controls(model: MilpModel, n_steps: int, prefix: str = "u") -> list[tuple[int, int]]:
    """Control variables ``u_x[k], u_y[k]`` bounded to ``[-1, 1]``."""
    return [
        (model.add_continuous(f"{prefix}_x[{k}]", -1.0, 1.0),
         model.add_continuous(f"{prefix}_y[{k}]", -1.0, 1.0))
        for k in range(n_steps)
    ]


def control_polygon_constraints(control_ids: Sequence[tuple[int, int]], sides: int) -> list[Constraint]:
    """Keep each input inside the regular ``sides``-gon inscribed in the unit disk."""
    normals = face_normals(sides)
    rhs = math.cos(math.pi / sides)
    cons = []
    for ux, uy in control_ids:
        for s, c in normals:
            cons.append(AffineExpr({ux: s, uy: c}).le(rhs))
    return cons


def min_effort_objective(model: MilpModel, control_ids: Sequence[tuple[int, int]],
                         prefix: str = "z") -> tuple[list[tuple[int, int]], list[Constraint], AffineExpr]:
    """Linearize ``sum |u_x[k]| + |u_y[k]|`` with slacks ``-z <= u <= z``.

    Adds the slack variables and their constraints to ``model`` and returns
    ``(slack ids, constraints, objective expression)``.
    """
    slacks = []
    cons = []
    for k, (ux, uy) in enumerate(control_ids):
        zx = model.add_continuous(f"{prefix}_x[{k}]", 0.0)
        zy = model.add_continuous(f"{prefix}_y[{k}]", 0.0)
        for u, z in ((ux, zx), (uy, zy)):
            cons.append(AffineExpr({u: 1.0, z: -1.0}).le(0.0))
            cons.append(AffineExpr({u: 1.0, z: 1.0}).ge(0.0))
        slacks.append((zx, zy))
    model.add_constraints(cons)
    obj = AffineExpr({z: 1.0 for pair in slacks for z in pair})
    return slacks, cons, obj
