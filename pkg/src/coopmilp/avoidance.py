"""Obstacle avoidance at discrete times, with iterative refinement of those times."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .dynamics import TimeGrid, trajectory_samples
from .geometry import face_normals
from .milp import AffineExpr, Constraint, MilpModel, Status

log = logging.getLogger(__name__)

DEFAULT_SAMPLES = 1000
DEFAULT_INFLATION = 0.05
DEFAULT_MAX_ITERATIONS = 10
BISECTION_STEPS = 10


@dataclass(frozen=True)
class Obstacle:
    """Circular obstacle whose center follows a sampled path.

    ``times``/``centers`` give the sampled center trajectory; between samples
    the center is linearly interpolated and it is held beyond either end. A
    single sample is a static obstacle.
    """

    radius: float
    centers: tuple[tuple[float, float], ...]
    times: tuple[float, ...] = (0.0,)
    sides: int = 10

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"obstacle radius must be positive, got {self.radius}")
        if self.sides < 3:
            raise ValueError(f"obstacle polygon needs at least 3 sides, got {self.sides}")
        centers = tuple((float(x), float(y)) for x, y in self.centers)
        times = tuple(float(t) for t in self.times)
        if len(centers) != len(times) or not centers:
            raise ValueError("obstacle needs one sample time per center")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("obstacle sample times must be strictly increasing")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "times", times)

    @classmethod
    def static(cls, x: float, y: float, radius: float, sides: int = 10) -> Obstacle:
        return cls(radius, ((x, y),), (0.0,), sides)

    def center_at(self, t) -> np.ndarray:
        c = np.asarray(self.centers)
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, self.times, c[:, 0]), np.interp(t, self.times, c[:, 1])], axis=-1)

    @property
    def max_extent(self) -> float:
        return max(math.hypot(x, y) for x, y in self.centers)


@dataclass(frozen=True)
class CollisionInterval:
    start: float
    end: float
    obstacle: int

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.start + self.end)


def avoidance_constraints(model: MilpModel, position: tuple[AffineExpr, AffineExpr],
                          center: Sequence[float], radius: float, sides: int, big_m: float,
                          tag: str = "b") -> tuple[list[int], list[Constraint]]:
    """Keep ``position`` outside the polygon of inscribed ``radius`` about ``center``.

    Adds one binary per face, ``n_m . (p - c) >= R - H b_m`` and
    ``sum b_m <= M - 1`` to ``model``; returns the binaries and the rows.
    """
    if not big_m > 0:
        raise ValueError(f"big-M constant must be positive, got {big_m}")
    x, y = position
    cx, cy = float(center[0]), float(center[1])
    bins = [model.add_binary(f"{tag}[{m + 1}]") for m in range(sides)]
    cons = []
    for b, (s, c) in zip(bins, face_normals(sides)):
        lhs = s * (x - cx) + c * (y - cy) + big_m * AffineExpr.term(b)
        cons.append(lhs.ge(radius))
    cons.append(AffineExpr({b: 1.0 for b in bins}).le(sides - 1))
    model.add_constraints(cons)
    return bins, cons


def _first_inside(sample_fn, t_out: float, t_in: float, steps: int) -> float:
    for _ in range(steps):
        mid = 0.5 * (t_out + t_in)
        if sample_fn(mid):
            t_in = mid
        else:
            t_out = mid
    return 0.5 * (t_out + t_in)


def collision_intervals(initial, controls, grid: TimeGrid, obstacles: Sequence[Obstacle],
                        samples: int = DEFAULT_SAMPLES) -> list[CollisionInterval]:
    """Time intervals on which the trajectory is strictly inside an obstacle circle.

    The horizon is sampled at ``samples`` evenly spaced times; runs of
    colliding samples become intervals whose ends are refined by bisection.
    """
    times = np.linspace(0.0, grid.horizon, samples)
    pos = trajectory_samples(initial, controls, grid, times)[:, :2]
    out: list[CollisionInterval] = []
    for oi, obs in enumerate(obstacles):
        def inside(t, obs=obs):
            p = trajectory_samples(initial, controls, grid, [t])[0, :2]
            return float(np.sum((p - obs.center_at(t)) ** 2)) < obs.radius ** 2

        d2 = np.sum((pos - obs.center_at(times)) ** 2, axis=1)
        hit = d2 < obs.radius ** 2
        i = 0
        while i < samples:
            if not hit[i]:
                i += 1
                continue
            j = i
            while j + 1 < samples and hit[j + 1]:
                j += 1
            start = times[i] if i == 0 else _first_inside(inside, times[i - 1], times[i], BISECTION_STEPS)
            end = times[j] if j == samples - 1 else _first_inside(inside, times[j + 1], times[j], BISECTION_STEPS)
            out.append(CollisionInterval(float(start), float(end), oi))
            i = j + 1
    out.sort(key=lambda c: (c.start, c.obstacle))
    return out


def min_clearance(initial, controls, grid: TimeGrid, obstacles: Sequence[Obstacle],
                  samples: int = DEFAULT_SAMPLES) -> float:
    """Smallest ``|p - c| - R`` over the sampled horizon and all obstacles."""
    if not obstacles:
        return math.inf
    times = np.linspace(0.0, grid.horizon, samples)
    pos = trajectory_samples(initial, controls, grid, times)[:, :2]
    return min(
        float(np.min(np.linalg.norm(pos - o.center_at(times), axis=1) - o.radius)) for o in obstacles
    )


class AvoidanceProblem(Protocol):
    """What the refinement loop needs from a trajectory problem."""

    start: object
    grid: TimeGrid
    obstacles: Sequence[Obstacle]

    def solve(self, avoid_times: Sequence[float], inflation: float = ...): ...


@dataclass
class RefinementStep:
    iteration: int
    avoid_times: tuple[float, ...]
    status: Status
    objective: float
    collisions: list[CollisionInterval]
    added: tuple[float, ...] = ()


@dataclass
class RefinementResult:
    solution: object
    avoid_times: tuple[float, ...]
    log: list[RefinementStep] = field(default_factory=list)
    collision_free: bool = False

    @property
    def iterations(self) -> int:
        """Number of re-solves after the first one."""
        return max(0, len(self.log) - 1)


def refine_avoidance_times(problem: AvoidanceProblem, initial_times: Sequence[float],
                           max_iterations: int = DEFAULT_MAX_ITERATIONS,
                           inflation: float = DEFAULT_INFLATION,
                           samples: int = DEFAULT_SAMPLES) -> RefinementResult:
    """Solve, check the true circles, add collision midpoints, repeat.

    The MILP sees polygons inflated by ``inflation`` times each radius; the
    collision check always uses the real circles. Stops when the trajectory
    is collision free, when a solve fails (the failing step is the last log
    entry) or after ``max_iterations`` refinements.
    """
    times = tuple(sorted(set(float(t) for t in initial_times)))
    result = RefinementResult(None, times)
    for it in range(max_iterations + 1):
        sol = problem.solve(times, inflation=inflation)
        result.solution = sol
        result.avoid_times = times
        if sol.status is not Status.OPTIMAL:
            result.log.append(RefinementStep(it, times, sol.status, math.nan, []))
            log.info("refinement iteration %d: solve ended with %s", it, sol.status.value)
            return result
        hits = collision_intervals(problem.start, sol.controls, problem.grid, problem.obstacles, samples)
        step = RefinementStep(it, times, sol.status, sol.objective, hits)
        result.log.append(step)
        if not hits:
            result.collision_free = True
            return result
        if it == max_iterations:
            break
        new = []
        for hit in hits:
            t = hit.midpoint
            if all(abs(t - s) > 1e-9 for s in times + tuple(new)):
                new.append(t)
        if not new:
            log.warning("refinement stalled: collision midpoints already enforced")
            break
        step.added = tuple(new)
        times = tuple(sorted(times + tuple(new)))
        log.info("refinement iteration %d: %d collision(s), adding %s", it, len(hits), new)
    return result
