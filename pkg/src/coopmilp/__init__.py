"""Trajectory generation and cooperative RoboFlag drills as mixed integer linear programs.

Subpackage :mod:`coopmilp.milp` holds the modelling layer and solver; the
other modules build on it: :mod:`~coopmilp.logic` (logic to inequalities),
:mod:`~coopmilp.dynamics` and :mod:`~coopmilp.trajectory` (vehicle model),
:mod:`~coopmilp.avoidance` (obstacles), :mod:`~coopmilp.drills` and
:mod:`~coopmilp.sim` (drills and their simulation check),
:mod:`~coopmilp.bench` (random campaigns).
"""

from .avoidance import Obstacle, refine_avoidance_times
from .drills import (
    AttackerSpec,
    DefenderSpec,
    DrillGeometry,
    DrillInstance,
    DrillKind,
    build_drill_milp,
    duration_check,
    solve_drill,
)
from .dynamics import TimeGrid, VehicleState
from .sim import simulate, validate
from .trajectory import TrajectoryProblem

__version__ = "0.1.0"

__all__ = [
    "AttackerSpec",
    "DefenderSpec",
    "DrillGeometry",
    "DrillInstance",
    "DrillKind",
    "Obstacle",
    "TimeGrid",
    "TrajectoryProblem",
    "VehicleState",
    "build_drill_milp",
    "duration_check",
    "refine_avoidance_times",
    "simulate",
    "solve_drill",
    "validate",
]
