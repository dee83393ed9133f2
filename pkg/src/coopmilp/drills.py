"""RoboFlag defensive drills compiled to MILPs.

Drill 1: attackers move straight at the Defense Zone until they enter it or
are intercepted, then stop. Drill 2 adds a retreat mode triggered when a
defender comes inside the attacker's warning region.

Indexing used throughout (attacker grid with ``N_a`` steps):

* positions ``p[k], q[k]`` for ``k = 0..N_a``;
* modes ``a[k]`` (or ``a1[k], a2[k]``) for ``k = 0..N_a-1``, with the
  initial mode fixed and ``a[1] = a[0]``;
* indicators ``gamma[k]``, ``delta[k]``, ``omega[k]`` for ``k = 1..N_a``;
  the indicators of step ``k`` drive the mode at ``k + 1``.

Arrays in :class:`DrillSolution` are padded so index ``k`` is step ``k``;
indicator arrays carry a 0 at ``k = 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .avoidance import avoidance_constraints
from .dynamics import (
    TimeGrid,
    VehicleState,
    add_controls,
    control_polygon_constraints,
    discretize,
    min_effort_objective,
    propagate,
    state_expr,
    trajectory_samples,
)
from .geometry import face_normals, in_polygon
from .logic import BigMParams, Halfplane, conjunction_indicator, disjunction_indicator, halfplane_indicator
from .milp import AffineExpr, Constraint, MilpModel, Solution, Status, solve_milp
from .trajectory import default_big_m, reach_bound

DEFAULT_EPS = 1e-4


class DrillKind(enum.Enum):
    DRILL1 = "drill1"
    DRILL2 = "drill2"


@dataclass(frozen=True)
class AttackerSpec:
    p: float
    q: float
    vp: float
    vq: float

    def __post_init__(self):
        if self.vp == 0.0 and self.vq == 0.0:
            raise ValueError("attacker velocity must be nonzero")

    @property
    def speed(self) -> float:
        return math.hypot(self.vp, self.vq)


@dataclass(frozen=True)
class DefenderSpec:
    start: VehicleState


@dataclass(frozen=True)
class DrillGeometry:
    zone_radius: float
    zone_sides: int = 8
    intercept_radius: float = 0.1
    intercept_sides: int = 8
    warning_radius: float | None = None
    warning_sides: int = 8
    field_radius: float | None = None

    def __post_init__(self):
        if self.warning_radius is None:
            object.__setattr__(self, "warning_radius", 2.0 * self.intercept_radius)
        for name in ("zone_radius", "intercept_radius", "warning_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("zone_sides", "intercept_sides", "warning_sides"):
            if getattr(self, name) < 3:
                raise ValueError(f"{name} must be at least 3")
        if self.field_radius is not None and not self.field_radius > 0:
            raise ValueError("field_radius must be positive")


@dataclass(frozen=True)
class DrillInstance:
    kind: DrillKind
    defenders: tuple[DefenderSpec, ...]
    attackers: tuple[AttackerSpec, ...]
    geometry: DrillGeometry
    control_grid: TimeGrid
    attacker_grid: TimeGrid
    avoid_times: tuple[float, ...] = ()
    control_sides: int = 8
    avoid_sides: int = 8
    big_m: float | None = None
    indicator_eps: float = DEFAULT_EPS
    fuel_weight: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "defenders", tuple(self.defenders))
        object.__setattr__(self, "attackers", tuple(self.attackers))
        object.__setattr__(self, "avoid_times", tuple(sorted(float(t) for t in self.avoid_times)))
        if not self.attackers:
            raise ValueError("a drill needs at least one attacker")
        if self.fuel_weight < 0:
            raise ValueError("fuel_weight must be nonnegative")
        if self.control_sides < 3 or self.avoid_sides < 3:
            raise ValueError("side counts must be at least 3")
        g = self.geometry
        for i, d in enumerate(self.defenders, start=1):
            if in_polygon(d.start.position, (0.0, 0.0), g.zone_radius, g.zone_sides):
                raise ValueError(f"defender {i} starts inside the Defense Zone")

    @property
    def n_steps(self) -> int:
        return len(self.attacker_grid)

    def effective_big_m(self) -> float:
        if self.big_m is not None:
            return self.big_m
        reach = 0.0
        for d in self.defenders:
            reach = max(reach, reach_bound(d.start, self.control_grid.horizon))
        for a in self.attackers:
            reach = max(reach, math.hypot(a.p, a.q) + a.speed * self.attacker_grid.horizon)
        if self.geometry.field_radius is not None:
            reach = max(reach, self.geometry.field_radius)
        g = self.geometry
        return default_big_m(reach, max(g.zone_radius, g.intercept_radius, g.warning_radius))

    def encoding(self) -> BigMParams:
        return BigMParams(self.effective_big_m(), self.indicator_eps)


class DrillBuildError(ValueError):
    pass


@dataclass
class DurationReport:
    ok: bool
    margin: float
    binding: int
    bounds: tuple[float, ...]


def duration_bound(attacker: AttackerSpec) -> float:
    """Time for the attacker to cover its initial distance to the zone center."""
    return math.sqrt((attacker.p ** 2 + attacker.q ** 2) / (attacker.vp ** 2 + attacker.vq ** 2))


def duration_check(instance: DrillInstance) -> DurationReport:
    """Whether the attacker grid is long enough for every attacker to reach the center."""
    bounds = tuple(duration_bound(a) for a in instance.attackers)
    binding = int(np.argmax(bounds))
    margin = instance.attacker_grid.horizon - bounds[binding]
    return DurationReport(margin >= -1e-12, margin, binding, bounds)


@dataclass
class DrillModel:
    """A built drill MILP plus where every quantity lives in it."""

    instance: DrillInstance
    model: MilpModel
    controls: list[list[tuple[int, int]]]
    p: list[list[int]]
    q: list[list[int]]
    modes: list[list[tuple[int, ...]]]
    gamma: list[list[int]]
    delta: dict[tuple[int, int], list[int]]
    omega: dict[tuple[int, int], list[int]]
    delta_any: list[list[int]]
    omega_any: list[list[int]]
    defender_at: list[list[tuple[AffineExpr, AffineExpr]]]
    avoid_bins: list[list[list[int]]] = field(default_factory=list)

    @property
    def directory(self) -> dict[str, int]:
        return {v.name: v.id for v in self.model.variables}


def _face_rows(radius: float, sides: int) -> list[Halfplane]:
    return [Halfplane(float(s), float(c), radius) for s, c in face_normals(sides)]


def attacker_kinematics_constraints(model: MilpModel, j: int, attacker: AttackerSpec, grid: TimeGrid,
                                    kind: DrillKind):
    """Position variables and mode binaries for attacker ``j`` (1-based) and their recursions."""
    n = len(grid)
    p = [model.add_continuous(f"p_{j}[{k}]") for k in range(n + 1)]
    q = [model.add_continuous(f"q_{j}[{k}]") for k in range(n + 1)]
    cons = [AffineExpr.term(p[0]).eq(attacker.p), AffineExpr.term(q[0]).eq(attacker.q)]
    if kind is DrillKind.DRILL1:
        a = [model.add_binary(f"a_{j}[{k}]") for k in range(n)]
        modes = [(a[k],) for k in range(n)]
        cons.append(AffineExpr.term(a[0]).eq(1.0))
        for k in range(n):
            T = grid.steps[k]
            cons.append(AffineExpr({p[k + 1]: 1.0, p[k]: -1.0, a[k]: -attacker.vp * T}).eq(0.0))
            cons.append(AffineExpr({q[k + 1]: 1.0, q[k]: -1.0, a[k]: -attacker.vq * T}).eq(0.0))
    else:
        a1 = [model.add_binary(f"a1_{j}[{k}]") for k in range(n)]
        a2 = [model.add_binary(f"a2_{j}[{k}]") for k in range(n)]
        modes = [(a1[k], a2[k]) for k in range(n)]
        cons.append(AffineExpr.term(a1[0]).eq(1.0))
        cons.append(AffineExpr.term(a2[0]).eq(0.0))
        for k in range(n):
            T = grid.steps[k]
            cons.append(AffineExpr({a1[k]: 1.0, a2[k]: 1.0}).le(1.0))
            cons.append(AffineExpr({p[k + 1]: 1.0, p[k]: -1.0, a1[k]: -attacker.vp * T,
                                    a2[k]: attacker.vp * T}).eq(0.0))
            cons.append(AffineExpr({q[k + 1]: 1.0, q[k]: -1.0, a1[k]: -attacker.vq * T,
                                    a2[k]: attacker.vq * T}).eq(0.0))
    model.add_constraints(cons)
    return p, q, modes, cons


def _region_indicator(model: MilpModel, tag: str, offset: tuple[AffineExpr, AffineExpr],
                      radius: float, sides: int, enc: BigMParams) -> int:
    """Binary equal to ``offset`` lying in the polygon of inscribed ``radius`` at the origin."""
    faces = [model.add_binary(f"{tag}_face[{m + 1}]") for m in range(sides)]
    out = model.add_binary(tag)
    cons: list[Constraint] = []
    for f, hp in zip(faces, _face_rows(radius, sides)):
        cons += halfplane_indicator(f, offset, hp, enc)
    cons += conjunction_indicator(out, faces)
    model.add_constraints(cons)
    return out


def defense_zone_indicator(model: MilpModel, j: int, k: int, p: int, q: int,
                           geometry: DrillGeometry, enc: BigMParams) -> int:
    pos = (AffineExpr.term(p), AffineExpr.term(q))
    return _region_indicator(model, f"gamma_{j}[{k}]", pos, geometry.zone_radius, geometry.zone_sides, enc)


def intercept_indicator(model: MilpModel, i: int, j: int, k: int, p: int, q: int,
                        defender: tuple[AffineExpr, AffineExpr], geometry: DrillGeometry,
                        enc: BigMParams) -> int:
    offset = (AffineExpr.term(p) - defender[0], AffineExpr.term(q) - defender[1])
    return _region_indicator(model, f"delta_{i}_{j}[{k}]", offset, geometry.intercept_radius,
                             geometry.intercept_sides, enc)


def warning_indicator(model: MilpModel, i: int, j: int, k: int, p: int, q: int,
                      defender: tuple[AffineExpr, AffineExpr], geometry: DrillGeometry,
                      enc: BigMParams, kind: DrillKind = DrillKind.DRILL2) -> int:
    if kind is not DrillKind.DRILL2:
        raise ValueError("warning regions exist only in Drill 2")
    offset = (defender[0] - AffineExpr.term(p), defender[1] - AffineExpr.term(q))
    return _region_indicator(model, f"omega_{i}_{j}[{k}]", offset, geometry.warning_radius,
                             geometry.warning_sides, enc)


def state_machine_constraints(kind: DrillKind, now: tuple[int, ...], nxt: tuple[int, ...],
                              gamma: int, delta: int, omega: int | None = None) -> list[Constraint]:
    """Mode transition rows from step ``k`` (``now``) to ``k + 1`` (``nxt``)."""
    T = AffineExpr.term
    if kind is DrillKind.DRILL1:
        (a,), (an,) = now, nxt
        return [
            (T(an) + T(delta)).le(1.0),
            (T(an) - T(a)).le(0.0),
            (T(an) + T(gamma)).le(1.0),
            (T(a) - T(delta) - T(gamma) - T(an)).le(0.0),
        ]
    if omega is None:
        raise ValueError("Drill 2 transitions need the warning indicator")
    (a1, a2), (b1, b2) = now, nxt
    g, d, w = T(gamma), T(delta), T(omega)
    return [
        (T(b1) - T(a1) + T(a2) + g + d + w).ge(0.0),
        (T(b1) + T(a1) - T(a2) + g + d + w).ge(0.0),
        (T(b2) + T(a1) - T(a2) + g + d - w).ge(-1.0),
        (T(b2) - T(a1) + T(a2) + g + d - w).ge(-1.0),
        (T(b1) + T(a1) + T(a2)).le(2.0),
        (T(b1) - T(a1) - T(a2)).le(0.0),
        (T(b1) + g).le(1.0),
        (T(b1) + d).le(1.0),
        (T(b1) + w).le(1.0),
        (T(b2) - T(a1) - T(a2)).le(0.0),
        (T(b2) + T(a1) + T(a2)).le(2.0),
        (T(b2) + g).le(1.0),
        (T(b2) + d).le(1.0),
        (T(b2) - w).le(0.0),
    ]


def defender_zone_avoidance(model: MilpModel, i: int, controls, instance: DrillInstance,
                            big_m: float) -> list[list[int]]:
    """Keep defender ``i`` outside the zone polygon at every avoidance time."""
    start = tuple(instance.defenders[i - 1].start.as_array())
    bins = []
    for k, t in enumerate(instance.avoid_times):
        x, y, _, _ = state_expr(start, controls, instance.control_grid, t)
        b, _ = avoidance_constraints(model, (x, y), (0.0, 0.0), instance.geometry.zone_radius,
                                     instance.avoid_sides, big_m, tag=f"b_{i}[{k + 1}]")
        bins.append(b)
    return bins


def build_drill_milp(instance: DrillInstance, force: bool = False) -> DrillModel:
    """Assemble the full drill MILP for every defender and attacker."""
    report = duration_check(instance)
    if not report.ok and not force:
        raise DrillBuildError(
            f"attacker horizon {instance.attacker_grid.horizon:g} is shorter than the required "
            f"{report.bounds[report.binding]:g} (attacker {report.binding + 1})")
    if instance.attacker_grid.horizon > instance.control_grid.horizon + 1e-9:
        raise DrillBuildError("inconsistent grids: attacker horizon exceeds control horizon")
    if instance.avoid_times and (instance.avoid_times[0] < 0
                                 or instance.avoid_times[-1] > instance.control_grid.horizon + 1e-9):
        raise DrillBuildError("inconsistent grids: avoidance times outside the control horizon")

    kind = instance.kind
    geo = instance.geometry
    enc = instance.encoding()
    model = MilpModel(kind.value)
    n = instance.n_steps
    times = instance.attacker_grid.nodes
    nd = len(instance.defenders)

    controls = []
    fuel_terms = []
    defender_at = []
    avoid_bins = []
    for i, d in enumerate(instance.defenders, start=1):
        u = add_controls(model, len(instance.control_grid), prefix=f"u{i}")
        model.add_constraints(control_polygon_constraints(u, instance.control_sides))
        controls.append(u)
        if instance.fuel_weight > 0:
            _, _, effort = min_effort_objective(model, u, prefix=f"z{i}")
            fuel_terms.append(effort)
        start = tuple(d.start.as_array())
        defender_at.append([
            tuple(state_expr(start, u, instance.control_grid, float(t))[:2]) for t in times
        ])
        avoid_bins.append(defender_zone_avoidance(model, i, u, instance, enc.big_m))

    P, Q, modes = [], [], []
    gamma = []
    delta: dict[tuple[int, int], list[int]] = {}
    omega: dict[tuple[int, int], list[int]] = {}
    delta_any, omega_any = [], []
    for j, att in enumerate(instance.attackers, start=1):
        p, q, mode, _ = attacker_kinematics_constraints(model, j, att, instance.attacker_grid, kind)
        P.append(p)
        Q.append(q)
        modes.append(mode)
        g_row = [-1]
        d_any, w_any = [-1], [-1]
        for i in range(1, nd + 1):
            delta[(i, j)] = [-1]
            omega[(i, j)] = [-1]
        for k in range(1, n + 1):
            g = defense_zone_indicator(model, j, k, p[k], q[k], geo, enc)
            g_row.append(g)
            ds, ws = [], []
            for i in range(1, nd + 1):
                at = defender_at[i - 1][k]
                ds.append(intercept_indicator(model, i, j, k, p[k], q[k], at, geo, enc))
                delta[(i, j)].append(ds[-1])
                if kind is DrillKind.DRILL2:
                    ws.append(warning_indicator(model, i, j, k, p[k], q[k], at, geo, enc))
                    omega[(i, j)].append(ws[-1])
            d_any.append(_aggregate(model, f"delta_{j}[{k}]", ds))
            w_any.append(_aggregate(model, f"omega_{j}[{k}]", ws) if kind is DrillKind.DRILL2 else -1)
        gamma.append(g_row)
        delta_any.append(d_any)
        omega_any.append(w_any)

        # no indicators at step 0: the mode carries over to step 1
        if n > 1:
            model.add_constraints(AffineExpr({a: 1.0, b: -1.0}).eq(0.0) for a, b in zip(mode[1], mode[0]))
        for k in range(1, n - 1):
            w = w_any[k] if kind is DrillKind.DRILL2 else None
            model.add_constraints(state_machine_constraints(kind, mode[k], mode[k + 1], g_row[k], d_any[k], w))

    model.set_objective(drill_objective(gamma, fuel_terms, instance.fuel_weight))
    return DrillModel(instance, model, controls, P, Q, modes, gamma, delta, omega,
                      delta_any, omega_any, defender_at, avoid_bins)


def drill_objective(gamma: Sequence[Sequence[int]], efforts: Sequence[AffineExpr],
                    fuel_weight: float) -> AffineExpr:
    """Zone-entry steps summed over attackers plus ``fuel_weight`` times the control effort."""
    total = AffineExpr({g: 1.0 for row in gamma for g in row if g >= 0})
    for effort in efforts:
        total = total + fuel_weight * effort
    return total


def _aggregate(model: MilpModel, name: str, parts: Sequence[int]) -> int:
    """OR of per-defender indicators; a single defender needs no extra variable."""
    if len(parts) == 1:
        return parts[0]
    out = model.add_binary(name)
    if parts:
        model.add_constraints(disjunction_indicator(out, parts))
    else:
        model.add_constraint(AffineExpr.term(out).eq(0.0))
    return out


@dataclass
class DrillSolution:
    status: Status
    objective: float
    bound: float
    controls: list[np.ndarray]
    defender_states: list[list[VehicleState]]
    defender_positions: list[np.ndarray]
    p: np.ndarray
    q: np.ndarray
    modes: np.ndarray
    gamma: np.ndarray
    delta: dict[tuple[int, int], np.ndarray]
    omega: dict[tuple[int, int], np.ndarray]
    delta_any: np.ndarray
    omega_any: np.ndarray
    raw: Solution
    built: DrillModel

    @property
    def zone_entries(self) -> int | None:
        """Sum of the zone indicators, or None without a solution."""
        if self.raw.values is None:
            return None
        return int(round(self.gamma.sum()))

    @property
    def fuel(self) -> float:
        return float(sum(np.abs(u).sum() for u in self.controls))

    @property
    def stats(self):
        return self.raw.stats


def _pick(values: np.ndarray, ids: Sequence[int]) -> np.ndarray:
    return np.array([0.0 if v < 0 else values[v] for v in ids])


def decode(built: DrillModel, raw: Solution) -> DrillSolution:
    inst = built.instance
    n = inst.n_steps
    na = len(inst.attackers)
    width = 1 if inst.kind is DrillKind.DRILL1 else 2
    if raw.values is None:
        nan = np.full((na, n + 1), np.nan)
        return DrillSolution(raw.status, raw.objective, raw.bound, [], [], [], nan, nan,
                             np.full((na, n, width), -1), nan, {}, {}, nan, nan, raw, built)
    x = raw.values
    controls = [np.array([[x[a], x[b]] for a, b in u]) for u in built.controls]
    states = [propagate(d.start, u, discretize(inst.control_grid)) for d, u in zip(inst.defenders, controls)]
    times = inst.attacker_grid.nodes
    positions = [trajectory_samples(d.start, u, inst.control_grid, times)[:, :2]
                 for d, u in zip(inst.defenders, controls)]
    p = np.array([[x[v] for v in row] for row in built.p])
    q = np.array([[x[v] for v in row] for row in built.q])
    modes = np.rint([[[x[v] for v in m] for m in row] for row in built.modes]).astype(int)
    bit = lambda ids: np.rint(_pick(x, ids)).astype(int)  # noqa: E731
    gamma = np.array([bit(row) for row in built.gamma])
    delta = {key: bit(ids) for key, ids in built.delta.items()}
    omega = {key: bit(ids) for key, ids in built.omega.items() if len(ids) > 1 and ids[1] >= 0}
    delta_any = np.array([bit(row) for row in built.delta_any])
    omega_any = np.array([bit(row) for row in built.omega_any])
    return DrillSolution(raw.status, raw.objective, raw.bound, controls, states, positions, p, q, modes,
                         gamma, delta, omega, delta_any, omega_any, raw, built)


def branch_priority(built: DrillModel) -> dict[int, int]:
    """Modes first, then intercepts, then the other region indicators, then faces."""
    prio = {}
    levels = ((built.gamma, 2), (built.omega_any, 2), (built.delta_any, 3))
    for rows, level in levels:
        for row in rows:
            for v in row:
                if v >= 0:
                    prio[v] = level
    for table, level in ((built.omega, 2), (built.delta, 3)):
        for row in table.values():
            for v in row:
                if v >= 0:
                    prio[v] = level
    for row in built.modes:
        for mode in row:
            for v in mode:
                prio[v] = 4
    return prio


def solve_drill(instance: DrillInstance, time_limit: float | None = None, gap: float = 1e-6,
                force: bool = False, starts: Sequence[Sequence] = ()) -> DrillSolution:
    """Build and solve; ``starts`` are extra defender control sets to try as MIP starts.

    Holding every defender still is always tried as a start.
    """
    built = build_drill_milp(instance, force=force)
    n_u = len(instance.control_grid)
    candidates = [[np.zeros((n_u, 2)) for _ in instance.defenders], *starts]
    warm = [start_values(built, c) for c in candidates]
    # step by step across attackers
    modes = [v for k in range(instance.n_steps) for row in built.modes for v in row[k]]
    raw = solve_milp(built.model, time_limit=time_limit, gap=gap, starts=warm,
                     priority=branch_priority(built), eager=modes)
    return decode(built, raw)


def start_values(built: DrillModel, controls: Sequence) -> dict[int, float]:
    """Binary assignment implied by replaying ``controls``, usable as a MIP start.

    Every indicator is read off the simulated geometry; each avoidance group
    leaves free the face the defender is furthest outside of. The result may
    still be infeasible (a defender inside the zone at an avoidance time, or
    a point inside an indicator's margin); the solver then ignores it.
    """
    from .geometry import face_margins
    from .sim import simulate

    inst = built.instance
    geo = inst.geometry
    trace = simulate(inst, controls)
    ids = built.directory
    x: dict[int, float] = {}

    def faces(tag, offset, radius, sides):
        margins = face_margins(offset, (0.0, 0.0), radius, sides)
        for m, v in enumerate(margins):
            x[ids[f"{tag}_face[{m + 1}]"]] = float(v <= 0.0)

    nd = len(inst.defenders)
    for r, row in enumerate(built.modes):
        j = r + 1
        for k, mode in enumerate(row):
            for v, val in zip(mode, trace.modes[r, k]):
                x[v] = float(val)
        for k in range(1, inst.n_steps + 1):
            pos = np.array([trace.p[r, k], trace.q[r, k]])
            x[built.gamma[r][k]] = float(trace.gamma[r, k])
            faces(f"gamma_{j}[{k}]", pos, geo.zone_radius, geo.zone_sides)
            for i in range(1, nd + 1):
                dpos = trace.defender_positions[i - 1, k]
                x[built.delta[(i, j)][k]] = float(trace.delta[(i, j)][k])
                faces(f"delta_{i}_{j}[{k}]", pos - dpos, geo.intercept_radius, geo.intercept_sides)
                if inst.kind is DrillKind.DRILL2:
                    x[built.omega[(i, j)][k]] = float(trace.omega[(i, j)][k])
                    faces(f"omega_{i}_{j}[{k}]", dpos - pos, geo.warning_radius, geo.warning_sides)
            if built.delta_any[r][k] >= 0:
                x[built.delta_any[r][k]] = float(trace.delta_any[r, k])
            if built.omega_any[r][k] >= 0:
                x[built.omega_any[r][k]] = float(trace.omega_any[r, k])
    for d, u, groups in zip(inst.defenders, controls, built.avoid_bins):
        pts = trajectory_samples(d.start, u, inst.control_grid, inst.avoid_times)[:, :2] if groups else []
        for pt, bins in zip(pts, groups):
            free = int(np.argmax(face_normals(len(bins)) @ pt))
            for m, b in enumerate(bins):
                x[b] = float(m != free)
    return x
