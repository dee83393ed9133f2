"""Forward simulation of the drill attackers against fixed defender controls.

This is the solver-independent check on drill MILPs: indicator values come
from closed halfplane tests in plain floating point and modes follow the
transition rules directly, so nothing here depends on big-M constants.
The step layout matches :mod:`coopmilp.drills`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .drills import DrillInstance, DrillKind, DrillSolution
from .dynamics import trajectory_samples
from .geometry import face_margins

# distance past the face beyond which a point counts as cleanly outside,
# on top of the MILP's indicator margin
BOUNDARY_TOL = 1e-6


@dataclass
class SimTrace:
    times: np.ndarray
    p: np.ndarray  # (attackers, N_a + 1)
    q: np.ndarray
    modes: np.ndarray  # (attackers, N_a, 1 or 2)
    gamma: np.ndarray  # (attackers, N_a + 1), 0 at k = 0
    delta: dict[tuple[int, int], np.ndarray]
    omega: dict[tuple[int, int], np.ndarray]
    delta_any: np.ndarray
    omega_any: np.ndarray
    defender_positions: np.ndarray  # (defenders, N_a + 1, 2)
    # (quantity, attacker, step) of indicators evaluated within the deadband
    ambiguous: list[tuple[str, int, int]] = field(default_factory=list)

    @property
    def score(self) -> int:
        return int(self.gamma.sum())

    def write_csv(self, out: TextIO) -> None:
        """One row per step; columns k, t, then per defender and per attacker."""
        nd = self.defender_positions.shape[0]
        na = self.p.shape[0]
        header = ["k", "t"]
        for i in range(1, nd + 1):
            header += [f"d{i}_x", f"d{i}_y"]
        for j in range(1, na + 1):
            header += [f"a{j}_x", f"a{j}_y", f"a{j}_mode", f"a{j}_gamma", f"a{j}_delta", f"a{j}_omega"]
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        n = len(self.times) - 1
        for k in range(n + 1):
            row: list = [k, repr(float(self.times[k]))]
            for i in range(nd):
                row += [repr(float(v)) for v in self.defender_positions[i, k]]
            for j in range(na):
                mode = mode_label(self.modes[j, k]) if k < n else ""
                row += [repr(float(self.p[j, k])), repr(float(self.q[j, k])), mode,
                        int(self.gamma[j, k]), int(self.delta_any[j, k]), int(self.omega_any[j, k])]
            w.writerow(row)


def mode_label(mode) -> str:
    """``attack``, ``retreat`` or ``inactive``."""
    if len(mode) == 1:
        return "attack" if mode[0] else "inactive"
    if mode[0]:
        return "attack"
    return "retreat" if mode[1] else "inactive"


def _inside(offset, radius: float, sides: int, eps: float) -> tuple[bool, bool]:
    """(closed-polygon membership, whether some face is within the deadband)."""
    m = face_margins(offset, (0.0, 0.0), radius, sides)
    band = (m > -BOUNDARY_TOL) & (m < eps + BOUNDARY_TOL)
    # only ambiguous when no face outside the band already settles it
    clearly_out = np.any(m >= eps + BOUNDARY_TOL)
    return bool(np.all(m <= 0.0)), bool(np.any(band) and not clearly_out)


def next_mode(kind: DrillKind, mode: tuple[int, ...], gamma: int, delta: int, omega: int = 0) -> tuple[int, ...]:
    """Mode at step ``k + 1`` from the mode and indicators at step ``k``."""
    if kind is DrillKind.DRILL1:
        (a,) = mode
        return (int(a and not gamma and not delta),)
    a1, a2 = mode
    active = (a1 and not a2) or (a2 and not a1)
    go = active and not gamma and not delta
    return (int(go and not omega), int(go and omega))


def simulate(instance: DrillInstance, controls: Sequence, overrides=None) -> SimTrace:
    """Replay ``controls`` (one ``(N_u, 2)`` array per defender).

    ``overrides`` maps ``(quantity, attacker, step)`` to a forced 0/1 value
    for an indicator whose geometry is inside the deadband; ``quantity`` is
    ``"gamma"``, ``"delta"`` or ``"omega"`` (the per-attacker aggregates).
    """
    kind = instance.kind
    geo = instance.geometry
    eps = instance.indicator_eps
    grid = instance.attacker_grid
    n = len(grid)
    nd, na = len(instance.defenders), len(instance.attackers)
    if len(controls) != nd:
        raise ValueError(f"expected controls for {nd} defenders, got {len(controls)}")
    if grid.horizon > instance.control_grid.horizon + 1e-9:
        raise ValueError("attacker horizon exceeds the control horizon")
    overrides = overrides or {}
    times = grid.nodes
    dpos = np.zeros((nd, n + 1, 2))
    for i, (d, u) in enumerate(zip(instance.defenders, controls)):
        u = np.asarray(u, dtype=float).reshape(-1, 2)
        if len(u) != len(instance.control_grid):
            raise ValueError(f"defender {i + 1}: expected {len(instance.control_grid)} controls, got {len(u)}")
        dpos[i] = trajectory_samples(d.start, u, instance.control_grid, times)[:, :2]

    width = 1 if kind is DrillKind.DRILL1 else 2
    p = np.zeros((na, n + 1))
    q = np.zeros((na, n + 1))
    modes = np.zeros((na, n, width), dtype=int)
    gamma = np.zeros((na, n + 1), dtype=int)
    delta_any = np.zeros((na, n + 1), dtype=int)
    omega_any = np.zeros((na, n + 1), dtype=int)
    delta = {(i, j): np.zeros(n + 1, dtype=int) for i in range(1, nd + 1) for j in range(1, na + 1)}
    omega = {}
    if kind is DrillKind.DRILL2:
        omega = {(i, j): np.zeros(n + 1, dtype=int) for i in range(1, nd + 1) for j in range(1, na + 1)}
    ambiguous: list[tuple[str, int, int]] = []

    def resolve(name, j, k, truth, amb):
        key = (name, j, k)
        if amb:
            ambiguous.append(key)
            if key in overrides:
                return int(overrides[key])
        return int(truth)

    for j, att in enumerate(instance.attackers, start=1):
        r = j - 1
        p[r, 0], q[r, 0] = att.p, att.q
        modes[r, 0] = (1,) if width == 1 else (1, 0)
        for k in range(n):
            if k == 1:
                modes[r, 1] = modes[r, 0]
            elif k > 1:
                modes[r, k] = next_mode(kind, tuple(modes[r, k - 1]), gamma[r, k - 1],
                                        delta_any[r, k - 1], omega_any[r, k - 1])
            move = modes[r, k, 0] - (modes[r, k, 1] if width == 2 else 0)
            T = grid.steps[k]
            p[r, k + 1] = p[r, k] + att.vp * T * move
            q[r, k + 1] = q[r, k] + att.vq * T * move
            pos = np.array([p[r, k + 1], q[r, k + 1]])
            kk = k + 1
            g, amb = _inside(pos, geo.zone_radius, geo.zone_sides, eps)
            gamma[r, kk] = resolve("gamma", j, kk, g, amb)
            d_amb = w_amb = False
            d_or = w_or = False
            for i in range(1, nd + 1):
                di, a1 = _inside(pos - dpos[i - 1, kk], geo.intercept_radius, geo.intercept_sides, eps)
                delta[(i, j)][kk] = di
                d_or |= di
                d_amb |= a1
                if kind is DrillKind.DRILL2:
                    wi, a2 = _inside(dpos[i - 1, kk] - pos, geo.warning_radius, geo.warning_sides, eps)
                    omega[(i, j)][kk] = wi
                    w_or |= wi
                    w_amb |= a2
            delta_any[r, kk] = resolve("delta", j, kk, d_or, d_amb)
            if kind is DrillKind.DRILL2:
                omega_any[r, kk] = resolve("omega", j, kk, w_or, w_amb)
    return SimTrace(times, p, q, modes, gamma, delta, omega, delta_any, omega_any, dpos, ambiguous)


@dataclass
class Divergence:
    quantity: str
    attacker: int
    step: int
    milp: float
    sim: float


@dataclass
class ValidationReport:
    trace: SimTrace
    divergences: list[Divergence]
    ambiguous: list[tuple[str, int, int]]
    score: int
    milp_score: int

    @property
    def clean(self) -> bool:
        return not self.divergences

    @property
    def first_divergence(self) -> Divergence | None:
        if not self.divergences:
            return None
        return min(self.divergences, key=lambda d: (d.step, d.attacker))

    def summary(self) -> str:
        if self.clean:
            extra = f", {len(self.ambiguous)} boundary-ambiguous" if self.ambiguous else ""
            return f"validation clean (score {self.score}{extra})"
        d = self.first_divergence
        return (f"validation diverged: {d.quantity} of attacker {d.attacker} at step {d.step} "
                f"(milp {d.milp:g}, simulation {d.sim:g})")


def validate(instance: DrillInstance, solution: DrillSolution, pos_tol: float = 1e-6) -> ValidationReport:
    """Replay the solution's controls and compare every indicator and mode.

    Indicators the geometry leaves inside the deadband take the MILP's value
    (and are listed as ambiguous) so later steps are compared on the same
    footing.
    """
    if solution.raw.values is None:
        raise ValueError(f"solution has no values (status {solution.status.value})")
    na = len(instance.attackers)
    overrides = {}
    for j in range(1, na + 1):
        for k in range(1, instance.n_steps + 1):
            overrides[("gamma", j, k)] = solution.gamma[j - 1, k]
            overrides[("delta", j, k)] = solution.delta_any[j - 1, k]
            overrides[("omega", j, k)] = solution.omega_any[j - 1, k]
    trace = simulate(instance, solution.controls, overrides)
    found: list[Divergence] = []
    for r in range(na):
        j = r + 1
        for k in range(instance.n_steps + 1):
            for name, a, b in (("gamma", solution.gamma, trace.gamma),
                               ("delta", solution.delta_any, trace.delta_any),
                               ("omega", solution.omega_any, trace.omega_any)):
                if a[r, k] != b[r, k]:
                    found.append(Divergence(name, j, k, a[r, k], b[r, k]))
            for name, a, b in (("p", solution.p, trace.p), ("q", solution.q, trace.q)):
                if abs(a[r, k] - b[r, k]) > pos_tol:
                    found.append(Divergence(name, j, k, a[r, k], b[r, k]))
            if k < instance.n_steps and not np.array_equal(solution.modes[r, k], trace.modes[r, k]):
                found.append(Divergence("mode", j, k, float(solution.modes[r, k, 0]), float(trace.modes[r, k, 0])))
    return ValidationReport(trace, found, trace.ambiguous, trace.score, int(solution.gamma.sum()))
