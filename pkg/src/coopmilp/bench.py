"""Random Drill 1 instances and solve-time campaigns.

Draws come from a counter-based stream: each value is a pure function of
``(seed, instance index, field name)``, computed with the splitmix64 mixer
below, so adding a new field never shifts the values of existing ones.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence, TextIO

import numpy as np

from .drills import AttackerSpec, DefenderSpec, DrillGeometry, DrillInstance, DrillKind, duration_bound, solve_drill
from .dynamics import TimeGrid, VehicleState

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 output for state ``x`` (the state is advanced first)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def stream_uniform(seed: int, index: int, name: str) -> float:
    """Uniform draw in ``[0, 1)`` keyed by ``(seed, index, name)``; 53 random bits."""
    x = splitmix64((seed & MASK64) ^ fnv1a64(name))
    x = splitmix64(x ^ (index & MASK64))
    return (x >> 11) * (1.0 / (1 << 53))


def _interval(name: str, value) -> tuple[float, float]:
    lo, hi = (float(v) for v in value)
    if not lo <= hi:
        raise ValueError(f"{name}: lower end {lo} exceeds upper end {hi}")
    return lo, hi


@dataclass(frozen=True)
class GeneratorConfig:
    """Instance distribution plus the grids each instance is solved on.

    ``attacker_radius`` and ``defender_radius`` default to
    ``[R_f/2, R_f]`` and ``[sqrt(2) R_dz, 2 sqrt(2) R_dz]``. With
    ``inbound`` the attacker heads for the zone center; otherwise the
    velocity is ``v_a`` times the outward unit vector.
    """

    seed: int = 0
    n_defenders: int = 1
    n_attackers: int = 1
    field_radius: float = 15.0
    zone_radius: float = 2.0
    attacker_radius: tuple[float, float] | None = None
    attacker_speed: tuple[float, float] = (1.0, 1.0)
    defender_radius: tuple[float, float] | None = None
    defender_speed: tuple[float, float] = (0.5, 1.0)
    inbound: bool = True
    intercept_radius: float = 1.0
    n_controls: int = 4
    n_attacker_steps: int = 5
    n_avoid: int = 2
    control_sides: int = 4
    zone_sides: int = 4
    intercept_sides: int = 4
    avoid_sides: int = 4
    fuel_weight: float = 0.0
    horizon_slack: float = 0.1

    def __post_init__(self):
        if self.attacker_radius is None:
            object.__setattr__(self, "attacker_radius", (self.field_radius / 2, self.field_radius))
        if self.defender_radius is None:
            r = math.sqrt(2.0) * self.zone_radius
            object.__setattr__(self, "defender_radius", (r, 2.0 * r))
        for name in ("attacker_radius", "attacker_speed", "defender_radius", "defender_speed"):
            object.__setattr__(self, name, _interval(name, getattr(self, name)))
        if self.n_defenders < 0 or self.n_attackers < 1:
            raise ValueError("need at least one attacker and a nonnegative defender count")
        if min(self.n_controls, self.n_attacker_steps) < 1 or self.n_avoid < 0:
            raise ValueError("grid sizes must be positive")
        if self.attacker_radius[0] <= 0 or self.attacker_speed[0] == 0 and self.attacker_speed[1] == 0:
            raise ValueError("attackers need a positive start radius and a nonzero speed")
        if self.fuel_weight < 0 or self.horizon_slack < 0:
            raise ValueError("fuel_weight and horizon_slack must be nonnegative")


def attacker_from_polar(radius: float, theta: float, speed: float, inbound: bool = True) -> AttackerSpec:
    p, q = radius * math.cos(theta), radius * math.sin(theta)
    norm = math.hypot(p, q)
    sign = -1.0 if inbound else 1.0
    return AttackerSpec(p, q, sign * speed * p / norm, sign * speed * q / norm)


def defender_from_polar(radius: float, theta: float, speed: float, heading: float) -> DefenderSpec:
    return DefenderSpec(VehicleState(radius * math.cos(theta), radius * math.sin(theta),
                                     speed * math.cos(heading), speed * math.sin(heading)))


def random_instance(config: GeneratorConfig, index: int) -> DrillInstance:
    """Instance ``index`` of the stream; identical for identical ``(config, index)``."""
    def draw(name, lo, hi):
        return lo + (hi - lo) * stream_uniform(config.seed, index, name)

    two_pi = 2.0 * math.pi
    attackers = []
    for j in range(1, config.n_attackers + 1):
        r = draw(f"attacker{j}.radius", *config.attacker_radius)
        th = draw(f"attacker{j}.theta", 0.0, two_pi)
        v = draw(f"attacker{j}.speed", *config.attacker_speed)
        attackers.append(attacker_from_polar(r, th, v, config.inbound))
    defenders = []
    for i in range(1, config.n_defenders + 1):
        r = draw(f"defender{i}.radius", *config.defender_radius)
        th = draw(f"defender{i}.theta", 0.0, two_pi)
        v = draw(f"defender{i}.speed", *config.defender_speed)
        hv = draw(f"defender{i}.heading", 0.0, two_pi)
        defenders.append(defender_from_polar(r, th, v, hv))
    horizon = (1.0 + config.horizon_slack) * max(duration_bound(a) for a in attackers)
    geometry = DrillGeometry(config.zone_radius, config.zone_sides, config.intercept_radius,
                             config.intercept_sides, field_radius=config.field_radius)
    avoid = tuple(horizon * (k + 1) / config.n_avoid for k in range(config.n_avoid))
    return DrillInstance(
        DrillKind.DRILL1, defenders, attackers, geometry,
        TimeGrid.uniform(config.n_controls, horizon / config.n_controls),
        TimeGrid.uniform(config.n_attacker_steps, horizon / config.n_attacker_steps),
        avoid_times=avoid, control_sides=config.control_sides, avoid_sides=config.avoid_sides,
        fuel_weight=config.fuel_weight,
    )


@dataclass
class InstanceRecord:
    series: str
    fuel_weight: float
    n_defenders: int
    n_attackers: int
    index: int
    status: str
    objective: float
    zone_entries: int | None
    nodes: int
    wall_time: float
    error: str = ""

    @property
    def solved(self) -> bool:
        return self.status == "optimal"


INSTANCE_COLUMNS = ("series", "fuel_weight", "n_defenders", "n_attackers", "index", "status",
                    "objective", "zone_entries", "nodes", "wall_time", "error")
TIME_COLUMNS = ("wall_time",)


@dataclass
class Cdf:
    """Fraction of a cell's instances solved by each time; a right-continuous step function."""

    times: np.ndarray
    fractions: np.ndarray
    total: int

    def __call__(self, t: float) -> float:
        k = int(np.searchsorted(self.times, t, side="right"))
        return float(self.fractions[k - 1]) if k else 0.0

    def quantile(self, level: float) -> float:
        """Earliest time by which ``level`` of the instances are solved (inf if never)."""
        hit = np.nonzero(self.fractions >= level - 1e-12)[0]
        return float(self.times[hit[0]]) if len(hit) else math.inf


def empirical_cdf(records: Sequence[InstanceRecord]) -> Cdf:
    times = np.sort([r.wall_time for r in records if r.solved])
    total = len(records)
    fractions = np.arange(1, len(times) + 1) / total if total else np.zeros(0)
    return Cdf(times, fractions, total)


@dataclass
class ExpFit:
    c: float
    alpha: float
    residuals: np.ndarray

    def __call__(self, n):
        return self.c * np.exp(self.alpha * np.asarray(n, dtype=float))


def fit_exponential(points: Sequence[tuple[float, float]]) -> ExpFit:
    """Least-squares fit of ``log t = log c + alpha n``; residuals are in log space."""
    if len(points) < 2:
        raise ValueError("an exponential fit needs at least two points")
    n = np.array([p[0] for p in points], dtype=float)
    t = np.array([p[1] for p in points], dtype=float)
    if np.any(~(t > 0)) or np.any(~np.isfinite(t)):
        raise ValueError("quantile times must be positive and finite")
    if len(set(n)) < 2:
        raise ValueError("an exponential fit needs two distinct attacker counts")
    alpha, logc = np.polyfit(n, np.log(t), 1)
    residuals = np.log(t) - (logc + alpha * n)
    return ExpFit(float(math.exp(logc)), float(alpha), residuals)


@dataclass
class CampaignResult:
    records: list[InstanceRecord]
    cdfs: dict[tuple[str, int, int], Cdf] = field(default_factory=dict)
    fits: dict[str, ExpFit | None] = field(default_factory=dict)

    def median(self, series: str, n_defenders: int, n_attackers: int) -> float:
        return self.cdfs[(series, n_defenders, n_attackers)].quantile(0.5)

    def write_instances(self, out: TextIO) -> None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(INSTANCE_COLUMNS)
        for r in self.records:
            w.writerow([r.series, repr(r.fuel_weight), r.n_defenders, r.n_attackers, r.index, r.status,
                        repr(r.objective), "" if r.zone_entries is None else r.zone_entries, r.nodes,
                        repr(r.wall_time), r.error])

    def write_quantiles(self, out: TextIO) -> None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("series", "n_defenders", "n_attackers", "total", "solved", "t25", "t50", "t75"))
        for (series, nd, na), cdf in sorted(self.cdfs.items()):
            solved = len(cdf.times)
            w.writerow([series, nd, na, cdf.total, solved,
                        *(repr(cdf.quantile(q)) for q in (0.25, 0.5, 0.75))])

    def write_summary(self, out: TextIO) -> None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("series", "c", "alpha", "residuals"))
        for series, fit in sorted(self.fits.items()):
            if fit is None:
                w.writerow([series, "", "", ""])
            else:
                w.writerow([series, repr(fit.c), repr(fit.alpha), " ".join(repr(float(x)) for x in fit.residuals)])

    def write_cdf(self, out: TextIO) -> None:
        """Long-format step points of every cell's curve."""
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("series", "n_defenders", "n_attackers", "time", "fraction_solved"))
        for (series, nd, na), cdf in sorted(self.cdfs.items()):
            for t, f in zip(cdf.times, cdf.fractions):
                w.writerow([series, nd, na, repr(float(t)), repr(float(f))])


def series_label(fuel_weight: float) -> str:
    return f"fuel_weight={fuel_weight:g}"


def _solve_one(args) -> InstanceRecord:
    config, index, time_limit = args
    label = series_label(config.fuel_weight)
    try:
        inst = random_instance(config, index)
        t0 = time.perf_counter()
        sol = solve_drill(inst, time_limit=time_limit)
        wall = time.perf_counter() - t0
        return InstanceRecord(label, config.fuel_weight, config.n_defenders, config.n_attackers, index,
                              sol.status.value, sol.objective, sol.zone_entries, sol.stats.nodes, wall)
    except Exception as exc:  # recorded, never fatal for the campaign
        return InstanceRecord(label, config.fuel_weight, config.n_defenders, config.n_attackers, index,
                              "error", math.nan, None, 0, math.nan, f"{type(exc).__name__}: {exc}")


def run_campaign(base: GeneratorConfig, attacker_counts: Sequence[int], instances: int,
                 time_limit: float | None = 60.0, fuel_weights: Sequence[float] | None = None,
                 workers: int = 1) -> CampaignResult:
    """Solve ``instances`` random instances for every attacker count and fuel weight.

    Instance ``i`` of every cell uses stream index ``i``. Results are
    gathered by position, so the outcome does not depend on ``workers``.
    """
    weights = list(fuel_weights) if fuel_weights is not None else [base.fuel_weight]
    jobs = []
    for fw in weights:
        for na in attacker_counts:
            cfg = replace(base, n_attackers=int(na), fuel_weight=float(fw))
            jobs += [(cfg, i, time_limit) for i in range(instances)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_solve_one, jobs))
    else:
        records = [_solve_one(job) for job in jobs]
    result = CampaignResult(records)
    cells: dict[tuple[str, int, int], list[InstanceRecord]] = {}
    for r in records:
        cells.setdefault((r.series, r.n_defenders, r.n_attackers), []).append(r)
    result.cdfs = {key: empirical_cdf(rs) for key, rs in cells.items()}
    for fw in weights:
        label = series_label(fw)
        pts = [(na, result.median(label, base.n_defenders, na)) for na in attacker_counts]
        pts = [p for p in pts if math.isfinite(p[1]) and p[1] > 0]
        try:
            result.fits[label] = fit_exponential(pts)
        except ValueError:
            result.fits[label] = None
    return result
