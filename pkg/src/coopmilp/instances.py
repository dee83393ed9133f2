"""TOML instance documents for trajectories, drills and benchmark campaigns.

A document has up to six tables: ``[vehicle]``, ``[obstacles]``,
``[drill]``, ``[encoding]``, ``[grids]`` and ``[bench]``. Keys outside
:data:`SCHEMA` are rejected. Any value can be overridden by dotted key,
e.g. ``drill.zone_radius=0.3`` or ``drill.attacker.0.position=[1, 0]``;
array-of-tables entries are addressed by their zero-based position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python 3.10
    import tomli

from .avoidance import DEFAULT_INFLATION, DEFAULT_MAX_ITERATIONS, DEFAULT_SAMPLES, Obstacle
from .bench import GeneratorConfig
from .drills import DEFAULT_EPS, AttackerSpec, DefenderSpec, DrillGeometry, DrillInstance, DrillKind
from .dynamics import TimeGrid, VehicleState
from .trajectory import TrajectoryProblem, uniform_avoid_times


class InstanceError(ValueError):
    """Malformed, incomplete or inconsistent instance document."""


# value kinds
NUM, INT, BOOL, STR = "number", "integer", "boolean", "string"


def VEC(n=None):
    return ("vector", n)


def TABLES(fields):
    return ("tables", fields)


SCHEMA: dict[str, dict[str, Any]] = {
    "vehicle": {
        "start": VEC(4), "finish": VEC(4), "control_sides": INT, "avoid_sides": INT,
    },
    "obstacles": {
        "inflation": NUM, "max_refine": INT, "samples": INT,
        "circle": TABLES({"x": NUM, "y": NUM, "radius": NUM, "sides": INT,
                          "times": VEC(), "path": ("points", None)}),
    },
    "drill": {
        "kind": STR, "zone_radius": NUM, "zone_sides": INT, "intercept_radius": NUM,
        "intercept_sides": INT, "warning_radius": NUM, "warning_sides": INT, "field_radius": NUM,
        "fuel_weight": NUM,
        "defender": TABLES({"state": VEC(4)}),
        "attacker": TABLES({"position": VEC(2), "velocity": VEC(2), "radial_speed": NUM}),
    },
    "encoding": {"big_m": NUM, "eps": NUM},
    "grids": {
        "control_steps": INT, "control_step": NUM, "control_durations": VEC(),
        "attacker_steps": INT, "attacker_step": NUM, "attacker_durations": VEC(),
        "avoid_times": VEC(), "avoid_count": INT,
    },
    "bench": {
        "seed": INT, "n_defenders": INT, "attacker_counts": ("ints", None), "instances": INT,
        "time_limit": NUM, "fuel_weights": VEC(), "workers": INT,
        "field_radius": NUM, "zone_radius": NUM, "attacker_radius": VEC(2), "attacker_speed": VEC(2),
        "defender_radius": VEC(2), "defender_speed": VEC(2), "inbound": BOOL, "intercept_radius": NUM,
        "n_controls": INT, "n_attacker_steps": INT, "n_avoid": INT, "control_sides": INT,
        "zone_sides": INT, "intercept_sides": INT, "avoid_sides": INT, "horizon_slack": NUM,
    },
}


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_value(where: str, kind, value) -> None:
    if kind == NUM:
        ok = _is_num(value) and math.isfinite(value)
    elif kind == INT:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind == BOOL:
        ok = isinstance(value, bool)
    elif kind == STR:
        ok = isinstance(value, str)
    elif kind[0] == "vector":
        ok = isinstance(value, list) and all(_is_num(v) and math.isfinite(v) for v in value)
        if ok and kind[1] is not None and len(value) != kind[1]:
            raise InstanceError(f"{where}: expected {kind[1]} numbers, got {len(value)}")
    elif kind[0] == "ints":
        ok = isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    elif kind[0] == "points":
        ok = isinstance(value, list) and all(
            isinstance(p, list) and len(p) == 2 and all(_is_num(c) for c in p) for p in value)
    elif kind[0] == "tables":
        if not isinstance(value, list) or not all(isinstance(t, dict) for t in value):
            raise InstanceError(f"{where}: expected an array of tables")
        for n, table in enumerate(value):
            for key, v in table.items():
                if key not in kind[1]:
                    raise InstanceError(f"unknown key {where}.{n}.{key}")
                _check_value(f"{where}.{n}.{key}", kind[1][key], v)
        return
    else:  # pragma: no cover
        raise AssertionError(kind)
    if not ok:
        name = kind if isinstance(kind, str) else kind[0]
        raise InstanceError(f"{where}: expected {name}, got {value!r}")


def validate_document(doc: dict) -> dict:
    """Reject unknown tables/keys and ill-typed values; returns ``doc``."""
    for section, body in doc.items():
        if section not in SCHEMA:
            raise InstanceError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise InstanceError(f"[{section}] must be a table")
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise InstanceError(f"unknown key {section}.{key}")
            _check_value(f"{section}.{key}", SCHEMA[section][key], value)
    return doc


def parse_value(text: str):
    """A TOML value literal; bare words fall back to strings."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_overrides(doc: dict, overrides: Sequence[str]) -> dict:
    """Set ``key.path=value`` entries in place, creating tables as needed."""
    for item in overrides:
        if "=" not in item:
            raise InstanceError(f"override {item!r} is not of the form key=value")
        path, text = item.split("=", 1)
        parts = path.strip().split(".")
        if len(parts) < 2 or not all(parts):
            raise InstanceError(f"override key {path!r} needs a section and a key")
        node: Any = doc
        for part in parts[:-1]:
            if isinstance(node, list):
                try:
                    node = node[int(part)]
                except (ValueError, IndexError):
                    raise InstanceError(f"override {path!r}: no entry {part!r}") from None
            else:
                node = node.setdefault(part, {})
        last = parts[-1]
        value = parse_value(text.strip())
        if isinstance(node, list):
            try:
                node[int(last)] = value
            except (ValueError, IndexError):
                raise InstanceError(f"override {path!r}: no entry {last!r}") from None
        elif isinstance(node, dict):
            node[last] = value
        else:
            raise InstanceError(f"override {path!r}: {parts[-2]!r} is not a table")
    return doc


def parse_document(text: str, overrides: Sequence[str] = ()) -> dict:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise InstanceError(f"TOML syntax: {exc}") from None
    return validate_document(apply_overrides(doc, overrides))


def load_document(path, overrides: Sequence[str] = ()) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InstanceError(f"cannot read {path}: {exc.strerror}") from None
    return parse_document(text, overrides)


def _get(doc: dict, key: str, default=None, required: bool = False):
    section, name = key.split(".", 1)
    body = doc.get(section, {})
    if name in body:
        return body[name]
    if required:
        raise InstanceError(f"missing required key {key}")
    return default


def _grid(doc: dict, prefix: str, horizon: float | None = None) -> TimeGrid:
    """From ``<prefix>_durations``, or ``<prefix>_steps`` with ``<prefix>_step``
    (or with the given horizon split evenly)."""
    durations = _get(doc, f"grids.{prefix}_durations")
    steps = _get(doc, f"grids.{prefix}_steps")
    step = _get(doc, f"grids.{prefix}_step")
    try:
        if durations is not None:
            if steps is not None or step is not None:
                raise InstanceError(f"grids.{prefix}_durations excludes {prefix}_steps and {prefix}_step")
            return TimeGrid(tuple(float(d) for d in durations))
        if steps is None:
            raise InstanceError(f"missing required key grids.{prefix}_steps")
        if step is None:
            if horizon is None:
                raise InstanceError(f"missing required key grids.{prefix}_step")
            step = horizon / steps
        return TimeGrid.uniform(steps, float(step))
    except ValueError as exc:
        if isinstance(exc, InstanceError):
            raise
        raise InstanceError(f"grids.{prefix}: {exc}") from None


def _avoid_times(doc: dict, grid: TimeGrid) -> tuple[float, ...]:
    times = _get(doc, "grids.avoid_times")
    count = _get(doc, "grids.avoid_count")
    if times is not None and count is not None:
        raise InstanceError("grids.avoid_times and grids.avoid_count are exclusive")
    if times is not None:
        bad = [t for t in times if not 0.0 <= t <= grid.horizon + 1e-9]
        if bad:
            raise InstanceError(f"grids.avoid_times outside [0, {grid.horizon:g}]: {bad}")
        return tuple(sorted(float(t) for t in times))
    if count is not None:
        if count < 0:
            raise InstanceError("grids.avoid_count must be nonnegative")
        return uniform_avoid_times(grid, count)
    return ()


@dataclass
class TrajectorySetup:
    problem: TrajectoryProblem
    avoid_times: tuple[float, ...]
    inflation: float
    max_refine: int
    samples: int


def _obstacle(n: int, table: dict) -> Obstacle:
    where = f"obstacles.circle.{n}"
    if "radius" not in table:
        raise InstanceError(f"missing required key {where}.radius")
    sides = table.get("sides", 10)
    if "path" in table:
        if "x" in table or "y" in table:
            raise InstanceError(f"{where}: give either x/y or path")
        centers = [tuple(p) for p in table["path"]]
        times = table.get("times")
        if times is None:
            raise InstanceError(f"missing required key {where}.times")
    else:
        if "x" not in table or "y" not in table:
            raise InstanceError(f"missing required key {where}.x / {where}.y")
        if "times" in table:
            raise InstanceError(f"{where}.times needs a path")
        centers, times = [(table["x"], table["y"])], [0.0]
    try:
        return Obstacle(float(table["radius"]), tuple(centers), tuple(times), int(sides))
    except ValueError as exc:
        raise InstanceError(f"{where}: {exc}") from None


def trajectory_setup(doc: dict) -> TrajectorySetup:
    start = VehicleState.from_array(_get(doc, "vehicle.start", required=True))
    finish = _get(doc, "vehicle.finish")
    grid = _grid(doc, "control")
    obstacles = [_obstacle(n, t) for n, t in enumerate(_get(doc, "obstacles.circle", []))]
    times = _avoid_times(doc, grid)
    if obstacles and not times:
        raise InstanceError("obstacles need grids.avoid_times or grids.avoid_count")
    sides = _get(doc, "vehicle.control_sides", 20)
    if sides < 3:
        raise InstanceError("vehicle.control_sides must be at least 3")
    problem = TrajectoryProblem(
        start, None if finish is None else VehicleState.from_array(finish), grid, sides, obstacles,
        big_m=_get(doc, "encoding.big_m"),
    )
    inflation = _get(doc, "obstacles.inflation", DEFAULT_INFLATION)
    max_refine = _get(doc, "obstacles.max_refine", DEFAULT_MAX_ITERATIONS)
    samples = _get(doc, "obstacles.samples", DEFAULT_SAMPLES)
    if inflation < 0 or max_refine < 0 or samples < 2:
        raise InstanceError("need inflation >= 0, max_refine >= 0 and samples >= 2")
    return TrajectorySetup(problem, times, float(inflation), int(max_refine), int(samples))


def _attacker(n: int, table: dict) -> AttackerSpec:
    where = f"drill.attacker.{n}"
    if "position" not in table:
        raise InstanceError(f"missing required key {where}.position")
    p, q = (float(v) for v in table["position"])
    if ("velocity" in table) == ("radial_speed" in table):
        raise InstanceError(f"{where}: give exactly one of velocity and radial_speed")
    if "velocity" in table:
        vp, vq = (float(v) for v in table["velocity"])
    else:
        # v_a times the outward unit vector; negative speeds head inward
        r = math.hypot(p, q)
        if r == 0:
            raise InstanceError(f"{where}: radial_speed needs a position away from the center")
        va = float(table["radial_speed"])
        vp, vq = va * p / r, va * q / r
    try:
        return AttackerSpec(p, q, vp, vq)
    except ValueError as exc:
        raise InstanceError(f"{where}: {exc}") from None


def drill_instance(doc: dict) -> DrillInstance:
    kind_name = _get(doc, "drill.kind", required=True)
    try:
        kind = DrillKind(kind_name)
    except ValueError:
        raise InstanceError(f"drill.kind must be 'drill1' or 'drill2', got {kind_name!r}") from None
    attackers = [_attacker(n, t) for n, t in enumerate(_get(doc, "drill.attacker", []))]
    defenders = []
    for n, t in enumerate(_get(doc, "drill.defender", [])):
        if "state" not in t:
            raise InstanceError(f"missing required key drill.defender.{n}.state")
        defenders.append(DefenderSpec(VehicleState.from_array(t["state"])))
    try:
        geometry = DrillGeometry(
            _get(doc, "drill.zone_radius", required=True),
            _get(doc, "drill.zone_sides", 8),
            _get(doc, "drill.intercept_radius", required=True),
            _get(doc, "drill.intercept_sides", 8),
            _get(doc, "drill.warning_radius"),
            _get(doc, "drill.warning_sides", 8),
            _get(doc, "drill.field_radius"),
        )
        control = _grid(doc, "control")
        attack = _grid(doc, "attacker", horizon=control.horizon)
        return DrillInstance(
            kind, defenders, attackers, geometry, control, attack,
            avoid_times=_avoid_times(doc, control),
            control_sides=_get(doc, "vehicle.control_sides", 8),
            avoid_sides=_get(doc, "vehicle.avoid_sides", 8),
            big_m=_get(doc, "encoding.big_m"),
            indicator_eps=_get(doc, "encoding.eps", DEFAULT_EPS),
            fuel_weight=_get(doc, "drill.fuel_weight", 0.0),
        )
    except InstanceError:
        raise
    except ValueError as exc:
        raise InstanceError(str(exc)) from None


@dataclass
class BenchSetup:
    config: GeneratorConfig
    attacker_counts: tuple[int, ...]
    instances: int
    time_limit: float | None
    fuel_weights: tuple[float, ...]
    workers: int


_CAMPAIGN_KEYS = {"attacker_counts", "instances", "time_limit", "fuel_weights", "workers"}


def bench_setup(doc: dict) -> BenchSetup:
    body = dict(doc.get("bench", {}))
    if not body:
        raise InstanceError("missing [bench] table")
    counts = tuple(body.get("attacker_counts", [1, 2, 3]))
    instances = body.get("instances", 20)
    workers = body.get("workers", 1)
    if not counts or min(counts) < 1 or instances < 1 or workers < 1:
        raise InstanceError("bench needs positive attacker_counts, instances and workers")
    weights = tuple(float(w) for w in body.get("fuel_weights", [0.0]))
    if not weights or min(weights) < 0:
        raise InstanceError("bench.fuel_weights must be nonempty and nonnegative")
    gen = {k: v for k, v in body.items() if k not in _CAMPAIGN_KEYS}
    for k in ("attacker_radius", "attacker_speed", "defender_radius", "defender_speed"):
        if k in gen:
            gen[k] = tuple(float(v) for v in gen[k])
    try:
        config = GeneratorConfig(**gen)
    except ValueError as exc:
        raise InstanceError(f"bench: {exc}") from None
    return BenchSetup(config, counts, int(instances), body.get("time_limit", 60.0), weights, int(workers))
