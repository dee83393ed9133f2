"""``coopmilp`` command line: trajectories, drills, campaigns and MPS export.

Artifacts go to ``--out``, else ``$COOPMILP_OUTPUT_DIR``, else ``./out``,
named after the instance file's stem. Failures print one JSON line on
stderr and exit with one of the ``EXIT_*`` codes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .avoidance import min_clearance
from .bench import run_campaign
from .drills import DrillBuildError, DrillKind, build_drill_milp, duration_check, solve_drill
from .instances import InstanceError, bench_setup, drill_instance, load_document, trajectory_setup
from .milp import Status, export_mps
from .plotting import drill_svg, trajectory_svg
from .sim import mode_label, validate

OUTPUT_ENV = "COOPMILP_OUTPUT_DIR"

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_TIME_LIMIT = 4
EXIT_DIVERGENCE = 5
EXIT_DURATION = 6
EXIT_SOLVER = 7
EXIT_COLLISION = 8

_STATUS_EXIT = {
    Status.INFEASIBLE: EXIT_INFEASIBLE,
    Status.TIME_LIMIT: EXIT_TIME_LIMIT,
    Status.UNBOUNDED: EXIT_SOLVER,
    Status.ERROR: EXIT_SOLVER,
}


class Failure(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        super().__init__(message)
        self.code, self.kind, self.extra = code, kind, extra


def fail(code: int, kind: str, message: str, **extra):
    raise Failure(code, kind, message, **extra)


def _out_dir(out) -> Path:
    path = Path(out or os.environ.get(OUTPUT_ENV) or "out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _load(file, overrides):
    try:
        return load_document(file, overrides)
    except InstanceError as exc:
        fail(EXIT_PARSE, "parse", str(exc), file=str(file))


def run_guarded(fn, *args, **kwargs) -> int:
    """Call ``fn``; turn :class:`Failure` into the error line and exit code."""
    try:
        fn(*args, **kwargs)
    except Failure as f:
        click.echo(json.dumps({"error": f.kind, "message": str(f), **f.extra}, sort_keys=True), err=True)
        return f.code
    return EXIT_OK


common_set = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                          help="Override a document value by dotted key (repeatable).")
common_out = click.option("--out", type=click.Path(file_okay=False), default=None,
                          help=f"Output directory (default ${OUTPUT_ENV} or ./out).")
common_limit = click.option("--time-limit", type=float, default=None, help="Solver wall-clock limit in seconds.")
common_gap = click.option("--gap", type=float, default=1e-6, show_default=True, help="Relative optimality gap.")


@click.group()
@click.option("-v", "--verbose", count=True, help="Log solver progress (-vv for debug).")
def main(verbose):
    """Optimal trajectories and RoboFlag drills as mixed integer linear programs."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _trajectory_csv(path: Path, states, controls, grid) -> None:
    nodes = grid.nodes
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "x", "y", "vx", "vy", "u_x", "u_y"))
        for k, s in enumerate(states):
            u = [repr(float(v)) for v in controls[k]] if k < len(controls) else ["", ""]
            w.writerow([repr(float(nodes[k])), *(repr(float(v)) for v in s.as_array()), *u])


def traj(file, out, time_limit, gap, samples, max_refine, export_mps_flag, overrides):
    doc = _load(file, overrides)
    try:
        setup = trajectory_setup(doc)
    except InstanceError as exc:
        fail(EXIT_PARSE, "parse", str(exc), file=str(file))
    if samples is not None:
        setup.samples = samples
    if max_refine is not None:
        setup.max_refine = max_refine
    problem = setup.problem
    problem.time_limit, problem.gap = time_limit, gap
    t0 = time.perf_counter()
    iterations, added, certified, clearance = 0, (), True, None
    if problem.obstacles:
        result = problem.solve_with_refinement(setup.avoid_times, setup.max_refine, setup.inflation, setup.samples)
        sol = result.solution
        iterations = result.iterations
        added = tuple(t for step in result.log for t in step.added)
        certified = result.collision_free
    else:
        sol = problem.solve(setup.avoid_times)
    wall = time.perf_counter() - t0
    stem = Path(file).stem
    dest = _out_dir(out)
    if export_mps_flag:
        (dest / f"{stem}.mps").write_text(export_mps(sol.model))
    if sol.status is not Status.OPTIMAL and not (sol.status is Status.TIME_LIMIT and sol.states):
        fail(_STATUS_EXIT[sol.status], sol.status.value, f"trajectory solve ended with status {sol.status.value}",
             file=str(file), iterations=iterations)
    if problem.obstacles:
        clearance = min_clearance(problem.start, sol.controls, problem.grid, problem.obstacles, setup.samples)
    _trajectory_csv(dest / f"{stem}_solution.csv", sol.states, sol.controls, problem.grid)
    (dest / f"{stem}_path.svg").write_text(
        trajectory_svg(problem.start, sol.controls, problem.grid, problem.obstacles, sol.avoid_times, added))
    summary = {
        "status": sol.status.value,
        "objective": _num(sol.objective),
        "iterations": iterations,
        "collision_free": certified,
        "min_clearance": _num(clearance),
        "avoid_times": list(sol.avoid_times),
        "added_times": list(added),
        "final_state": [float(v) for v in sol.final_state.as_array()],
        "nodes": sol.raw.stats.nodes,
        "wall_time": wall,
    }
    _write_json(dest / f"{stem}_summary.json", summary)
    click.echo(f"{stem}: {sol.status.value} objective {sol.objective:.9g}, "
               f"{iterations} refinement iteration(s), {wall:.2f}s -> {dest}")
    if sol.status is Status.TIME_LIMIT:
        fail(EXIT_TIME_LIMIT, "time_limit", "time limit reached before optimality", file=str(file))
    if not certified:
        fail(EXIT_COLLISION, "collision", f"no collision-free trajectory after {iterations} refinement(s)",
             file=str(file), min_clearance=_num(clearance))


def _drill_artifacts(dest: Path, stem: str, inst, sol, report) -> None:
    trace = report.trace
    nodes = inst.control_grid.nodes
    for i, (states, u) in enumerate(zip(sol.defender_states, sol.controls), start=1):
        with (dest / f"{stem}_defender{i}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("t", "x", "y", "vx", "vy", "u_x", "u_y"))
            for k, s in enumerate(states):
                uk = [repr(float(v)) for v in u[k]] if k < len(u) else ["", ""]
                w.writerow([repr(float(nodes[k])), *(repr(float(v)) for v in s.as_array()), *uk])
    times = inst.attacker_grid.nodes
    n = inst.n_steps
    for j in range(1, len(inst.attackers) + 1):
        with (dest / f"{stem}_attacker{j}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("k", "t", "p", "q", "mode"))
            for k in range(n + 1):
                mode = mode_label(sol.modes[j - 1, k]) if k < n else ""
                w.writerow([k, repr(float(times[k])), repr(float(sol.p[j - 1, k])), repr(float(sol.q[j - 1, k])), mode])
    nd = len(inst.defenders)
    drill2 = inst.kind is DrillKind.DRILL2
    with (dest / f"{stem}_indicators.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["k", "t", "attacker", "gamma", "delta", "omega"]
        head += [f"delta_d{i}" for i in range(1, nd + 1)]
        if drill2:
            head += [f"omega_d{i}" for i in range(1, nd + 1)]
        w.writerow(head)
        for j in range(1, len(inst.attackers) + 1):
            for k in range(1, n + 1):
                row = [k, repr(float(times[k])), j, int(sol.gamma[j - 1, k]), int(sol.delta_any[j - 1, k]),
                       int(sol.omega_any[j - 1, k])]
                row += [int(sol.delta[(i, j)][k]) for i in range(1, nd + 1)]
                if drill2:
                    row += [int(sol.omega[(i, j)][k]) if (i, j) in sol.omega else 0 for i in range(1, nd + 1)]
                w.writerow(row)
    with (dest / f"{stem}_trace.csv").open("w", newline="") as fh:
        trace.write_csv(fh)
    if drill2:
        with (dest / f"{stem}_distance.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "t", *(f"a{j}_distance" for j in range(1, len(inst.attackers) + 1))])
            dist = np.hypot(sol.p, sol.q)
            for k in range(n + 1):
                w.writerow([k, repr(float(times[k])), *(repr(float(d)) for d in dist[:, k])])
    (dest / f"{stem}_field.svg").write_text(drill_svg(inst, sol.controls, trace))


def drill(file, out, time_limit, gap, force, export_mps_flag, overrides):
    doc = _load(file, overrides)
    try:
        inst = drill_instance(doc)
    except InstanceError as exc:
        fail(EXIT_PARSE, "parse", str(exc), file=str(file))
    check = duration_check(inst)
    if not check.ok and not force:
        fail(EXIT_DURATION, "duration", f"attacker horizon {inst.attacker_grid.horizon:g} is shorter than "
             f"attacker {check.binding + 1}'s time to the zone center {check.bounds[check.binding]:g}",
             file=str(file), margin=check.margin)
    stem = Path(file).stem
    dest = _out_dir(out)
    t0 = time.perf_counter()
    try:
        sol = solve_drill(inst, time_limit=time_limit, gap=gap, force=force)
    except DrillBuildError as exc:
        fail(EXIT_PARSE, "build", str(exc), file=str(file))
    wall = time.perf_counter() - t0
    if export_mps_flag:
        (dest / f"{stem}.mps").write_text(export_mps(sol.built.model))
    if sol.raw.values is None:
        fail(_STATUS_EXIT.get(sol.status, EXIT_SOLVER), sol.status.value,
             f"drill solve ended with status {sol.status.value} and no solution", file=str(file))
    report = validate(inst, sol)
    _drill_artifacts(dest, stem, inst, sol, report)
    summary = {
        "kind": inst.kind.value,
        "status": sol.status.value,
        "objective": _num(sol.objective),
        "bound": _num(sol.bound),
        "zone_entries": sol.zone_entries,
        "fuel": sol.fuel,
        "nodes": sol.stats.nodes,
        "binaries": len(sol.built.model.binary_ids),
        "validation": "clean" if report.clean else "diverged",
        "divergences": len(report.divergences),
        "ambiguous": len(report.ambiguous),
        "duration_margin": check.margin,
        "wall_time": wall,
    }
    _write_json(dest / f"{stem}_summary.json", summary)
    click.echo(f"{stem}: {sol.status.value} objective {sol.objective:.9g}, zone entries {sol.zone_entries}, "
               f"{report.summary()}, {wall:.2f}s -> {dest}")
    if not report.clean:
        d = report.first_divergence
        fail(EXIT_DIVERGENCE, "divergence", report.summary(), file=str(file), quantity=d.quantity,
             attacker=d.attacker, step=d.step, milp=float(d.milp), sim=float(d.sim))
    if sol.status is Status.TIME_LIMIT:
        fail(EXIT_TIME_LIMIT, "time_limit", "time limit reached before optimality; incumbent written",
             file=str(file), objective=_num(sol.objective), bound=_num(sol.bound))


def bench(file, out, seed, time_limit, instances, workers, overrides):
    doc = _load(file, overrides)
    try:
        setup = bench_setup(doc)
    except InstanceError as exc:
        fail(EXIT_PARSE, "parse", str(exc), file=str(file))
    config = setup.config
    if seed is not None:
        config = replace(config, seed=seed)
    t0 = time.perf_counter()
    result = run_campaign(config, setup.attacker_counts, instances or setup.instances,
                          time_limit=time_limit if time_limit is not None else setup.time_limit,
                          fuel_weights=setup.fuel_weights, workers=workers or setup.workers)
    wall = time.perf_counter() - t0
    stem = Path(file).stem
    dest = _out_dir(out)
    for name, writer in (("instances", result.write_instances), ("quantiles", result.write_quantiles),
                         ("summary", result.write_summary), ("cdf", result.write_cdf)):
        with (dest / f"{stem}_{name}.csv").open("w", newline="") as fh:
            writer(fh)
    for (series, nd, na), cdf in sorted(result.cdfs.items()):
        click.echo(f"{series} N_D={nd} N_A={na}: solved {len(cdf.times)}/{cdf.total}, "
                   f"median {cdf.quantile(0.5):.4g}s")
    for series, fit in sorted(result.fits.items()):
        if fit is not None:
            click.echo(f"{series}: t50 ~ {fit.c:.4g} exp({fit.alpha:.4g} N_A)")
    click.echo(f"{len(result.records)} instance(s) in {wall:.1f}s -> {dest}")


def export(file, out, overrides):
    doc = _load(file, overrides)
    stem = Path(file).stem
    try:
        if "drill" in doc:
            model = build_drill_milp(drill_instance(doc), force=True).model
        else:
            setup = trajectory_setup(doc)
            model, _ = setup.problem.build(setup.avoid_times, setup.inflation if setup.problem.obstacles else 0.0)
    except (InstanceError, DrillBuildError) as exc:
        fail(EXIT_PARSE, "parse", str(exc), file=str(file))
    path = _out_dir(out) / f"{stem}.mps"
    path.write_text(export_mps(model))
    click.echo(f"{model.name}: {len(model.variables)} variables, {len(model.constraints)} rows -> {path}")


@main.command("traj")
@click.argument("file", type=click.Path(dir_okay=False))
@common_out
@common_limit
@common_gap
@click.option("--samples", type=int, default=None, help="Dense collision-check samples.")
@click.option("--max-refine", type=int, default=None, help="Cap on refinement iterations.")
@click.option("--export-mps", "export_mps_flag", is_flag=True, help="Also write the final model as MPS.")
@common_set
def traj_cmd(**kw):
    """Minimum-effort trajectory, refined around obstacles if any."""
    sys.exit(run_guarded(traj, **kw))


@main.command("drill")
@click.argument("file", type=click.Path(dir_okay=False))
@common_out
@common_limit
@common_gap
@click.option("--force", is_flag=True, help="Solve even if the attacker horizon is too short.")
@click.option("--export-mps", "export_mps_flag", is_flag=True, help="Also write the drill model as MPS.")
@common_set
def drill_cmd(**kw):
    """Solve a drill, validate it by simulation and write its artifacts."""
    sys.exit(run_guarded(drill, **kw))


@main.command("bench")
@click.argument("file", type=click.Path(dir_okay=False))
@common_out
@click.option("--seed", type=int, default=None, help="Override the campaign seed.")
@common_limit
@click.option("--instances", type=int, default=None, help="Instances per cell.")
@click.option("--workers", type=int, default=None, help="Parallel solver processes.")
@common_set
def bench_cmd(**kw):
    """Randomized campaign: solve times per attacker count and fitted growth."""
    sys.exit(run_guarded(bench, **kw))


@main.command("export")
@click.argument("file", type=click.Path(dir_okay=False))
@common_out
@common_set
def export_cmd(**kw):
    """Write the instance's model as MPS without solving."""
    sys.exit(run_guarded(export, **kw))


if __name__ == "__main__":  # pragma: no cover
    main()
