import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

import coopmilp
from coopmilp.cli import EXIT_DURATION, EXIT_INFEASIBLE, EXIT_PARSE, OUTPUT_ENV, main

DATA = Path(coopmilp.__file__).parent / "data"


def _run(*args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env, catch_exceptions=False)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _error(result):
    line = [ln for ln in result.stderr.splitlines() if ln.startswith("{")][-1]
    return json.loads(line)


def test_traj_fig1_endpoint(tmp_path):
    res = _run("traj", DATA / "fig1.toml", "--out", tmp_path)
    assert res.exit_code == 0, res.output
    rows = _rows(tmp_path / "fig1_solution.csv")
    assert rows[0] == ["t", "x", "y", "vx", "vy", "u_x", "u_y"]
    assert len(rows) == 12
    last = [float(v) for v in rows[-1][1:5]]
    assert last == pytest.approx([0.4, 0.3, 0.0, 0.0], abs=1e-6)
    assert rows[-1][5:] == ["", ""]
    summary = json.loads((tmp_path / "fig1_summary.json").read_text())
    assert summary["status"] == "optimal" and summary["iterations"] == 0
    assert (tmp_path / "fig1_path.svg").read_text().startswith("<svg")


def test_traj_output_dir_from_environment(tmp_path):
    res = _run("traj", DATA / "fig1.toml", env={OUTPUT_ENV: str(tmp_path / "envdir")})
    assert res.exit_code == 0
    assert (tmp_path / "envdir" / "fig1_solution.csv").exists()


def test_traj_fig2_refinement(tmp_path):
    res = _run("traj", DATA / "fig2.toml", "--out", tmp_path)
    assert res.exit_code == 0, res.output
    summary = json.loads((tmp_path / "fig2_summary.json").read_text())
    assert 1 <= summary["iterations"] <= 2
    assert summary["collision_free"] is True
    assert summary["min_clearance"] >= -1e-6
    assert summary["added_times"]


def test_malformed_key_is_parse_error(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text((DATA / "fig1.toml").read_text().replace("finish", "finsh"))
    res = _run("traj", bad, "--out", tmp_path)
    assert res.exit_code == EXIT_PARSE
    assert _error(res)["error"] == "parse"
    res = _run("traj", DATA / "fig1.toml", "--out", tmp_path, "--set", "vehicle.colour=1")
    assert res.exit_code == EXIT_PARSE


def test_infeasible_has_its_own_code(tmp_path):
    # one 0.3 s step cannot carry the vehicle to the goal
    res = _run("traj", DATA / "fig1.toml", "--out", tmp_path, "--set", "grids.control_steps=1")
    assert res.exit_code == EXIT_INFEASIBLE != EXIT_PARSE
    assert _error(res)["error"] == "infeasible"


def test_drill1_outputs(tmp_path):
    res = _run("drill", DATA / "drill1_intercept.toml", "--out", tmp_path, "--export-mps")
    assert res.exit_code == 0, res.output
    summary = json.loads((tmp_path / "drill1_intercept_summary.json").read_text())
    assert summary["zone_entries"] == 0
    assert summary["validation"] == "clean"
    for name in ("defender1", "attacker1", "indicators", "trace"):
        assert _rows(tmp_path / f"drill1_intercept_{name}.csv")[0]
    assert _rows(tmp_path / "drill1_intercept_attacker1.csv")[0] == ["k", "t", "p", "q", "mode"]
    assert (tmp_path / "drill1_intercept.mps").read_text().startswith("NAME")
    assert not (tmp_path / "drill1_intercept_distance.csv").exists()


def test_drill2_distance_csv(tmp_path):
    res = _run("drill", DATA / "fig5_drill2.toml", "--out", tmp_path)
    assert res.exit_code == 0, res.output
    rows = _rows(tmp_path / "fig5_drill2_distance.csv")
    assert rows[0] == ["k", "t", "a1_distance"]
    assert len(rows) == 12
    assert float(rows[1][2]) == pytest.approx((1.15 ** 2 + 0.4 ** 2) ** 0.5)


def test_drill_duration_failure(tmp_path):
    res = _run("drill", DATA / "drill1_intercept.toml", "--out", tmp_path, "--set", "grids.attacker_step=0.1")
    assert res.exit_code == EXIT_DURATION
    assert _error(res)["error"] == "duration"


def test_export_command(tmp_path):
    res = _run("export", DATA / "fig1.toml", "--out", tmp_path)
    assert res.exit_code == 0
    text = (tmp_path / "fig1.mps").read_text()
    assert text.startswith("NAME") and text.rstrip().endswith("ENDATA")


def test_bench_small(tmp_path):
    res = _run("bench", DATA / "bench_small.toml", "--out", tmp_path)
    assert res.exit_code == 0, res.output
    rows = _rows(tmp_path / "bench_small_instances.csv")
    assert len(rows) == 6
    assert {r[5] for r in rows[1:]} == {"optimal"}
    cdf = _rows(tmp_path / "bench_small_cdf.csv")
    assert float(cdf[-1][-1]) == 1.0


def test_bench_two_series_and_replay(tmp_path):
    args = ("bench", DATA / "bench_trend.toml", "--instances", 2, "--set", "bench.attacker_counts=[1, 2]",
            "--set", "bench.n_attacker_steps=4", "--set", "bench.n_controls=3", "--set", "bench.n_avoid=1")
    assert _run(*args, "--out", tmp_path / "a").exit_code == 0
    assert _run(*args, "--out", tmp_path / "b").exit_code == 0
    summary = _rows(tmp_path / "a" / "bench_trend_summary.csv")
    assert [r[0] for r in summary[1:]] == ["fuel_weight=0", "fuel_weight=0.1"]
    assert all(r[1] and r[2] for r in summary[1:])
    a, b = (_rows(tmp_path / d / "bench_trend_instances.csv") for d in "ab")
    t = a[0].index("wall_time")
    strip = lambda rows: [r[:t] + r[t + 1:] for r in rows]
    assert strip(a) == strip(b)
