import dataclasses
import io
import itertools

import numpy as np
import pytest

from coopmilp.drills import AttackerSpec, DefenderSpec, DrillGeometry, DrillInstance, DrillKind, solve_drill
from coopmilp.dynamics import TimeGrid, VehicleState
from coopmilp.logic import Iff, all_of, lit, neg
from coopmilp.milp import Status
from coopmilp.sim import mode_label, next_mode, simulate, validate


def _parked(x, y):
    return DefenderSpec(VehicleState(x, y, 0.0, 0.0))


def _instance(attacker, defenders=(), kind=DrillKind.DRILL1, steps=10, step=0.25, geometry=None):
    geometry = geometry or DrillGeometry(0.3, 8, 0.15, 8)
    horizon = steps * step
    return DrillInstance(kind, list(defenders), [attacker], geometry,
                         TimeGrid.uniform(5, horizon / 5), TimeGrid.uniform(steps, step),
                         avoid_times=[horizon / 2, horizon])


def _still(inst):
    return [np.zeros((len(inst.control_grid), 2)) for _ in inst.defenders]


def test_no_defenders_scores_from_crossing_on():
    inst = _instance(AttackerSpec(1.25, 0.0, -0.6, 0.0))
    tr = simulate(inst, [])
    # p[k] = 1.25 - 0.15 k first drops below 0.3 at k = 7
    assert list(tr.gamma[0]) == [0] * 7 + [1] * 4
    assert tr.score == 4
    assert tr.p[0, 8:] == pytest.approx([0.05] * 3)
    assert not tr.ambiguous


def test_parked_defender_intercepts():
    inst = _instance(AttackerSpec(1.25, 0.0, -0.6, 0.0), [_parked(0.55, 0.0)])
    tr = simulate(inst, _still(inst))
    # 0.65 is the first position within 0.15 of the defender
    assert list(tr.delta_any[0]) == [0] * 4 + [1] * 7
    assert list(tr.modes[0, :, 0]) == [1] * 5 + [0] * 5
    assert tr.p[0, 5:] == pytest.approx([0.5] * 6)
    assert tr.score == 0
    assert tr.defender_positions[0] == pytest.approx(np.tile([0.55, 0.0], (11, 1)))


def test_drill2_warning_makes_attacker_oscillate():
    geo = DrillGeometry(0.3, 8, 0.1, 8, 0.2, 8)
    inst = _instance(AttackerSpec(0.99, 0.0, -0.2, 0.0), [_parked(0.5, 0.0)], DrillKind.DRILL2, steps=20, geometry=geo)
    tr = simulate(inst, _still(inst))
    # hand-stepped: each transition acts on indicators from the step before
    expected = [0.99 - 0.05 * k for k in range(8)] + [0.69, 0.74, 0.79, 0.74, 0.69, 0.64, 0.69, 0.74, 0.79]
    assert tr.p[0, :17] == pytest.approx(expected)
    labels = [mode_label(m) for m in tr.modes[0]]
    assert labels[7:10] == ["retreat"] * 3
    assert labels[10:13] == ["attack"] * 3
    assert labels[13:16] == ["retreat"] * 3
    assert tr.score == 0
    assert not tr.delta_any.any()
    assert np.all(np.abs(tr.p[0] - 0.5) > 0.1)
    assert np.all(tr.modes[0].sum(axis=1) <= 1)


def test_drill1_transition_matches_truth_table():
    for a, g, d in itertools.product((0, 1), repeat=3):
        (an,) = next_mode(DrillKind.DRILL1, (a,), g, d)
        rule = Iff(lit(3), all_of(lit(0), neg(1), neg(2)))
        assert rule.evaluate({0: a, 1: g, 2: d, 3: an})
        assert not rule.evaluate({0: a, 1: g, 2: d, 3: 1 - an})


def test_drill2_transition_rules():
    assert next_mode(DrillKind.DRILL2, (1, 0), 0, 0, 1) == (0, 1)
    assert next_mode(DrillKind.DRILL2, (0, 1), 0, 0, 0) == (1, 0)
    assert next_mode(DrillKind.DRILL2, (0, 1), 0, 0, 1) == (0, 1)
    assert next_mode(DrillKind.DRILL2, (1, 0), 1, 0, 0) == (0, 0)
    assert next_mode(DrillKind.DRILL2, (1, 0), 0, 1, 1) == (0, 0)
    for ind in itertools.product((0, 1), repeat=3):
        assert next_mode(DrillKind.DRILL2, (0, 0), *ind) == (0, 0)


def test_simulation_is_deterministic():
    inst = _instance(AttackerSpec(1.0, 0.4, -0.5, -0.2), [_parked(0.6, 0.5)])
    u = [np.full((5, 2), 0.1)]
    a, b = simulate(inst, u), simulate(inst, u)
    for name in ("p", "q", "modes", "gamma", "delta_any", "defender_positions"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_simulate_rejects_bad_inputs():
    inst = _instance(AttackerSpec(1.25, 0.0, -0.6, 0.0), [_parked(0.55, 0.0)])
    with pytest.raises(ValueError):
        simulate(inst, [])
    with pytest.raises(ValueError):
        simulate(inst, [np.zeros((4, 2))])
    long = dataclasses.replace(inst, attacker_grid=TimeGrid.uniform(10, 0.3))
    with pytest.raises(ValueError):
        simulate(long, _still(long))


def test_write_csv_layout():
    inst = _instance(AttackerSpec(1.25, 0.0, -0.6, 0.0), [_parked(0.55, 0.0)])
    buf = io.StringIO()
    simulate(inst, _still(inst)).write_csv(buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "k,t,d1_x,d1_y,a1_x,a1_y,a1_mode,a1_gamma,a1_delta,a1_omega"
    assert len(rows) == 12
    assert rows[1].split(",")[6] == "attack"
    assert rows[-1].split(",")[6] == ""


@pytest.fixture(scope="module")
def drill1_solution():
    inst = _instance(AttackerSpec(1.2, 0.0, -0.6, 0.0), [_parked(0.6, 0.4)])
    return inst, solve_drill(inst, time_limit=60)


def test_validate_clean_on_optimal(drill1_solution):
    inst, sol = drill1_solution
    assert sol.status is Status.OPTIMAL
    rep = validate(inst, sol)
    assert rep.clean, rep.summary()
    assert rep.score == rep.milp_score == sol.zone_entries


def test_flipped_gamma_is_reported(drill1_solution):
    inst, sol = drill1_solution
    gamma = sol.gamma.copy()
    gamma[0, 6] = 1 - gamma[0, 6]
    rep = validate(inst, dataclasses.replace(sol, gamma=gamma))
    assert not rep.clean
    d = rep.first_divergence
    assert (d.quantity, d.attacker, d.step) == ("gamma", 1, 6)
    assert "step 6" in rep.summary()


def test_zone_skimming_is_ambiguous_not_divergent():
    # x stays on the face x = 0.3; q = 0.1 at k = 8 lies on that face's span
    inst = _instance(AttackerSpec(0.3, 0.5, 0.0, -0.2))
    tr = simulate(inst, [])
    assert ("gamma", 1, 8) in tr.ambiguous
    # the path never reaches the center, so the horizon check does not apply
    sol = solve_drill(inst, time_limit=60, force=True)
    assert sol.status is Status.OPTIMAL
    rep = validate(inst, sol)
    assert rep.clean, rep.summary()
    assert ("gamma", 1, 8) in rep.ambiguous
