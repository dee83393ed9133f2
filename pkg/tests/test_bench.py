import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopmilp.bench import (
    GeneratorConfig,
    InstanceRecord,
    attacker_from_polar,
    defender_from_polar,
    empirical_cdf,
    fit_exponential,
    random_instance,
    run_campaign,
    splitmix64,
    stream_uniform,
)
from coopmilp.drills import duration_check

TINY = GeneratorConfig(seed=3, n_controls=3, n_attacker_steps=4, n_avoid=1)


def test_splitmix64_reference_outputs():
    # first outputs of the reference generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_stream_is_keyed_by_field_name():
    a = stream_uniform(1, 0, "attacker1.theta")
    assert a == stream_uniform(1, 0, "attacker1.theta")
    assert a != stream_uniform(1, 0, "attacker1.radius")
    assert a != stream_uniform(1, 1, "attacker1.theta")
    assert 0.0 <= a < 1.0


def test_inbound_attacker_example():
    a = attacker_from_polar(10.0, 0.0, 1.0, inbound=True)
    assert (a.p, a.q, a.vp, a.vq) == (10.0, 0.0, -1.0, 0.0)
    out = attacker_from_polar(10.0, 0.0, 1.0, inbound=False)
    assert (out.vp, out.vq) == (1.0, 0.0)


def test_defender_example():
    d = defender_from_polar(2 * math.sqrt(2) * 2.0, math.pi / 2, 0.5, 0.0)
    assert d.start.y == pytest.approx(5.6568542495, abs=1e-10)
    assert d.start.x == pytest.approx(0.0, abs=1e-12)


def test_default_intervals():
    cfg = GeneratorConfig()
    assert cfg.attacker_radius == (7.5, 15.0)
    assert cfg.defender_radius == pytest.approx((2 * math.sqrt(2), 4 * math.sqrt(2)))
    assert cfg.attacker_speed == (1.0, 1.0)
    assert cfg.defender_speed == (0.5, 1.0)


def test_bad_interval_rejected():
    with pytest.raises(ValueError):
        GeneratorConfig(attacker_radius=(10.0, 5.0))


def test_instance_replay_is_identical():
    a, b = random_instance(TINY, 4), random_instance(TINY, 4)
    assert a == b
    assert random_instance(TINY, 5) != a


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**63), st.integers(0, 10_000), st.integers(1, 3))
def test_generated_instances_respect_intervals(seed, index, n_attackers):
    cfg = GeneratorConfig(seed=seed, n_attackers=n_attackers, n_defenders=2)
    inst = random_instance(cfg, index)
    for a in inst.attackers:
        assert 7.5 - 1e-12 <= math.hypot(a.p, a.q) <= 15.0 + 1e-12
        assert math.hypot(a.vp, a.vq) == pytest.approx(1.0, abs=1e-12)
        # inbound: velocity points at the center
        assert a.p * a.vp + a.q * a.vq < 0
    for d in inst.defenders:
        r = math.hypot(d.start.x, d.start.y)
        assert 2 * math.sqrt(2) - 1e-12 <= r <= 4 * math.sqrt(2) + 1e-12
        assert 0.5 - 1e-12 <= math.hypot(d.start.vx, d.start.vy) <= 1.0 + 1e-12
    rep = duration_check(inst)
    assert rep.ok
    assert inst.attacker_grid.horizon == pytest.approx(1.1 * max(rep.bounds))


def _rec(t, status="optimal"):
    return InstanceRecord("s", 0.0, 1, 1, 0, status, 0.0, 0, 1, t)


def test_cdf_is_right_continuous_step():
    cdf = empirical_cdf([_rec(2.0), _rec(1.0), _rec(math.nan, "time_limit"), _rec(3.0)])
    assert cdf(0.5) == 0.0
    assert cdf(1.0) == 0.25
    assert cdf(2.5) == 0.5
    assert cdf(100.0) == 0.75
    assert np.all(np.diff(cdf.fractions) > 0)
    assert cdf.quantile(0.5) == 2.0
    assert cdf.quantile(1.0) == math.inf


def test_exact_exponential_fit():
    fit = fit_exponential([(n, 2 * math.exp(n)) for n in (1, 2, 3, 4)])
    assert fit.c == pytest.approx(2.0)
    assert fit.alpha == pytest.approx(1.0)
    assert np.abs(fit.residuals).max() < 1e-12


@pytest.mark.parametrize("points", [[(1, 2.0)], [(1, 1.0), (2, 0.0)], [(2, 1.0), (2, 3.0)]])
def test_fit_rejects_degenerate_points(points):
    with pytest.raises(ValueError):
        fit_exponential(points)


def test_two_cost_functions_give_distinct_fits():
    # medians at N_A = 4 as reported for the two cost functions; the N_A = 3
    # companion point is a shared synthetic anchor so each series has two points
    plain = fit_exponential([(3, 1.0), (4, 3.5)])
    fuel = fit_exponential([(3, 1.0), (4, 78.0)])
    assert plain(4) == pytest.approx(3.5)
    assert fuel(4) == pytest.approx(78.0)
    assert fuel.alpha > plain.alpha
    assert plain.alpha == pytest.approx(math.log(3.5))


def test_campaign_generous_limit_solves_everything():
    res = run_campaign(TINY, [1], 10, time_limit=60.0)
    assert len(res.records) == 10
    assert all(r.solved for r in res.records)
    cdf = res.cdfs[("fuel_weight=0", 1, 1)]
    assert cdf.total == 10
    assert cdf(math.inf) == 1.0


def test_campaign_starved_limit_records_time_limits():
    res = run_campaign(TINY, [1, 2], 5, time_limit=0.001)
    assert len(res.records) == 10
    assert {r.status for r in res.records} == {"time_limit"}
    assert all(cdf(math.inf) == 0.0 for cdf in res.cdfs.values())
    assert res.fits["fuel_weight=0"] is None


def test_campaign_replay_matches_except_times():
    a = run_campaign(TINY, [1, 2], 3, fuel_weights=[0.0, 0.1])
    b = run_campaign(TINY, [1, 2], 3, fuel_weights=[0.0, 0.1], workers=2)
    strip = [(r.series, r.n_attackers, r.index, r.status, round(r.objective, 6), r.zone_entries)
             for r in a.records]
    assert strip == [(r.series, r.n_attackers, r.index, r.status, round(r.objective, 6), r.zone_entries)
                     for r in b.records]
    assert set(a.fits) == {"fuel_weight=0", "fuel_weight=0.1"}


def test_campaign_csv_headers():
    res = run_campaign(TINY, [1, 2], 2)
    for writer, head in ((res.write_instances, "series,fuel_weight,n_defenders"),
                         (res.write_quantiles, "series,n_defenders,n_attackers,total,solved"),
                         (res.write_summary, "series,c,alpha,residuals"),
                         (res.write_cdf, "series,n_defenders,n_attackers,time,fraction_solved")):
        buf = io.StringIO()
        writer(buf)
        assert buf.getvalue().startswith(head)


def test_failed_instance_is_recorded_not_raised():
    # an attacker with zero speed has no finite horizon
    cfg = GeneratorConfig(seed=1, attacker_speed=(0.0, 1e-300), n_controls=2, n_attacker_steps=2, n_avoid=1)
    res = run_campaign(cfg, [1], 2, time_limit=5.0)
    assert len(res.records) == 2
    assert [r.status for r in res.records] == ["error", "error"]
    assert all(r.error and math.isnan(r.wall_time) for r in res.records)
    assert res.cdfs[("fuel_weight=0", 1, 1)](math.inf) == 0.0
