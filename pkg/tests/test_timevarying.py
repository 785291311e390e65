import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biasrecovery.bias import apply_bias, is_order_preserving, to_lft
from biasrecovery.distribution import build_stylized
from biasrecovery.errors import ValidationError
from biasrecovery.timevarying import (
    IMPOSSIBLE,
    NECESSARY_FAIL,
    NECESSARY_HOLD,
    SUFFICIENT_FAIL,
    SUFFICIENT_HOLD,
    TRIVIAL,
    BiasSchedule,
    Step,
    check_finite_horizon_dp,
    check_finite_horizon_eo,
    check_infinite_horizon,
    compose,
    horizon_constant,
    max_recovery_horizon,
    pipeline_csv,
    run_pipeline,
)

from builders import dists

steps = st.builds(Step, st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(0.0, 0.49))
schedules = st.lists(steps, min_size=1, max_size=6).map(lambda s: BiasSchedule(tuple(s)))


def test_single_step_matches_formula():
    s = Step(0.4, 0.8, 0.2)
    ct = compose(BiasSchedule((s,)))
    assert ct.R == pytest.approx((1 - s.c) / (1 - s.nu))
    assert ct.S == pytest.approx(s.c / (1 - s.nu))
    for eta in (0.1, 0.5, 0.93):
        assert ct(eta) == pytest.approx((1 - s.nu) * eta / ((1 - s.c) * eta + s.c), abs=1e-15)


def test_two_halving_steps():
    # beta_n / beta_p = 0.5 twice: 0.5 -> 2/3 -> 0.8
    s = Step(1.0, 0.5, 0.0)
    once = to_lft(s.as_bias(), 0)(0.5)
    assert once == pytest.approx(2 / 3)
    assert to_lft(s.as_bias(), 0)(once) == pytest.approx(0.8)
    assert compose(BiasSchedule.uniform(1.0, 0.5, 0.0, 2))(0.5) == pytest.approx(0.8, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(schedules, st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20))
def test_compose_equals_sequential(schedule, etas):
    ct = compose(schedule)
    for e in etas:
        v = e
        for s in schedule.steps:
            v = to_lft(s.as_bias(), 0)(v)
        assert ct(e) == pytest.approx(v, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(dists(max_atoms=4), schedules)
def test_compose_equals_repeated_tables(d, schedule):
    cur = d
    for s in schedule.steps:
        cur = apply_bias(cur, s.as_bias())
    ct = compose(schedule)
    for (x, a), e in d.etas().items():
        if a == 0 and cur.mass(x, 0) > 0:
            assert cur.eta(x, 0) == pytest.approx(ct(e), abs=1e-12)


@settings(max_examples=100)
@given(schedules)
def test_composed_transform_preserves_order(schedule):
    ct = compose(schedule)
    assert ct.S > 0 and ct.R + ct.S >= 0
    assert is_order_preserving(ct.as_lft())


def test_schedule_bounds_and_json():
    sched = BiasSchedule((Step(0.9, 0.8, 0.1), Step(0.7, 0.95, 0.05)))
    assert sched.bounds == Step(0.7, 0.8, 0.1)
    assert BiasSchedule.from_json(sched.to_json()) == sched
    with pytest.raises(ValidationError):
        BiasSchedule((Step(0.9, 0.8, 0.6),))
    with pytest.raises(ValidationError):
        BiasSchedule((Step(0.5, 0.5, 0.1),), bounds=Step(0.6, 0.5, 0.1))


# -- infinite horizon ----------------------------------------------------------


def test_shrinking_negatives_is_impossible():
    for args in [(0.25, 0.3, 0.9, 0.99, 0.1), (0.5, 0.1, 1.0, 0.5, 0.0)]:
        assert check_infinite_horizon(*args).status == IMPOSSIBLE


def test_infinite_horizon_window():
    rep = check_infinite_horizon(0.5, 0.3, 0.8, 1.0, 0.1)
    assert rep.notes["middle"] == pytest.approx(0.08 / 0.28)
    lo, hi = rep.notes["bounds"]
    assert lo == pytest.approx(-1 / 7) and hi == pytest.approx(11 / 3)
    assert rep.status == NECESSARY_HOLD


def test_infinite_horizon_no_bias():
    assert check_infinite_horizon(0.5, 0.3, 1.0, 1.0, 0.0).status == TRIVIAL


def test_infinite_horizon_light_flip_fails():
    # the middle term never exceeds 1, so only the lower bound can bite
    rep = check_infinite_horizon(0.9, 0.45, 0.5, 1.0, 0.01)
    assert rep.notes["middle"] == pytest.approx(0.005 / 0.505)
    assert rep.notes["middle"] < rep.notes["bounds"][0]
    assert rep.status == NECESSARY_FAIL


# -- finite horizon ------------------------------------------------------------


def test_finite_horizon_single_step():
    rep = check_finite_horizon_eo(0.25, 0.3, Step(0.9, 0.9, 0.1), 1)
    # N1: 1.28571 > -0.50889, N2: 4 > -4.919
    assert rep.condition_values["N1"] == pytest.approx(9 / 7 - (1 / 0.9 - 2 * 0.81), abs=1e-12)
    assert rep.condition_values["N2"] == pytest.approx(4 - (0.81 * 0.1 - 3 - 2), abs=1e-12)
    assert rep.condition_values["N1"] == pytest.approx(1.794603, abs=1e-6)
    assert rep.status == NECESSARY_HOLD


@pytest.mark.parametrize("t", [1, 3, 10, 50])
def test_finite_horizon_no_bias(t):
    rep = check_finite_horizon_eo(0.25, 0.3, Step(1.0, 1.0, 0.0), t)
    assert rep.condition_values["N1"] == pytest.approx(9 / 7 + 1)
    assert rep.verdict


def test_horizon_bound():
    assert horizon_constant(0.25, 0.45) == pytest.approx(1.727272727, abs=1e-9)
    assert max_recovery_horizon(0.25, 0.45, 0.9) == 5
    assert math.log(horizon_constant(0.25, 0.45)) / math.log(1 / 0.9) == pytest.approx(5.187, abs=1e-3)
    with pytest.raises(ValidationError, match="UNBOUNDED"):
        max_recovery_horizon(0.25, 0.45, 1.0)
    # K > 1 for every delta < 1/2, so the bound only shrinks towards 1 as r -> 1
    assert max_recovery_horizon(0.99, 0.45, 0.9) == 1


@pytest.mark.parametrize("r, delta, beta_n", [(0.25, 0.45, 0.9), (0.25, 0.3, 0.7), (0.5, 0.2, 0.95), (0.1, 0.4, 0.5)])
def test_horizon_consistent_with_scan(r, delta, beta_n):
    tmax = max_recovery_horizon(r, delta, beta_n)
    for t in range(1, tmax + 6):
        n1 = check_finite_horizon_eo(r, delta, Step(1.0, beta_n, 0.0), t).satisfied["N1"]
        assert n1 == (t <= tmax), t


def test_dp_horizon_values():
    nobias = check_finite_horizon_dp(0.3, Step(1.0, 1.0, 0.0), 1)
    assert nobias.condition_values["DP1"] == pytest.approx(2 - 4 * 0.3)
    assert nobias.condition_values["DP2"] == pytest.approx(3 - 4 * 0.3)
    assert nobias.status == SUFFICIENT_HOLD
    rep = check_finite_horizon_dp(0.3, Step(0.9, 0.9, 0.1), 2)
    assert rep.condition_values["DP1"] == pytest.approx(0.1362, abs=1e-4)
    assert rep.condition_values["DP2"] == pytest.approx(1.633, abs=1e-3)


def test_dp_horizon_near_half_noise():
    margins = [check_finite_horizon_dp(0.49, Step(0.3, 0.3, 0.4), t).margin for t in (1, 2, 3)]
    assert margins == sorted(margins, reverse=True)


# -- pipeline ------------------------------------------------------------------


def test_identity_schedule_recovers_every_step():
    d, _ = build_stylized(4, 0.25, 0.5, 0.3)
    out = run_pipeline(d, BiasSchedule.uniform(1.0, 1.0, 0.0, 5), "EO", delta=0.3)
    assert all(s.recovered and s.conditions.verdict for s in out)


def test_pipeline_steps_and_lambdas():
    d, _ = build_stylized(4, 0.25, 0.5, 0.3)
    out = run_pipeline(d, BiasSchedule.uniform(0.9, 0.6, 0.05, 4), "DP", delta=0.3)
    assert [s.t for s in out] == [1, 2, 3, 4]
    assert all(s.lambda_star is not None for s in out)
    assert out[0].conditions.status in (SUFFICIENT_HOLD, SUFFICIENT_FAIL)


def test_pipeline_csv():
    d, _ = build_stylized(4, 0.25, 0.5, 0.3)
    text = pipeline_csv(run_pipeline(d, BiasSchedule.uniform(0.9, 0.9, 0.1, 2), "EO", delta=0.3))
    lines = text.splitlines()
    assert lines[0] == "t,recovered,n1,n2,n1_value,n2_value"
    assert lines[1].startswith("1,1,1,1,1.7946")
