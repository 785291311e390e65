import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biasrecovery.bias import BlumStanglBias, is_order_preserving
from biasrecovery.distribution import ClassifierTable, accuracy, bayes_optimal
from biasrecovery.errors import ValidationError
from biasrecovery.recovery import grid
from biasrecovery.robustness import (
    FAIL,
    PASS,
    SAMPLED,
    FiniteHypothesisClass,
    RobustnessBox,
    check_eps_robust,
    check_robust_recovery,
    unique_best,
    verify_robust_end_to_end,
)

from builders import d4, from_etas

EQUAL_RATES = from_etas(([(0.8, 1), (0.2, 1)], [(0.8, 1), (0.2, 1)]))


def near_tie():
    """Two members 0.001 apart in accuracy: they differ only on an eta = 0.498 cell."""
    d = from_etas(([(0.9, 1), (0.498, 1)], [(0.8, 1), (0.2, 1)]))
    h = bayes_optimal(d)
    return d, FiniteHypothesisClass((h, ClassifierTable({**h.decisions, ("x2", 0): 1.0})))


def test_zero_box_is_identity():
    box = RobustnessBox(0.0)
    assert len(box.corners()) == 1
    t0, t1 = box.corners()[0]
    assert t0(0.3) == 0.3 and t1(0.7) == 0.7


def test_zero_epsilon_passes():
    d = d4()
    v = check_eps_robust(d, FiniteHypothesisClass.all_tables(d), 0.0, samples=0)
    assert v.passed and v.label == SAMPLED


def test_d4_small_box_passes():
    d = d4()
    v = check_eps_robust(d, FiniteHypothesisClass.all_tables(d), 0.01, samples=1000, seed=0)
    assert v.status == PASS
    assert v.checked == 27 * 27 + 1000


def test_near_tie_broken_at_corner():
    d, H = near_tie()
    assert [accuracy(d, m) for m in H.members] == pytest.approx([0.7505, 0.7495])
    v = check_eps_robust(d, H, 0.3, samples=0)
    assert v.status == FAIL and v.violation_winner == 1
    assert v.checked <= 27 * 27  # found among the corners
    assert check_eps_robust(d, H, 0.0004, samples=500, seed=2).passed


def test_seed_is_mandatory():
    d = d4()
    with pytest.raises(ValidationError, match="MISSING_SEED"):
        check_eps_robust(d, FiniteHypothesisClass.all_tables(d), 0.05, samples=10)


def test_ties_are_reported():
    d = from_etas(([(0.5, 1)], [(0.9, 1)]))
    H = FiniteHypothesisClass.all_tables(d)
    with pytest.raises(ValidationError, match="TIED_OPTIMUM"):
        unique_best(d, H)


def test_members_must_be_deterministic():
    with pytest.raises(ValidationError, match="NOT_DETERMINISTIC"):
        FiniteHypothesisClass((ClassifierTable({("x", 0): 0.5}),))


def test_hypothesis_file_round_trip(tmp_path):
    H = FiniteHypothesisClass.all_tables(d4())
    p = tmp_path / "h.json"
    p.write_text(json.dumps(H.to_json()))
    assert FiniteHypothesisClass.load(p) == H


@settings(max_examples=50)
@given(st.floats(0.0, 0.99), st.integers(0, 1000))
def test_box_members_preserve_order(eps, seed):
    box = RobustnessBox(eps)
    pairs = box.corners() + box.sample(np.random.default_rng(seed), 50)
    for pair in pairs:
        for t in pair:
            assert t.S == 1.0 and t.R + t.S >= 1 - eps - 1e-15
            assert is_order_preserving(t)


# -- closed form ---------------------------------------------------------------


def test_robust_region_point():
    rep = check_robust_recovery(0.2, 0.1, 0.05, 0.6, 0.6)
    assert rep.condition_values["E1"] == pytest.approx(0.034, abs=1e-15)
    assert rep.condition_values["E2"] == pytest.approx(0.058, abs=1e-15)
    assert rep.condition_values["gate_low"] == pytest.approx(0.03)
    assert rep.verdict


def test_identity_edge_is_true():
    rep = check_robust_recovery(0.2, 0.0, 0.0, 0.5, 0.5)
    assert all(v == 0.0 for v in rep.condition_values.values())
    assert rep.verdict


@settings(max_examples=200)
@given(st.floats(0.0, 1.0))
def test_robust_region_lines(bp):
    upper = (0.9 * bp + 0.2) / 0.95
    lower = (0.9 * bp - 0.2) / 1.05
    e1 = 0.2 * (0.9 * bp - 0.95 * upper) + 0.05 * 0.8
    e2 = 0.2 * (1.05 * lower - 0.9 * bp) + 0.05 * 0.8
    assert e1 == pytest.approx(0.0, abs=1e-12) and e2 == pytest.approx(0.0, abs=1e-12)
    if 0 < upper <= 1 and bp > 0:
        vals = check_robust_recovery(0.2, 0.1, 0.05, bp, upper).condition_values
        assert vals["E1"] == pytest.approx(0.0, abs=1e-12)


# -- end to end ----------------------------------------------------------------


def test_inside_region_recovers():
    H = FiniteHypothesisClass.all_tables(EQUAL_RATES)
    res = verify_robust_end_to_end(EQUAL_RATES, H, 0.05, BlumStanglBias(0.6, 0.6, 0.1), seed=0)
    assert res.robust.passed and res.theory.verdict and res.empirical
    assert res.lagrangian_witness is not None


def test_identity_bias_recovers():
    H = FiniteHypothesisClass.all_tables(EQUAL_RATES)
    res = verify_robust_end_to_end(EQUAL_RATES, H, 0.05, BlumStanglBias(1.0, 1.0, 0.0), seed=0)
    assert res.empirical


def test_far_outside_fails():
    d = from_etas(([(0.6, 1), (0.45, 1)], [(0.6, 1), (0.45, 1)]))
    res = verify_robust_end_to_end(d, FiniteHypothesisClass.all_tables(d), 0.05,
                                   BlumStanglBias(0.05, 1.0, 0.45), seed=0)
    assert not res.theory.verdict and not res.empirical


def test_preconditions():
    H = FiniteHypothesisClass.all_tables(d4())
    # D4's best member has TPR 0.9 vs 0.8
    with pytest.raises(ValidationError, match="NOT_APPLICABLE"):
        verify_robust_end_to_end(d4(), H, 0.05, BlumStanglBias(0.5, 0.5), seed=0)
    skew = from_etas(([(0.9, 1), (0.3, 1)], [(0.8, 1), (0.2, 1)]))
    with pytest.raises(ValidationError, match="BASE_RATE_MISMATCH"):
        verify_robust_end_to_end(skew, FiniteHypothesisClass.all_tables(skew), 0.05,
                                 BlumStanglBias(0.5, 0.5), seed=0)


@pytest.mark.parametrize("etas, r", [((0.7, 0.4), 0.2), ((0.6, 0.3), 0.5)])
def test_sufficiency_small_grid(etas, r):
    d = from_etas(([(etas[0], 1), (etas[1], 1)], [(etas[0], 1), (etas[1], 1)]), r=r)
    H = FiniteHypothesisClass.all_tables(d)
    covered = 0
    for bp in grid(6):
        for bn in grid(6):
            res = verify_robust_end_to_end(d, H, 0.05, BlumStanglBias(bp, bn, 0.1), seed=1, samples=200)
            if res.robust.passed and res.theory.verdict:
                covered += 1
                assert res.empirical, (bp, bn)
    assert covered > 0
