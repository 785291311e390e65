"""End-to-end acceptance checks, one per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (a summary line per
criterion is printed at the end) or directly with
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import csv
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from biasrecovery import cli  # noqa: E402
from biasrecovery.bias import BlumStanglBias, LabelFlipBias, apply_bias, biased_rate_identity  # noqa: E402
from biasrecovery.distribution import build_stylized, evaluate  # noqa: E402
from biasrecovery.oracle import enumerate_thresholds  # noqa: E402
from biasrecovery.recovery import grid, line_distance, verify_end_to_end  # noqa: E402
from biasrecovery.reject import REJECT, optimal_reject  # noqa: E402
from biasrecovery.robustness import FiniteHypothesisClass, verify_robust_end_to_end  # noqa: E402
from biasrecovery.solver import solve_fair  # noqa: E402
from biasrecovery.timevarying import (  # noqa: E402
    BiasSchedule,
    Step,
    check_finite_horizon_eo,
    compose,
    max_recovery_horizon,
)

from builders import from_etas, random_dist, random_table  # noqa: E402

MARGIN = 1e-6
RESULTS: dict[int, tuple[bool, str]] = {}


# -- region boundaries ----------------------------------------------------------


def _sweep_csv(args: list[str]) -> tuple[list[dict], float]:
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "region.csv"
        t0 = time.perf_counter()
        code = cli.main(["sweep", "region", *args, "--out", str(out)])
        elapsed = time.perf_counter() - t0
        assert code == 0
        rows = list(csv.DictReader(out.read_text().splitlines()))
    return rows, elapsed


def _boundary_check(rows, n, lines, inside):
    """Boundary cells within one grid spacing of a line; far cells on the analytic side."""
    h = 1.0 / n
    verdict = {}
    for r in rows:
        key = (round(float(r["beta_p"]) * n), round(float(r["beta_n"]) * n))
        verdict[key] = r["theory"]
    far_wrong = boundary_far = boundary = 0
    for (i, j), v in verdict.items():
        bp, bn = i / n, j / n
        dist = min(line_distance(bp, bn, s, c) for s, c in lines)
        nbrs = [verdict.get((i + di, j + dj)) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))]
        on_edge = v != "RECOVERABLE" and v != "NOT_RECOVERABLE" or any(
            w is not None and w != v for w in nbrs)
        if on_edge:
            boundary += 1
            boundary_far += dist > h + 1e-12
        elif dist > h and (v == "RECOVERABLE") != inside(bp, bn):
            far_wrong += 1
    return boundary, boundary_far, far_wrong


def criterion_1():
    n = 101
    rows, elapsed = _sweep_csv(["--theorem", "eo", "--r", "0.25", "--nu", "0.05", "--delta", "0.45",
                                "--grid", str(n)])
    lines = [(0.495 / 0.45, 0.3 / 0.45), (0.405 / 0.55, -0.3 / 0.55)]
    inside = lambda bp, bn: (0.405 * bp - 0.3) / 0.55 < bn < (0.495 * bp + 0.3) / 0.45  # noqa: E731
    b, far, wrong = _boundary_check(rows, n, lines, inside)
    ok = len(rows) == n * n and b > 0 and far == 0 and wrong == 0 and elapsed < 5
    return ok, f"{b} boundary cells, {far} beyond one cell, {wrong} misplaced interior cells, {elapsed:.2f}s"


def criterion_2():
    n = 101
    rows, elapsed = _sweep_csv(["--theorem", "robust", "--r", "0.2", "--nu", "0.1", "--epsilon", "0.05",
                                "--grid", str(n)])
    lines = [(0.9 / 0.95, 0.2 / 0.95), (0.9 / 1.05, -0.2 / 1.05)]
    inside = lambda bp, bn: (0.9 * bp - 0.2) / 1.05 <= bn <= (0.9 * bp + 0.2) / 0.95  # noqa: E731
    b, far, wrong = _boundary_check(rows, n, lines, inside)
    ok = len(rows) == n * n and b > 0 and far == 0 and wrong == 0 and elapsed < 5
    return ok, f"{b} boundary cells, {far} beyond one cell, {wrong} misplaced interior cells, {elapsed:.2f}s"


# -- end-to-end grids -----------------------------------------------------------


def _grid_agreement(dist, spec, constraint, need_converse=True):
    checked = bad = 0
    for nu in (0.0, 0.1, 0.3):
        for bp in grid(21):
            for bn in grid(21):
                e = verify_end_to_end(dist, spec, BlumStanglBias(bp, bn, nu), constraint)
                if min(abs(v) for v in e.theory.condition_values.values()) <= MARGIN:
                    continue
                if not need_converse and not e.theory.verdict:
                    continue
                checked += 1
                bad += e.theory.verdict != e.empirical
    return checked, bad


def criterion_3():
    t0 = time.perf_counter()
    d, spec = build_stylized(4, 0.25, 0.5, 0.3)
    checked, bad = _grid_agreement(d, spec, "EO")
    elapsed = time.perf_counter() - t0
    return bad == 0 and checked > 0 and elapsed < 60, f"{checked - bad}/{checked} cells agree, {elapsed:.2f}s"


def criterion_4():
    table = {(x, a): dl for a in (0, 1) for x, dl in zip(["x1", "x2", "x3", "x4"], [0.1, 0.3, 0.1, 0.3])}
    d, spec = build_stylized(4, 0.25, 0.5, 0.3, table)
    checked, bad = _grid_agreement(d, spec, "EO", need_converse=False)
    return bad == 0 and checked > 0, f"{checked} theory-true cells, {bad} without recovery"


def criterion_5():
    d, spec = build_stylized(4, 0.25, 0.5, 0.3)
    checked, bad = _grid_agreement(d, spec, "DP")
    return bad == 0 and checked > 0, f"{checked - bad}/{checked} cells agree"


# -- identities -----------------------------------------------------------------


def criterion_6():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(200):
        d = random_dist(rng)
        bias = BlumStanglBias(rng.uniform(0.01, 1), rng.uniform(0.01, 1), rng.uniform(0, 0.99))
        h = random_table(rng, d)
        before, after = evaluate(d, h), evaluate(apply_bias(d, bias), h)
        for a in (0, 1):
            if before.tpr[a] is not None and after.tpr[a] is not None:
                worst = max(worst, abs(before.tpr[a] - after.tpr[a]))
    return worst < 1e-12, f"max |TPR~ - TPR| = {worst:.2e}"


def criterion_7():
    rng = np.random.default_rng(7)
    worst_tpr = worst_tnr = 0.0
    for _ in range(200):
        d = random_dist(rng)
        e1, e0 = rng.uniform(0, 0.5, 2), rng.uniform(0, 0.5, 2)
        rep = biased_rate_identity(d, LabelFlipBias(tuple(e1), tuple(e0)), random_table(rng, d))
        worst_tpr, worst_tnr = max(worst_tpr, rep.tpr_residual), max(worst_tnr, rep.tnr_residual)
    ok = worst_tpr < 1e-12 and worst_tnr < 1e-12
    return ok, f"TPR residual {worst_tpr:.2e}, TNR residual {worst_tnr:.2e}"


def criterion_8():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        t = int(rng.integers(1, 7))
        sched = BiasSchedule(tuple(Step(rng.uniform(0.05, 1), rng.uniform(0.05, 1), rng.uniform(0, 0.49))
                                   for _ in range(t)))
        d = random_dist(rng)
        cur = d
        for s in sched.steps:
            cur = apply_bias(cur, s.as_bias())
        ct = compose(sched)
        for (x, a), e in d.etas().items():
            if a == 0 and cur.mass(x, 0) > 0:
                worst = max(worst, abs(cur.eta(x, 0) - ct(e)))
    tmax = max_recovery_horizon(0.25, 0.45, 0.9)
    scan = [check_finite_horizon_eo(0.25, 0.45, Step(1.0, 0.9, 0.0), t).satisfied["N1"] for t in range(1, 11)]
    first_fail = scan.index(False) + 1 if False in scan else None
    ok = worst < 1e-12 and tmax == 5 and first_fail == 6 and not any(scan[5:])
    return ok, f"compose vs sequential {worst:.2e}; t_max = {tmax}, N1 first fails at t = {first_fail}"


def _pointwise(eta, delta):
    costs = [(eta, 0), (1 - eta, 1), (delta, REJECT)]
    best = min(c for c, _ in costs)
    return next(d for c, d in costs if c <= best + 1e-12)


def criterion_9():
    rng = np.random.default_rng(9)
    mismatches = atoms = 0
    for _ in range(100):
        d = random_dist(rng)
        for delta in (0.0, 0.1, 0.3, 0.49):
            rej = optimal_reject(d, delta)
            for c, e in d.etas().items():
                atoms += 1
                mismatches += rej[c] != _pointwise(e, delta)
    return mismatches == 0, f"{mismatches} mismatches over {atoms} atom decisions"


def criterion_10():
    rng = np.random.default_rng(10)
    t0 = time.perf_counter()
    worst_acc = worst_gap = 0.0
    for _ in range(50):
        d = random_dist(rng, max_atoms=6)
        for cons in ("EO", "DP"):
            sol = solve_fair(d, cons)
            worst_acc = max(worst_acc, abs(sol.accuracy - enumerate_thresholds(d, cons).best_accuracy))
            worst_gap = max(worst_gap, sol.gap)
    elapsed = time.perf_counter() - t0
    ok = worst_acc <= 1e-9 and worst_gap <= 1e-10 and elapsed < 120
    return ok, f"accuracy diff {worst_acc:.2e}, gap {worst_gap:.2e}, {elapsed:.2f}s"


def criterion_11():
    d = from_etas(([(0.8, 1), (0.2, 1)], [(0.8, 1), (0.2, 1)]), r=0.5)
    H = FiniteHypothesisClass.all_tables(d)
    antecedent = violations = 0
    for nu in (0.0, 0.1, 0.3):
        for bp in grid(11):
            for bn in grid(11):
                res = verify_robust_end_to_end(d, H, 0.05, BlumStanglBias(bp, bn, nu), seed=0, samples=1000)
                if res.robust.passed and res.theory.verdict:
                    antecedent += 1
                    violations += not res.empirical
    ok = len(H.members) == 16 and antecedent > 0 and violations == 0
    return ok, f"{antecedent} cells with PASS and theory true, {violations} violations"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, detail = CRITERIA[number]()
    RESULTS[number] = (ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for i, fn in CRITERIA.items():
        ok, detail = fn()
        failed += not ok
        print(f"criterion {i:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    sys.exit(1 if failed else 0)
