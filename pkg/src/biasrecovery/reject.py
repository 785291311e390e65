"""Three-way classifiers that may abstain, and their recovery under Blum-Stangl bias."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

from .bias import BlumStanglBias, apply_bias
from .distribution import Cell, DiscreteJointDistribution, require_valid
from .errors import InfeasibleError, ValidationError
from .recovery import RecoveryReport, check_eo_recovery, eo_conditions, _report
from .solver import Constraint, LambdaSolution, solve_fair

REJECT = "reject"
PRECONDITION_TOL = 1e-9
EDGE_TOL = 1e-12  # eta read off a table can miss delta by an ulp; both costs tie there

Action = Union[int, str]


@dataclass(frozen=True)
class RejectClassifier:
    penalty: float
    decisions: Mapping[Cell, Action]
    rejection_mass: float

    def __getitem__(self, cell: Cell) -> Action:
        return self.decisions[cell]

    def to_json(self) -> dict:
        return {
            "penalty": self.penalty,
            "rejection_mass": self.rejection_mass,
            "decisions": [{"x": x, "a": a, "accept": v} for (x, a), v in self.decisions.items()],
        }


def _check_penalty(delta: float) -> None:
    if not 0 <= delta < 0.5:
        raise ValidationError("PARAM_OUT_OF_RANGE", f"rejection penalty {delta} must lie in [0, 1/2)")


def reject_rule(eta: float, delta: float) -> Action:
    """0 when eta <= delta, 1 when eta >= 1 - delta, abstain in between."""
    if eta <= delta + EDGE_TOL:
        return 0
    if eta >= 1 - delta - EDGE_TOL:
        return 1
    return REJECT


def optimal_reject(dist: DiscreteJointDistribution, delta: float) -> RejectClassifier:
    _check_penalty(delta)
    dist = require_valid(dist)
    dec = {c: reject_rule(e, delta) for c, e in dist.etas().items()}
    mass = sum(dist.mass(*c) for c, v in dec.items() if v == REJECT)
    return RejectClassifier(delta, dec, mass)


def reject_cost(dist: DiscreteJointDistribution, decisions: Mapping[Cell, Action], delta: float) -> float:
    """P(wrong and not abstaining) + delta * P(abstain)."""
    cost = 0.0
    for (x, a) in dist.cells():
        d = decisions[(x, a)]
        if d == REJECT:
            cost += delta * dist.mass(x, a)
        else:
            cost += dist.mass(x, a, 1 - int(d))
    return cost


def _conditional_tpr(dist, rej: RejectClassifier, a: int) -> float | None:
    kept = [(x, g) for (x, g), v in rej.decisions.items() if g == a and v != REJECT]
    pos = sum(dist.mass(x, a, 1) for x, _ in kept)
    if pos <= 0:
        return None
    return sum(dist.mass(x, a, 1) for x, _ in kept if rej.decisions[(x, a)] == 1) / pos


def precondition_gap(dist: DiscreteJointDistribution, rej: RejectClassifier) -> float | None:
    """|TPR_0 - TPR_1| of the abstaining rule on the non-abstained part (None if undefined)."""
    t0, t1 = _conditional_tpr(dist, rej, 0), _conditional_tpr(dist, rej, 1)
    if t0 is None or t1 is None:
        return None
    return abs(t0 - t1)


@dataclass(frozen=True)
class RejectRecovery:
    theory: RecoveryReport
    empirical: bool
    classifier: RejectClassifier
    solution: LambdaSolution | None
    precondition_gap: float
    disagreement_mass: float  # abstained atoms count as disagreement
    kept_disagreement_mass: float

    @property
    def within_bound(self) -> bool:
        return self.disagreement_mass <= self.classifier.rejection_mass + 1e-12


def check_reject_recovery(dist: DiscreteJointDistribution, delta: float, bias: BlumStanglBias
                          ) -> RejectRecovery:
    """Does the EO-optimal classifier on biased data agree with the abstaining rule where it predicts?"""
    _check_penalty(delta)
    dist = require_valid(dist)
    rej = optimal_reject(dist, delta)
    gap = precondition_gap(dist, rej)
    if gap is None or gap > PRECONDITION_TOL:
        raise ValidationError("NOT_APPLICABLE",
                              f"abstaining rule is not EO-fair on its kept part (gap {gap})")
    r = dist.r
    if delta > 0:
        q = dist.base_rate(0)  # the conditions do not involve q
        theory = check_eo_recovery(r, q, delta, bias.beta_p, bias.beta_n, bias.nu)
    else:
        c1, c2 = eo_conditions(r, delta, bias.beta_p, bias.beta_n, bias.nu)
        theory = _report({"C1": c1, "C2": c2})
    try:
        sol = solve_fair(apply_bias(dist, bias), Constraint.EO)
    except InfeasibleError:
        sol = None
    total = kept = 0.0
    ok = sol is not None
    for c, v in rej.decisions.items():
        m = dist.mass(*c)
        if v == REJECT:
            total += m
            continue
        off = 1.0 if sol is None else abs(sol.table[c] - v)
        ok = ok and off <= PRECONDITION_TOL
        total += m * off
        kept += m * off
    return RejectRecovery(theory, ok, rej, sol, gap, total, kept)
