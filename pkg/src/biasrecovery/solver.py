"""Optimal EO / DP classifiers on a finite distribution via the Lagrangian threshold form.

For a fixed multiplier ``lam`` the accuracy-plus-penalty objective splits by
group and is maximized by thresholding a per-group score at zero:

* EO: ``(2 + s_a * lam / P(Y=1, A=a)) * eta - 1``
* DP: ``2 * eta - 1 + s_a * lam / P(A=a)``

with ``s_0 = +1, s_1 = -1``. Each distinct eta level in a group switches
on or off at exactly one multiplier value (its breakpoint), so the signed
fairness gap is a nondecreasing step function of ``lam``. The solver
bisects over the sorted breakpoints to find where the gap reaches zero and
randomizes on the boundary level(s) to close it exactly. By LP duality,
any fair classifier that is Lagrangian-optimal at some ``lam`` is
accuracy-optimal among all fair (randomized) classifiers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .distribution import (
    ClassifierTable,
    DiscreteJointDistribution,
    bayes_optimal,
    evaluate,
    require_valid,
)
from .errors import InfeasibleError, ValidationError

FAIRNESS_TOL = 1e-10
ZERO_GAP_TOL = 1e-12
LEVEL_TOL = 1e-12
LAMBDA_BRACKET_MAX = 1e3


class Constraint(str, Enum):
    EO = "EO"
    DP = "DP"
    NONE = "NONE"


SIGN = (1.0, -1.0)


@dataclass(frozen=True)
class GroupThresholdClassifier:
    """Accept w.p. 1 above ``t[a]``, w.p. ``mix[a]`` at ``t[a]``, never below.

    ``+inf`` rejects the whole group, ``-inf`` accepts all of it.
    """

    t: tuple[float, float]
    mix: tuple[float, float]

    def accept_prob(self, eta: float, a: int, tol: float = LEVEL_TOL) -> float:
        t = self.t[a]
        if math.isinf(t):
            return 1.0 if t < 0 else 0.0
        if abs(eta - t) <= tol:
            return self.mix[a]
        return 1.0 if eta > t else 0.0

    def table(self, dist: DiscreteJointDistribution) -> ClassifierTable:
        return ClassifierTable({c: self.accept_prob(e, c[1]) for c, e in dist.etas().items()})


@dataclass(frozen=True)
class LambdaSolution:
    lambda_star: float
    classifier: GroupThresholdClassifier
    table: ClassifierTable
    gap: float
    accuracy: float
    constraint: Constraint
    unique: bool = True

    def to_json(self) -> dict:
        enc = lambda v: v if math.isfinite(v) else ("inf" if v > 0 else "-inf")  # noqa: E731
        return {
            "lambda": self.lambda_star,
            "t0": enc(self.classifier.t[0]),
            "t1": enc(self.classifier.t[1]),
            "mix0": self.classifier.mix[0],
            "mix1": self.classifier.mix[1],
            "gap": self.gap,
            "accuracy": self.accuracy,
        }


@dataclass
class _Level:
    eta: float
    cells: list
    pos: float  # P(Y=1, level)
    neg: float
    rate: float  # contribution to the constrained rate when fully accepted
    breakpoint: float


def _levels(dist: DiscreteJointDistribution, constraint: Constraint) -> list[list[_Level]]:
    out = []
    for a in (0, 1):
        cells = sorted((c for c in dist.cells() if c[1] == a), key=lambda c: -dist.eta(*c))
        groups: list[list] = []
        for c in cells:
            e = dist.eta(*c)
            if groups and abs(groups[-1][0] - e) <= LEVEL_TOL:
                groups[-1][1].append(c)
            else:
                groups.append([e, [c]])
        p_pos = dist.positive_mass(a)
        g_mass = dist.group_mass(a)
        levels = []
        for e, cs in groups:
            pos = sum(dist.mass(x, a, 1) for x, _ in cs)
            neg = sum(dist.mass(x, a, 0) for x, _ in cs)
            if constraint is Constraint.EO:
                rate = pos / p_pos
                if e <= 0 or pos <= 0:
                    bp = math.inf if a == 0 else -math.inf
                elif a == 0:
                    bp = p_pos * (1 / e - 2)
                else:
                    bp = p_pos * (2 - 1 / e)
            else:
                rate = (pos + neg) / g_mass
                bp = g_mass * (1 - 2 * e) if a == 0 else g_mass * (2 * e - 1)
            levels.append(_Level(e, cs, pos, neg, rate, bp))
        out.append(levels)
    return out


def _status(level: _Level, a: int, lam: float, at_breakpoint: bool) -> str:
    b = level.breakpoint
    if at_breakpoint and lam == b:
        return "B"
    if a == 0:
        return "1" if lam > b else "0"
    return "1" if lam < b else "0"


@dataclass
class _Piece:
    lam: float
    at_breakpoint: bool
    lo: float
    hi: float
    base: float  # signed gap with boundary levels excluded (group 0) / included (group 1)
    b0: float
    b1: float

    @property
    def gmin(self):
        return self.base - self.b1

    @property
    def gmax(self):
        return self.base + self.b0


def _piece(levels, lam, at_bp, lo, hi) -> _Piece:
    rates = [0.0, 0.0]
    bnd = [0.0, 0.0]
    for a in (0, 1):
        for lv in levels[a]:
            s = _status(lv, a, lam, at_bp)
            if s == "1":
                rates[a] += lv.rate
            elif s == "B":
                bnd[a] += lv.rate
    # base = gap with group-0 boundary rejected and group-1 boundary accepted
    base = rates[0] - (rates[1] + bnd[1])
    return _Piece(lam, at_bp, lo, hi, base + bnd[1], bnd[0], bnd[1])


def _pieces(levels) -> list[_Piece]:
    bps = sorted({lv.breakpoint for g in levels for lv in g if math.isfinite(lv.breakpoint)})
    pieces = []
    edges = [-math.inf] + bps + [math.inf]
    for i in range(len(edges) - 1):
        lo, hi = edges[i], edges[i + 1]
        if math.isinf(lo) and math.isinf(hi):
            rep = 0.0
        elif math.isinf(lo):
            rep = hi - 1.0
        elif math.isinf(hi):
            rep = lo + 1.0
        else:
            rep = 0.5 * (lo + hi)
        pieces.append(_Piece(rep, False, lo, hi, 0, 0, 0))
        if i < len(bps):
            pieces.append(_Piece(bps[i], True, bps[i], bps[i], 0, 0, 0))
    return [_piece(levels, p.lam, p.at_breakpoint, p.lo, p.hi) for p in pieces]


def _first_reaching_zero(pieces: list[_Piece]) -> int:
    """Bisection on the monotone upper envelope of the gap."""
    lo, hi = 0, len(pieces)
    while lo < hi:
        mid = (lo + hi) // 2
        if pieces[mid].gmax >= -ZERO_GAP_TOL:
            hi = mid
        else:
            lo = mid + 1
    return lo


def _choose(zero_set: list[_Piece]) -> _Piece:
    """Prefer a deterministic piece; within it the multiplier closest to zero."""
    open_pieces = [p for p in zero_set if not p.at_breakpoint]
    if open_pieces:
        for p in open_pieces:
            if p.lo < 0 < p.hi or (p.lo == -math.inf and p.hi == math.inf):
                p.lam = 0.0
                return p
        return min(open_pieces, key=lambda p: min(abs(p.lo), abs(p.hi)))
    return min(zero_set, key=lambda p: abs(p.lam))


def _mixing(piece: _Piece) -> tuple[float, float]:
    if not piece.at_breakpoint:
        return (0.0, 0.0)
    base, b0, b1 = piece.gmin, piece.b0, piece.b1
    # gap(m0, m1) = gmin + m0 * b0 + (1 - m1) * b1
    if b0 > 0 and b1 > 0:
        # walk the segment (m0, m1) = (s, 1 - s)
        s = -base / (b0 + b1)
        m0, m1 = s, 1 - s
    elif b0 > 0:
        m0, m1 = -base / b0, 0.0
    elif b1 > 0:
        m0, m1 = 0.0, 1 + base / b1
    else:
        m0 = m1 = 0.0
    snap = lambda m: 0.0 if abs(m) <= ZERO_GAP_TOL else 1.0 if abs(m - 1) <= ZERO_GAP_TOL else min(1.0, max(0.0, m))  # noqa: E731
    return snap(m0), snap(m1)


def _threshold(levels_a, a, lam, constraint, dist, boundary_eta):
    if boundary_eta is not None:
        return boundary_eta
    if constraint is Constraint.EO:
        denom = 2 + SIGN[a] * lam / dist.positive_mass(a)
        if denom <= 0:
            return math.inf
        t = 1 / denom
    else:
        t = 0.5 - SIGN[a] * lam / (2 * dist.group_mass(a))
    if t > 1:
        return math.inf
    if t <= 0 and constraint is Constraint.DP:
        return -math.inf
    return t


def _build(dist, levels, piece: _Piece, mix, constraint) -> tuple[ClassifierTable, GroupThresholdClassifier]:
    decisions = {}
    thresholds = []
    for a in (0, 1):
        boundary_eta = None
        for lv in levels[a]:
            s = _status(lv, a, piece.lam, piece.at_breakpoint)
            v = 1.0 if s == "1" else mix[a] if s == "B" else 0.0
            if s == "B":
                boundary_eta = lv.eta
            for c in lv.cells:
                decisions[c] = v
        thresholds.append(_threshold(levels[a], a, piece.lam, constraint, dist, boundary_eta))
    has_b = [any(_status(lv, a, piece.lam, piece.at_breakpoint) == "B" for lv in levels[a]) for a in (0, 1)]
    clf = GroupThresholdClassifier(tuple(thresholds), tuple(mix[a] if has_b[a] else 1.0 for a in (0, 1)))
    return ClassifierTable(decisions), clf


def solve_fair(dist: DiscreteJointDistribution, constraint: Constraint | str = Constraint.EO
               ) -> LambdaSolution:
    """Maximum-accuracy group-threshold classifier meeting the constraint exactly."""
    constraint = Constraint(constraint)
    dist = require_valid(dist)
    if constraint is Constraint.NONE:
        table = bayes_optimal(dist)
        rates = evaluate(dist, table)
        clf = GroupThresholdClassifier((0.5, 0.5), (1.0, 1.0))
        return LambdaSolution(0.0, clf, table, 0.0, rates.accuracy, constraint)
    if constraint is Constraint.EO:
        for a in (0, 1):
            if dist.positive_mass(a) <= 0:
                raise ValidationError("UNDEFINED_CONSTRAINT", f"group {a} has no positives")

    levels = _levels(dist, constraint)
    pieces = _pieces(levels)
    first = _first_reaching_zero(pieces)
    if first >= len(pieces) or pieces[first].gmin > ZERO_GAP_TOL:
        raise InfeasibleError("INFEASIBLE", "fairness gap never crosses zero")
    zero_set = []
    for p in pieces[first:]:
        if p.gmin > ZERO_GAP_TOL:
            break
        zero_set.append(p)
    piece = _choose(zero_set)
    if abs(piece.lam) > LAMBDA_BRACKET_MAX:
        raise InfeasibleError("INFEASIBLE", f"multiplier {piece.lam} outside [-{LAMBDA_BRACKET_MAX:g}, {LAMBDA_BRACKET_MAX:g}]")
    mix = _mixing(piece)
    table, clf = _build(dist, levels, piece, mix, constraint)
    rates = evaluate(dist, table)
    gap = abs(rates.eo_gap() if constraint is Constraint.EO else rates.dp_gap())
    if gap > FAIRNESS_TOL:
        raise InfeasibleError("INFEASIBLE", f"could not close the gap (left {gap:.3e})")
    both_mix = piece.at_breakpoint and piece.b0 > 0 and piece.b1 > 0
    return LambdaSolution(piece.lam, clf, table, gap, rates.accuracy, constraint,
                          unique=len(zero_set) == 1 and not both_mix)


def lagrangian_classifier(dist: DiscreteJointDistribution, constraint: Constraint | str,
                          lam: float) -> ClassifierTable:
    """Deterministic maximizer of the penalized objective at ``lam`` (zero score accepted)."""
    constraint = Constraint(constraint)
    dist = require_valid(dist)
    out = {}
    for (x, a), e in dist.etas().items():
        if constraint is Constraint.EO:
            score = (2 + SIGN[a] * lam / dist.positive_mass(a)) * e - 1
        elif constraint is Constraint.DP:
            score = 2 * e - 1 + SIGN[a] * lam / dist.group_mass(a)
        else:
            score = 2 * e - 1
        out[(x, a)] = 1.0 if score >= 0 else 0.0
    return ClassifierTable(out)


def signed_gap(dist: DiscreteJointDistribution, constraint: Constraint | str, lam: float) -> float:
    constraint = Constraint(constraint)
    rates = evaluate(dist, lagrangian_classifier(dist, constraint, lam))
    return rates.eo_gap() if constraint is Constraint.EO else rates.dp_gap()
