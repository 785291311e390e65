"""Brute-force ground truth for the fair solver on small supports."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .distribution import ClassifierTable, DiscreteJointDistribution, require_valid
from .errors import ValidationError
from .solver import Constraint

MAX_DETERMINISTIC_ATOMS = 20
DETERMINISTIC_TOL = 1e-6
RANDOMIZED_TOL = 1e-10
_TIE = 1e-12
_ROUNDOFF = 1e-14
_CHUNK = 1 << 15


@dataclass(frozen=True)
class OracleResult:
    best_accuracy: float
    arg_best: list[ClassifierTable] = field(default_factory=list)
    constraint_gap_used: float = 0.0


def _rate_weights(dist, cells, constraint):
    """Per-cell contribution to the group-0 and group-1 constrained rates."""
    w = np.zeros((2, len(cells)))
    for i, (x, a) in enumerate(cells):
        if constraint is Constraint.EO:
            pos = dist.positive_mass(a)
            if pos <= 0:
                raise ValidationError("UNDEFINED_CONSTRAINT", f"group {a} has no positives")
            w[a, i] = dist.mass(x, a, 1) / pos
        elif constraint is Constraint.DP:
            w[a, i] = dist.mass(x, a) / dist.group_mass(a)
    return w


def enumerate_deterministic(dist: DiscreteJointDistribution, constraint: Constraint | str = Constraint.EO,
                            tol: float = DETERMINISTIC_TOL) -> OracleResult:
    """Scan all 2^n deterministic tables; keep the accuracy maximizers with |gap| <= tol."""
    constraint = Constraint(constraint)
    dist = require_valid(dist)
    cells = dist.cells()
    n = len(cells)
    if n > MAX_DETERMINISTIC_ATOMS:
        raise ValidationError("TOO_LARGE", f"{n} atoms exceeds the 2^{MAX_DETERMINISTIC_ATOMS} scan cap")
    pos = np.array([dist.mass(x, a, 1) for x, a in cells])
    neg = np.array([dist.mass(x, a, 0) for x, a in cells])
    w = _rate_weights(dist, cells, constraint)
    gain = pos - neg
    # tol=0 must still admit tables whose rates tie up to summation round-off
    slack = max(tol, _ROUNDOFF)
    shifts = np.arange(n, dtype=np.int64)

    best, winners = -np.inf, []
    for start in range(0, 1 << n, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, 1 << n), dtype=np.int64)
        bits = ((idx[:, None] >> shifts) & 1).astype(float)
        acc = neg.sum() + bits @ gain
        if constraint is not Constraint.NONE:
            gap = bits @ (w[0] - w[1])
            acc = np.where(np.abs(gap) <= slack, acc, -np.inf)
        top = acc.max()
        if top > best + _TIE:
            best, winners = top, []
        if top >= best - _TIE:
            winners.extend(idx[acc >= best - _TIE].tolist())
    if not np.isfinite(best):
        return OracleResult(float("nan"), [], tol)
    tables = [ClassifierTable({c: float((k >> i) & 1) for i, c in enumerate(cells)}) for k in winners]
    return OracleResult(float(best), tables, tol)


def _group_levels(dist, a):
    cells = sorted((c for c in dist.cells() if c[1] == a), key=lambda c: -dist.eta(*c))
    levels: list[list] = []
    for c in cells:
        e = dist.eta(*c)
        if levels and abs(levels[-1][0] - e) <= _TIE:
            levels[-1][1].append(c)
        else:
            levels.append([e, [c]])
    return [cs for _, cs in levels]


def _segment_candidates(b0, w0, b1, w1, tol):
    """Points of [0,1]^2 on the line b0 + m0 w0 = b1 + m1 w1 where a linear objective can peak."""
    out = []
    for m0 in (0.0, 1.0):
        if w1 > 0:
            out.append((m0, (b0 + m0 * w0 - b1) / w1))
        elif abs(b0 + m0 * w0 - b1) <= tol:
            out += [(m0, 0.0), (m0, 1.0)]
    for m1 in (0.0, 1.0):
        if w0 > 0:
            out.append(((b1 + m1 * w1 - b0) / w0, m1))
        elif abs(b1 + m1 * w1 - b0) <= tol:
            out += [(0.0, m1), (1.0, m1)]
    return [(m0, m1) for m0, m1 in out if -tol <= m0 <= 1 + tol and -tol <= m1 <= 1 + tol]


def enumerate_thresholds(dist: DiscreteJointDistribution, constraint: Constraint | str = Constraint.EO,
                         tol: float = RANDOMIZED_TOL) -> OracleResult:
    """Best randomized group-threshold classifier meeting the constraint to ``tol``.

    In each group the top ``j`` eta levels are accepted and level ``j`` is
    mixed with weight ``m``. For fixed ``(j0, j1)`` the constraint is one line
    in the ``(m0, m1)`` square and accuracy is linear, so only the line's
    endpoints on the square boundary need checking.
    """
    constraint = Constraint(constraint)
    dist = require_valid(dist)
    levels = [_group_levels(dist, a) for a in (0, 1)]
    cells = dist.cells()
    w = _rate_weights(dist, cells, constraint)
    wmap = {c: (w[0, i] + w[1, i]) for i, c in enumerate(cells)}

    def stats(cs):
        pos = sum(dist.mass(x, a, 1) for x, a in cs)
        neg = sum(dist.mass(x, a, 0) for x, a in cs)
        return pos, neg, sum(wmap[c] for c in cs)

    per_group = []
    for a in (0, 1):
        rows = []
        lv_stats = [stats(cs) for cs in levels[a]]
        for j in range(len(levels[a])):
            above = lv_stats[:j]
            acc_base = sum(p for p, _, _ in above) + sum(n for _, n, _ in lv_stats[j:])
            rate_base = sum(r for _, _, r in above)
            p, n, r = lv_stats[j]
            rows.append((j, acc_base, p - n, rate_base, r))
        per_group.append(rows)

    best, winners = -np.inf, []
    for g0, g1 in itertools.product(*per_group):
        j0, acc0, gain0, b0, w0 = g0
        j1, acc1, gain1, b1, w1 = g1
        if constraint is Constraint.NONE:
            cands = [(m0, m1) for m0 in (0.0, 1.0) for m1 in (0.0, 1.0)]
        else:
            cands = _segment_candidates(b0, w0, b1, w1, tol)
        for m0, m1 in cands:
            m0, m1 = min(1.0, max(0.0, m0)), min(1.0, max(0.0, m1))
            if constraint is not Constraint.NONE and abs(b0 + m0 * w0 - b1 - m1 * w1) > tol:
                continue
            acc = acc0 + acc1 + m0 * gain0 + m1 * gain1
            if acc > best + _TIE:
                best, winners = acc, []
            if acc >= best - _TIE:
                winners.append(((j0, m0), (j1, m1)))

    tables, seen = [], set()
    for spec in winners:
        dec = {}
        for a, (j, m) in enumerate(spec):
            for k, cs in enumerate(levels[a]):
                v = 1.0 if k < j else m if k == j else 0.0
                dec.update({c: v for c in cs})
        key = tuple(round(dec[c], 9) for c in cells)
        if key not in seen:
            seen.add(key)
            tables.append(ClassifierTable(dec))
    return OracleResult(float(best), tables, tol)
