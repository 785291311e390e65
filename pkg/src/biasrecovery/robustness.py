"""Near-identity stability of the best member of a finite hypothesis class, and recovery from it.

A member ``h*`` is eps-robust when it stays the accuracy maximizer after
every group-wise perturbation ``eta -> (P eta + Q) / (R eta + 1)`` with
``|P - 1|, |Q|, |R| <= eps``. The box is a continuum, so the check here is
sampled: all 27 x 27 sign corners plus uniform interior draws. A FAIL is a
certificate; a PASS is evidence only.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bias import BlumStanglBias, LinearFractionalTransform, apply_bias, is_order_preserving
from .distribution import ClassifierTable, DiscreteJointDistribution, evaluate, require_valid
from .errors import InfeasibleError, ValidationError
from .recovery import RecoveryReport, _report

TIE_TOL = 1e-12
FAIR_TOL = 1e-9
BASE_RATE_TOL = 1e-9

SAMPLED = "SAMPLED"
PASS = "PASS"
FAIL = "FAIL"


@dataclass(frozen=True)
class RobustnessBox:
    epsilon: float

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise ValidationError("PARAM_OUT_OF_RANGE", f"epsilon={self.epsilon} must lie in [0, 1)")

    def _ok(self, t: LinearFractionalTransform) -> bool:
        return t.P * t.S - t.Q * t.R >= 0

    def group_corners(self) -> list[LinearFractionalTransform]:
        e = self.epsilon
        steps = (-e, 0.0, e) if e > 0 else (0.0,)
        out = [LinearFractionalTransform(1 + dp, dq, dr, 1.0) for dp, dq, dr in itertools.product(steps, repeat=3)]
        return [t for t in out if self._ok(t)]

    def corners(self) -> list[tuple[LinearFractionalTransform, LinearFractionalTransform]]:
        g = self.group_corners()
        return list(itertools.product(g, g))

    def sample(self, rng: np.random.Generator, n: int) -> list[tuple[LinearFractionalTransform, LinearFractionalTransform]]:
        e = self.epsilon
        out = []
        while len(out) < n:
            u = rng.uniform(-e, e, size=(2, 3)) if e > 0 else np.zeros((2, 3))
            pair = tuple(LinearFractionalTransform(1 + u[a, 0], u[a, 1], u[a, 2], 1.0) for a in (0, 1))
            if all(self._ok(t) for t in pair):
                out.append(pair)
        return out


@dataclass(frozen=True)
class FiniteHypothesisClass:
    members: tuple[ClassifierTable, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValidationError("EMPTY_CLASS", "hypothesis class has no members")
        if not all(m.is_deterministic for m in self.members):
            raise ValidationError("NOT_DETERMINISTIC", "hypothesis members must be 0/1 tables")

    @classmethod
    def all_tables(cls, dist: DiscreteJointDistribution) -> "FiniteHypothesisClass":
        cells = dist.cells()
        return cls(tuple(ClassifierTable(dict(zip(cells, map(float, bits))))
                         for bits in itertools.product((0, 1), repeat=len(cells))))

    def matrix(self, cells) -> np.ndarray:
        try:
            return np.array([[m[c] for c in cells] for m in self.members])
        except KeyError as exc:
            raise ValidationError("UNDEFINED_POINT", f"member misses support point {exc}") from None

    def to_json(self) -> list:
        return [m.to_json() for m in self.members]

    @classmethod
    def from_json(cls, obj: Sequence) -> "FiniteHypothesisClass":
        return cls(tuple(ClassifierTable.from_json(m) for m in obj))

    @classmethod
    def load(cls, path) -> "FiniteHypothesisClass":
        return cls.from_json(json.loads(Path(path).read_text()))


def _accuracies(dist, cells, M, etas: np.ndarray) -> np.ndarray:
    """Member accuracies (k x m) for k rows of per-cell eta values."""
    p = np.array([dist.mass(*c) for c in cells])
    return (p * (1 - etas)).sum(axis=1, keepdims=True) + (p * (2 * etas - 1)) @ M.T


def best_members(dist: DiscreteJointDistribution, H: FiniteHypothesisClass) -> tuple[list[int], float]:
    dist = require_valid(dist)
    cells = dist.cells()
    eta = np.array([[dist.eta(*c) for c in cells]])
    acc = _accuracies(dist, cells, H.matrix(cells), eta)[0]
    top = acc.max()
    return [int(i) for i in np.flatnonzero(acc >= top - TIE_TOL)], float(top)


def unique_best(dist: DiscreteJointDistribution, H: FiniteHypothesisClass) -> int:
    idx, _ = best_members(dist, H)
    if len(idx) > 1:
        raise ValidationError("TIED_OPTIMUM", f"{len(idx)} members tie for the best accuracy")
    return idx[0]


@dataclass(frozen=True)
class RobustnessVerdict:
    status: str
    label: str
    epsilon: float
    checked: int
    best_index: int
    violation: tuple[LinearFractionalTransform, LinearFractionalTransform] | None = None
    violation_winner: int | None = None
    out_of_range_atoms: int = 0

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_json(self) -> dict:
        out = {"status": self.status, "label": self.label, "epsilon": self.epsilon,
               "checked": self.checked, "best_index": self.best_index,
               "out_of_range_atoms": self.out_of_range_atoms}
        if self.violation is not None:
            out["violation"] = [list(t.as_tuple()) for t in self.violation]
            out["violation_winner"] = self.violation_winner
        return out


def check_eps_robust(dist: DiscreteJointDistribution, H: FiniteHypothesisClass, epsilon: float,
                     samples: int = 1000, seed: int | None = None) -> RobustnessVerdict:
    """Sampled eps-robustness of the unique best member of ``H``.

    Corners are scanned first, then ``samples`` interior draws from a
    generator seeded with ``seed`` (required when ``samples > 0``). A tie
    with the best member under a perturbation counts as a violation.
    """
    dist = require_valid(dist)
    box = RobustnessBox(epsilon)
    if samples > 0 and seed is None:
        raise ValidationError("MISSING_SEED", "interior sampling needs an explicit seed")
    best = unique_best(dist, H)
    cells = dist.cells()
    M = H.matrix(cells)
    groups = np.array([a for _, a in cells])
    base = np.array([dist.eta(*c) for c in cells])

    pairs = box.corners()
    if samples > 0:
        pairs += box.sample(np.random.default_rng(seed), samples)

    out_of_range = 0
    for start in range(0, len(pairs), 4096):
        chunk = pairs[start:start + 4096]
        coef = np.array([[t.as_tuple() for t in pair] for pair in chunk])  # k x 2 x 4
        P, Q, R, S = (coef[:, groups, i] for i in range(4))
        etas = (P * base + Q) / (R * base + S)
        out_of_range += int(((etas < 0) | (etas > 1)).any(axis=1).sum())
        acc = _accuracies(dist, cells, M, etas)
        mine = acc[:, best].copy()
        acc[:, best] = -np.inf
        bad = np.flatnonzero(acc.max(axis=1) >= mine - TIE_TOL)
        if bad.size:
            k = int(bad[0])
            return RobustnessVerdict(FAIL, SAMPLED, epsilon, start + k + 1, best, chunk[k],
                                     int(acc[k].argmax()), out_of_range)
    return RobustnessVerdict(PASS, SAMPLED, epsilon, len(pairs), best, out_of_range_atoms=out_of_range)


def check_robust_recovery(r: float, nu: float, epsilon: float, beta_p: float, beta_n: float,
                          include_gate: bool = True) -> RecoveryReport:
    """Bias conditions under which an eps-robust, EO-fair best member is recovered.

    All three conditions are non-strict. ``include_gate=False`` drops the
    ``(1-eps) beta_n <= beta_p <= (1+eps) beta_n`` band and keeps only the two
    linear conditions.
    """
    if not 0 < r < 1:
        raise ValidationError("PARAM_OUT_OF_RANGE", f"r={r} must lie in (0,1)")
    if epsilon < 0:
        raise ValidationError("PARAM_OUT_OF_RANGE", f"epsilon={epsilon} must be nonnegative")
    BlumStanglBias(beta_p, beta_n, nu)
    e1 = r * ((1 - nu) * beta_p - (1 - epsilon) * beta_n) + epsilon * (1 - r)
    e2 = r * ((1 + epsilon) * beta_n - (1 - nu) * beta_p) + epsilon * (1 - r)
    values = {"E1": e1, "E2": e2}
    if include_gate:
        values["gate_low"] = beta_p - (1 - epsilon) * beta_n
        values["gate_high"] = (1 + epsilon) * beta_n - beta_p
    return _report(values, strict=False)


def group_lfts(r: float, q: float, beta_p: float, beta_n: float, nu: float, lam: float
               ) -> tuple[LinearFractionalTransform, LinearFractionalTransform]:
    """The per-group transforms whose accuracy argmax equals the biased Lagrangian argmax at ``lam``."""
    c = beta_n / beta_p
    t0 = LinearFractionalTransform((1 - nu) / c + lam / (2 * beta_n * r * q), 0.0, (1 - c) / c, 1.0)
    t1 = LinearFractionalTransform(1 - lam / (2 * (1 - r) * q), 0.0, 0.0, 1.0)
    return t0, t1


@dataclass(frozen=True)
class RobustEndToEnd:
    theory: RecoveryReport
    robust: RobustnessVerdict
    empirical: bool
    best_index: int
    fair_best: list[int]
    lagrangian_witness: float | None = None
    notes: dict = field(default_factory=dict)


def _eo_gaps(dist, cells, M) -> np.ndarray:
    w = np.zeros((2, len(cells)))
    for i, (x, a) in enumerate(cells):
        w[a, i] = dist.mass(x, a, 1) / dist.positive_mass(a)
    return M @ (w[0] - w[1])


def lagrangian_scan(biased: DiscreteJointDistribution, H: FiniteHypothesisClass, target: int,
                    lams: np.ndarray) -> float | None:
    """A multiplier at which ``target`` uniquely maximizes accuracy + lam * TPR gap on ``biased``."""
    cells = biased.cells()
    M = H.matrix(cells)
    eta = np.array([[biased.eta(*c) for c in cells]])
    acc = _accuracies(biased, cells, M, eta)[0]
    gaps = _eo_gaps(biased, cells, M)
    for lam in lams:
        obj = acc + lam * gaps
        mine = obj[target]
        obj[target] = -np.inf
        if obj.max() < mine - TIE_TOL:
            return float(lam)
    return None


def verify_robust_end_to_end(dist: DiscreteJointDistribution, H: FiniteHypothesisClass, epsilon: float,
                             bias: BlumStanglBias, seed: int, samples: int = 1000) -> RobustEndToEnd:
    """Closed-form verdict next to the EO-optimal member of ``H`` on the biased table."""
    dist = require_valid(dist)
    q0, q1 = dist.base_rate(0), dist.base_rate(1)
    if abs(q0 - q1) > BASE_RATE_TOL:
        raise ValidationError("BASE_RATE_MISMATCH", f"group base rates differ: {q0} vs {q1}")
    best = unique_best(dist, H)
    rates = evaluate(dist, H.members[best])
    if abs(rates.eo_gap()) > FAIR_TOL:
        raise ValidationError("NOT_APPLICABLE", "best member is not EO-fair on the source distribution")
    robust = check_eps_robust(dist, H, epsilon, samples, seed)
    theory = check_robust_recovery(dist.r, bias.nu, epsilon, bias.beta_p, bias.beta_n)

    biased = apply_bias(dist, bias)
    cells = biased.cells()
    M = H.matrix(cells)
    fair = np.abs(_eo_gaps(biased, cells, M)) <= FAIR_TOL
    if not fair.any():
        raise InfeasibleError("NO_FAIR_MEMBER", "no member is EO-fair on the biased distribution")
    eta = np.array([[biased.eta(*c) for c in cells]])
    acc = np.where(fair, _accuracies(biased, cells, M, eta)[0], -np.inf)
    winners = [int(i) for i in np.flatnonzero(acc >= acc.max() - TIE_TOL)]
    witness = lagrangian_scan(biased, H, best, np.linspace(-10, 10, 2001))
    return RobustEndToEnd(theory, robust, winners == [best], best, winners, witness)
