"""Exact finite joint distributions over features x group x label.

Everything here is computed by summation over an explicit mass table, so
rates, accuracies and regression-function values are exact up to float
rounding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ValidationError

NORMALIZATION_TOL = 1e-9
IDENTITY_TOL = 1e-12

Cell = tuple[str, int]
Atom = tuple[str, int, int]


@dataclass(frozen=True)
class DiscreteJointDistribution:
    """Probability table ``{(x, a, y): p}`` with ``a, y in {0, 1}``.

    Construction only checks structure (types, duplicates). Use
    :func:`validate` or :func:`require_valid` for the probabilistic
    invariants.
    """

    masses: Mapping[Atom, float]

    def __post_init__(self):
        clean: dict[Atom, float] = {}
        for key, p in self.masses.items():
            x, a, y = key
            if a not in (0, 1) or y not in (0, 1):
                raise ValidationError("BAD_ATOM", f"group/label must be 0 or 1, got {key}")
            clean[(str(x), int(a), int(y))] = float(p)
        object.__setattr__(self, "masses", clean)

    @classmethod
    def from_points(cls, points: Iterable) -> "DiscreteJointDistribution":
        """Build from ``(x, a, y, p)`` tuples or ``{"x","a","y","p"}`` dicts."""
        masses: dict[Atom, float] = {}
        for pt in points:
            if isinstance(pt, Mapping):
                x, a, y, p = pt["x"], pt["a"], pt["y"], pt["p"]
            else:
                x, a, y, p = pt
            key = (str(x), int(a), int(y))
            if key in masses:
                raise ValidationError("DUPLICATE_ATOM", f"{key} appears twice")
            masses[key] = float(p)
        return cls(masses)

    # -- derived quantities -------------------------------------------------

    def mass(self, x: str, a: int, y: int | None = None) -> float:
        if y is None:
            return self.masses.get((x, a, 0), 0.0) + self.masses.get((x, a, 1), 0.0)
        return self.masses.get((x, a, y), 0.0)

    def cells(self) -> list[Cell]:
        """(x, a) pairs with positive marginal mass, in first-seen order."""
        seen: dict[Cell, None] = {}
        for (x, a, _y), p in self.masses.items():
            if p > 0:
                seen.setdefault((x, a), None)
        return list(seen)

    def eta(self, x: str, a: int) -> float:
        m = self.mass(x, a)
        if m <= 0:
            raise ValidationError("UNDEFINED_POINT", f"no mass at {(x, a)}")
        return self.mass(x, a, 1) / m

    def etas(self) -> dict[Cell, float]:
        return {c: self.eta(*c) for c in self.cells()}

    @property
    def total(self) -> float:
        return math.fsum(self.masses.values())

    def group_mass(self, a: int) -> float:
        return math.fsum(p for (_x, g, _y), p in self.masses.items() if g == a)

    def label_mass(self, a: int, y: int) -> float:
        """P(Y=y, A=a)."""
        return math.fsum(p for (_x, g, l), p in self.masses.items() if g == a and l == y)

    def positive_mass(self, a: int) -> float:
        return self.label_mass(a, 1)

    def base_rate(self, a: int) -> float:
        return self.positive_mass(a) / self.group_mass(a)

    @property
    def r(self) -> float:
        """P(A=0)."""
        return self.group_mass(0) / self.total

    def allclose(self, other: "DiscreteJointDistribution", tol: float = 0.0) -> bool:
        """Mass tables agree atom-wise; absent atoms count as zero."""
        keys = set(self.masses) | set(other.masses)
        return all(abs(self.masses.get(k, 0.0) - other.masses.get(k, 0.0)) <= tol for k in keys)

    def normalized(self) -> "DiscreteJointDistribution":
        z = self.total
        return DiscreteJointDistribution({k: p / z for k, p in self.masses.items()})

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "points": [
                {"x": x, "a": a, "y": y, "p": p} for (x, a, y), p in self.masses.items()
            ]
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "DiscreteJointDistribution":
        return cls.from_points(obj["points"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "DiscreteJointDistribution":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ClassifierTable:
    """Acceptance probability per (x, a); 0/1 entries make it deterministic."""

    decisions: Mapping[Cell, float]

    def __post_init__(self):
        clean = {}
        for (x, a), v in self.decisions.items():
            v = float(v)
            if not 0.0 <= v <= 1.0:
                raise ValidationError("BAD_DECISION", f"acceptance {v} at {(x, a)} outside [0,1]")
            clean[(str(x), int(a))] = v
        object.__setattr__(self, "decisions", clean)

    def __getitem__(self, cell: Cell) -> float:
        return self.decisions[cell]

    @property
    def is_deterministic(self) -> bool:
        return all(v in (0.0, 1.0) for v in self.decisions.values())

    def equals(self, other: "ClassifierTable", cells: Iterable[Cell] | None = None,
               tol: float = 1e-9) -> bool:
        """Atom-wise equality of acceptance probabilities."""
        keys = list(cells) if cells is not None else list(self.decisions)
        return all(abs(self.decisions[c] - other.decisions[c]) <= tol for c in keys)

    @classmethod
    def constant(cls, dist: DiscreteJointDistribution, value: float) -> "ClassifierTable":
        return cls({c: value for c in dist.cells()})

    def to_json(self) -> dict:
        return {"decisions": [{"x": x, "a": a, "accept": v} for (x, a), v in self.decisions.items()]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "ClassifierTable":
        return cls({(d["x"], int(d["a"])): float(d["accept"]) for d in obj["decisions"]})


@dataclass(frozen=True)
class ConfusionRates:
    """Group-conditional rates; a rate is ``None`` when its conditioning event has no mass."""

    tpr: tuple[float | None, float | None]
    tnr: tuple[float | None, float | None]
    pr: tuple[float, float]
    accuracy: float

    @property
    def fpr(self):
        return tuple(None if v is None else 1.0 - v for v in self.tnr)

    @property
    def fnr(self):
        return tuple(None if v is None else 1.0 - v for v in self.tpr)

    # flat accessors mirror the usual tpr_0 / tpr_1 naming
    tpr_0 = property(lambda s: s.tpr[0])
    tpr_1 = property(lambda s: s.tpr[1])
    tnr_0 = property(lambda s: s.tnr[0])
    tnr_1 = property(lambda s: s.tnr[1])
    fpr_0 = property(lambda s: s.fpr[0])
    fpr_1 = property(lambda s: s.fpr[1])
    fnr_0 = property(lambda s: s.fnr[0])
    fnr_1 = property(lambda s: s.fnr[1])
    pr_0 = property(lambda s: s.pr[0])
    pr_1 = property(lambda s: s.pr[1])

    def eo_gap(self) -> float:
        if self.tpr[0] is None or self.tpr[1] is None:
            raise ValidationError("UNDEFINED_RATE", "a group has no positives")
        return self.tpr[0] - self.tpr[1]

    def dp_gap(self) -> float:
        return self.pr[0] - self.pr[1]


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    codes: tuple[str, ...]
    total_mass: float
    r: float | None = None
    eta: dict = field(default_factory=dict)
    base_rates: tuple[float | None, float | None] = (None, None)


def validate(dist: DiscreteJointDistribution) -> ValidationReport:
    codes = []
    if any(p < 0 for p in dist.masses.values()):
        codes.append("NEGATIVE_MASS")
    total = dist.total
    if abs(total - 1.0) > NORMALIZATION_TOL:
        codes.append("NOT_NORMALIZED")
    g0, g1 = dist.group_mass(0), dist.group_mass(1)
    if g0 <= 0 or g1 <= 0:
        codes.append("MISSING_GROUP")
    if codes:
        return ValidationReport(False, tuple(codes), total)
    rates = tuple(dist.positive_mass(a) / dist.group_mass(a) for a in (0, 1))
    return ValidationReport(True, (), total, g0 / total, dist.etas(), rates)


def require_valid(dist: DiscreteJointDistribution) -> DiscreteJointDistribution:
    """Raise on the first violated invariant; return the exactly renormalized table."""
    rep = validate(dist)
    if not rep.ok:
        raise ValidationError(rep.codes[0], f"total mass {rep.total_mass!r}")
    return dist.normalized()


def evaluate(dist: DiscreteJointDistribution, clf: ClassifierTable) -> ConfusionRates:
    tp = [0.0, 0.0]
    tn = [0.0, 0.0]
    acc_pos = [0.0, 0.0]
    correct = 0.0
    for cell in dist.cells():
        if cell not in clf.decisions:
            raise ValidationError("UNDEFINED_POINT", f"classifier has no decision at {cell}")
        h = clf.decisions[cell]
        x, a = cell
        p1, p0 = dist.mass(x, a, 1), dist.mass(x, a, 0)
        tp[a] += h * p1
        tn[a] += (1 - h) * p0
        acc_pos[a] += h * (p1 + p0)
        correct += h * p1 + (1 - h) * p0
    tpr, tnr, pr = [], [], []
    for a in (0, 1):
        pos, neg = dist.label_mass(a, 1), dist.label_mass(a, 0)
        tpr.append(tp[a] / pos if pos > 0 else None)
        tnr.append(tn[a] / neg if neg > 0 else None)
        pr.append(acc_pos[a] / dist.group_mass(a))
    return ConfusionRates(tuple(tpr), tuple(tnr), tuple(pr), correct / dist.total)


def accuracy(dist: DiscreteJointDistribution, clf: ClassifierTable) -> float:
    return evaluate(dist, clf).accuracy


def bayes_optimal(dist: DiscreteJointDistribution) -> ClassifierTable:
    """1{eta >= 1/2}, ties accepted."""
    return ClassifierTable({c: 1.0 if e >= 0.5 else 0.0 for c, e in dist.etas().items()})


@dataclass(frozen=True)
class MassartSpec:
    base_classifier: ClassifierTable
    delta_cap: float
    delta_table: Mapping[Cell, float]
    target_base_rate: float


def build_stylized(
    features_per_group: int,
    r: float,
    q: float,
    delta: float,
    delta_table: Mapping[Cell, float] | None = None,
) -> tuple[DiscreteJointDistribution, MassartSpec]:
    """Noisy-label distribution around a base classifier with equal group positivity.

    Features ``x1..xn`` exist in both groups; the first ``n // 2`` are
    labelled 1 by the base classifier and share mass ``p`` of the group, the
    rest share ``1 - p``. ``p`` is solved so the base rate equals ``q``.
    With ``delta_table=None`` the noise is i.i.d. (every atom flips with
    probability ``delta``); otherwise the table gives per-atom noise
    ``delta(x, a) <= delta``.
    """
    n = int(features_per_group)
    if n < 2:
        raise ValidationError("PARAM_OUT_OF_RANGE", "need at least 2 features per group")
    if not (0 < r < 1 and 0 < q < 1):
        raise ValidationError("PARAM_OUT_OF_RANGE", "r and q must lie in (0, 1)")
    if not 0 <= delta < 0.5:
        raise ValidationError("DELTA_OUT_OF_RANGE", f"delta={delta}")
    feats = [f"x{i + 1}" for i in range(n)]
    n_pos = n // 2
    pos_feats, neg_feats = feats[:n_pos], feats[n_pos:]

    if delta_table is None:
        table = {(x, a): float(delta) for a in (0, 1) for x in feats}
    else:
        table = {(str(x), int(a)): float(d) for (x, a), d in delta_table.items()}
        for a in (0, 1):
            for x in feats:
                if (x, a) not in table:
                    raise ValidationError("DELTA_OUT_OF_RANGE", f"missing delta for {(x, a)}")
    for cell, d in table.items():
        if not 0 <= d <= delta + IDENTITY_TOL:
            raise ValidationError("DELTA_OUT_OF_RANGE", f"delta{cell}={d} exceeds cap {delta}")

    positivity = []
    for a in (0, 1):
        d_pos = sum(table[(x, a)] for x in pos_feats) / len(pos_feats)
        d_neg = sum(table[(x, a)] for x in neg_feats) / len(neg_feats)
        positivity.append((q - d_neg) / (1 - d_pos - d_neg))
    p = positivity[0]
    if abs(positivity[0] - positivity[1]) > NORMALIZATION_TOL or not 0 < p < 1:
        raise ValidationError(
            "BASE_RATE_MISMATCH",
            f"delta table needs group positivity {positivity}, cannot match q={q} in both groups",
        )

    masses: dict[Atom, float] = {}
    base: dict[Cell, float] = {}
    for a, g in ((0, r), (1, 1 - r)):
        for x in feats:
            positive = x in pos_feats
            px = g * (p / len(pos_feats) if positive else (1 - p) / len(neg_feats))
            d = table[(x, a)]
            eta = 1 - d if positive else d
            masses[(x, a, 1)] = px * eta
            masses[(x, a, 0)] = px * (1 - eta)
            base[(x, a)] = 1.0 if positive else 0.0
    dist = DiscreteJointDistribution(masses)
    for a in (0, 1):
        if abs(dist.base_rate(a) - q) > NORMALIZATION_TOL:
            raise ValidationError("BASE_RATE_MISMATCH", f"group {a} base rate {dist.base_rate(a)}")
    spec = MassartSpec(ClassifierTable(base), float(delta), table, float(q))
    return dist, spec
