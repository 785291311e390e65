"""Data-bias models as exact table transforms and as linear fractional maps of eta."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Union

from .distribution import ClassifierTable, DiscreteJointDistribution, evaluate, require_valid
from .errors import LabError, ValidationError

LFT_CHECK_TOL = 1e-10


@dataclass(frozen=True)
class LinearFractionalTransform:
    """eta -> (P eta + Q) / (R eta + S)."""

    P: float
    Q: float
    R: float
    S: float

    def __call__(self, eta: float) -> float:
        return (self.P * eta + self.Q) / (self.R * eta + self.S)

    def compose(self, inner: "LinearFractionalTransform") -> "LinearFractionalTransform":
        """self after inner, as a 2x2 matrix product."""
        return LinearFractionalTransform(
            self.P * inner.P + self.Q * inner.R,
            self.P * inner.Q + self.Q * inner.S,
            self.R * inner.P + self.S * inner.R,
            self.R * inner.Q + self.S * inner.S,
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.P, self.Q, self.R, self.S)


IDENTITY = LinearFractionalTransform(1.0, 0.0, 0.0, 1.0)


def is_order_preserving(t: LinearFractionalTransform) -> bool:
    return t.S >= 0 and t.R + t.S >= 0 and t.P * t.S - t.Q * t.R >= 0


@dataclass(frozen=True)
class BlumStanglBias:
    """Under-representation of group 0 (survival beta_p / beta_n) then flips of surviving positives."""

    beta_p: float
    beta_n: float
    nu: float = 0.0

    def __post_init__(self):
        if not (0 < self.beta_p <= 1 and 0 < self.beta_n <= 1):
            raise ValidationError("PARAM_OUT_OF_RANGE", f"survival probs must lie in (0,1]: {self}")
        if not 0 <= self.nu < 1:
            raise ValidationError("PARAM_OUT_OF_RANGE", f"nu must lie in [0,1): {self.nu}")

    @property
    def c(self) -> float:
        return self.beta_n / self.beta_p

    def to_json(self) -> dict:
        return {"model": "blumstangl", "beta_p": self.beta_p, "beta_n": self.beta_n, "nu": self.nu}


@dataclass(frozen=True)
class LabelFlipBias:
    """Group-dependent flips: eps1[a] = P(Y~=0 | Y=1, A=a), eps0[a] = P(Y~=1 | Y=0, A=a)."""

    eps1: tuple[float, float]
    eps0: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "eps1", tuple(float(v) for v in self.eps1))
        object.__setattr__(self, "eps0", tuple(float(v) for v in self.eps0))
        for a in (0, 1):
            e1, e0 = self.eps1[a], self.eps0[a]
            if e1 < 0 or e0 < 0 or not e1 + e0 < 1:
                raise ValidationError("PARAM_OUT_OF_RANGE", f"need 0 <= eps1+eps0 < 1 in group {a}")

    def to_json(self) -> dict:
        return {"model": "labelflip", "eps1": list(self.eps1), "eps0": list(self.eps0)}


@dataclass(frozen=True)
class PriorShiftBias:
    """Shift P(Y=1 | A=a) to ``base_rates[a]`` keeping P(X | Y, A) fixed."""

    base_rates: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "base_rates", tuple(float(v) for v in self.base_rates))
        if not all(0 < b < 1 for b in self.base_rates):
            raise ValidationError("PARAM_OUT_OF_RANGE", "target base rates must lie in (0,1)")

    def to_json(self) -> dict:
        return {"model": "priorshift", "base_rates": list(self.base_rates)}


def prior_shift_alpha(target_base_rate: float, original_base_rate: float) -> float:
    """alpha = P~(Y=0) P(Y=1) / (P~(Y=1) P(Y=0)) within one group."""
    qt, q = target_base_rate, original_base_rate
    if not 0 < q < 1:
        raise ValidationError("PARAM_OUT_OF_RANGE", f"original base rate {q} must lie in (0,1)")
    return (1 - qt) * q / (qt * (1 - q))


BiasModel = Union[BlumStanglBias, LabelFlipBias, PriorShiftBias]


def to_lft(model: BiasModel, group: int, dist: DiscreteJointDistribution | None = None
           ) -> LinearFractionalTransform:
    """Per-group coefficients of the induced map eta -> eta~.

    The prior-shift model needs ``dist`` to read the original base rate.
    """
    if isinstance(model, BlumStanglBias):
        if group == 1:
            return IDENTITY
        c = model.c
        return LinearFractionalTransform(1 - model.nu, 0.0, 1 - c, c)
    if isinstance(model, LabelFlipBias):
        e1, e0 = model.eps1[group], model.eps0[group]
        return LinearFractionalTransform(1 - e1 - e0, e0, 0.0, 1.0)
    if isinstance(model, PriorShiftBias):
        if dist is None:
            raise ValidationError("PARAM_OUT_OF_RANGE", "prior shift needs the source distribution")
        alpha = prior_shift_alpha(model.base_rates[group], dist.base_rate(group))
        return LinearFractionalTransform(1.0, 0.0, 1 - alpha, alpha)
    raise TypeError(f"unknown bias model {model!r}")


def _blum_stangl_masses(dist, m: BlumStanglBias):
    out = {}
    for (x, a, y), p in dist.masses.items():
        if a == 1:
            out[(x, a, y)] = out.get((x, a, y), 0.0) + p
        elif y == 1:
            out[(x, 0, 1)] = out.get((x, 0, 1), 0.0) + m.beta_p * (1 - m.nu) * p
            if m.nu > 0:
                out[(x, 0, 0)] = out.get((x, 0, 0), 0.0) + m.beta_p * m.nu * p
        else:
            out[(x, 0, 0)] = out.get((x, 0, 0), 0.0) + m.beta_n * p
    return out


def _label_flip_masses(dist, m: LabelFlipBias):
    out = {}
    for x, a in dist.cells():
        p1, p0 = dist.mass(x, a, 1), dist.mass(x, a, 0)
        e1, e0 = m.eps1[a], m.eps0[a]
        out[(x, a, 1)] = (1 - e1) * p1 + e0 * p0
        out[(x, a, 0)] = e1 * p1 + (1 - e0) * p0
    return out


def _prior_shift_masses(dist, m: PriorShiftBias):
    out = {}
    for a in (0, 1):
        g = dist.group_mass(a)
        pos, neg = dist.label_mass(a, 1), dist.label_mass(a, 0)
        if pos <= 0 or neg <= 0:
            raise ValidationError("PARAM_OUT_OF_RANGE", f"group {a} needs both labels for a prior shift")
        qt = m.base_rates[a]
        for (x, g_, y), p in dist.masses.items():
            if g_ != a:
                continue
            # P(x | y, a) held fixed, P(y | a) replaced
            out[(x, a, y)] = g * (qt * p / pos if y == 1 else (1 - qt) * p / neg)
    return out


def apply_bias(dist: DiscreteJointDistribution, model: BiasModel) -> DiscreteJointDistribution:
    """Exact biased joint table, globally renormalized to mass 1."""
    dist = require_valid(dist)
    if isinstance(model, BlumStanglBias):
        raw = _blum_stangl_masses(dist, model)
    elif isinstance(model, LabelFlipBias):
        raw = _label_flip_masses(dist, model)
    elif isinstance(model, PriorShiftBias):
        raw = _prior_shift_masses(dist, model)
    else:
        raise TypeError(f"unknown bias model {model!r}")
    biased = DiscreteJointDistribution(raw)
    if biased.group_mass(0) <= 0 or biased.group_mass(1) <= 0:
        raise ValidationError("DEGENERATE_OUTPUT", "a group lost all of its mass")
    biased = biased.normalized()

    maps = {a: to_lft(model, a, dist) for a in (0, 1)}
    for (x, a), e in dist.etas().items():
        if biased.mass(x, a) <= 0:
            continue
        got, want = biased.eta(x, a), maps[a](e)
        if abs(got - want) > LFT_CHECK_TOL:
            raise LabError("INTERNAL", f"eta~ mismatch at {(x, a)}: table {got}, transform {want}")
    return biased


def survival_normalizer(dist: DiscreteJointDistribution, model: BlumStanglBias) -> float:
    """Total mass kept by the Blum-Stangl filter (before renormalization)."""
    dist = dist.normalized()
    return dist.group_mass(1) + sum(
        model.beta_p * p if y == 1 else model.beta_n * p
        for (_x, a, y), p in dist.masses.items() if a == 0
    )


# -- rates under bias ---------------------------------------------------------


def label_coupling(dist: DiscreteJointDistribution, model: BiasModel, a: int) -> dict[tuple[int, int], float]:
    """Unnormalized P(Y=y, Y~=y~, A=a) over the surviving population, keyed by (y, y~).

    Every model acts on labels independently of x within a group, which is
    what makes the rate identity below exact.
    """
    dist = require_valid(dist)
    p1, p0 = dist.label_mass(a, 1), dist.label_mass(a, 0)
    if isinstance(model, BlumStanglBias):
        if a == 1:
            return {(1, 1): p1, (1, 0): 0.0, (0, 1): 0.0, (0, 0): p0}
        bp = model.beta_p
        return {(1, 1): bp * (1 - model.nu) * p1, (1, 0): bp * model.nu * p1,
                (0, 1): 0.0, (0, 0): model.beta_n * p0}
    if isinstance(model, LabelFlipBias):
        e1, e0 = model.eps1[a], model.eps0[a]
        return {(1, 1): (1 - e1) * p1, (1, 0): e1 * p1, (0, 1): e0 * p0, (0, 0): (1 - e0) * p0}
    if isinstance(model, PriorShiftBias):
        g, qt = dist.group_mass(a), model.base_rates[a]
        return {(1, 1): g * qt, (1, 0): 0.0, (0, 1): 0.0, (0, 0): g * (1 - qt)}
    raise TypeError(f"unknown bias model {model!r}")


@dataclass(frozen=True)
class RateIdentityReport:
    """Biased rates measured on the biased table (``measured``) and rebuilt from clean rates (``mixed``)."""

    measured_tpr: tuple[float | None, float | None]
    mixed_tpr: tuple[float | None, float | None]
    measured_tnr: tuple[float | None, float | None]
    mixed_tnr: tuple[float | None, float | None]

    @staticmethod
    def _resid(u, v) -> float:
        diffs = [abs(x - y) for x, y in zip(u, v) if x is not None and y is not None]
        return max(diffs, default=0.0)

    @property
    def tpr_residual(self) -> float:
        return self._resid(self.measured_tpr, self.mixed_tpr)

    @property
    def tnr_residual(self) -> float:
        return self._resid(self.measured_tnr, self.mixed_tnr)

    @property
    def max_residual(self) -> float:
        return max(self.tpr_residual, self.tnr_residual)


def _mix(w_same, w_other, rate_same, rate_other):
    tot = w_same + w_other
    if tot <= 0 or rate_same is None:
        return None
    other = 0.0 if w_other == 0 else rate_other
    if other is None:
        return None
    return (w_same * rate_same + w_other * other) / tot


def biased_rate_identity(dist: DiscreteJointDistribution, model: BiasModel, clf: ClassifierTable
                         ) -> RateIdentityReport:
    """TPR~ = P(Y=1|Y~=1) TPR + P(Y=0|Y~=1) FPR, and the TNR analogue, per group."""
    clean = evaluate(dist, clf)
    measured = evaluate(apply_bias(dist, model), clf)
    tpr, tnr = [], []
    for a in (0, 1):
        w = label_coupling(dist, model, a)
        tpr.append(_mix(w[(1, 1)], w[(0, 1)], clean.tpr[a], clean.fpr[a]))
        tnr.append(_mix(w[(0, 0)], w[(1, 0)], clean.tnr[a], clean.fnr[a]))
    return RateIdentityReport(measured.tpr, tuple(tpr), measured.tnr, tuple(tnr))


def eo_feasible_set_equal(dist: DiscreteJointDistribution, model: BiasModel,
                          classifiers, tol: float = 1e-10) -> bool:
    """Is every classifier EO-fair on the biased table exactly when it is EO-fair on ``dist``?"""
    biased = apply_bias(dist, model)
    for clf in classifiers:
        clean_fair = abs(evaluate(dist, clf).eo_gap()) <= tol
        biased_fair = abs(evaluate(biased, clf).eo_gap()) <= tol
        if clean_fair != biased_fair:
            return False
    return True


def model_from_json(obj: Mapping) -> BiasModel:
    kind = obj.get("model")
    if kind == "blumstangl":
        return BlumStanglBias(float(obj["beta_p"]), float(obj["beta_n"]), float(obj.get("nu", 0.0)))
    if kind == "labelflip":
        return LabelFlipBias(tuple(obj["eps1"]), tuple(obj["eps0"]))
    if kind == "priorshift":
        return PriorShiftBias(tuple(obj["base_rates"]))
    raise ValidationError("BAD_MODEL", f"unknown bias model {kind!r}")


def load_model(path) -> BiasModel:
    return model_from_json(json.loads(Path(path).read_text()))
