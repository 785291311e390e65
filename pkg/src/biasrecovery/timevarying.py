"""Repeated Blum-Stangl bias: composed transform, horizon conditions, step-by-step pipeline."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .bias import BlumStanglBias, LinearFractionalTransform, apply_bias
from .distribution import DiscreteJointDistribution, bayes_optimal, require_valid
from .errors import InfeasibleError, ValidationError
from .recovery import BOUNDARY_TOL, DECISION_TOL, INDETERMINATE, RecoveryReport, _report
from .solver import Constraint, solve_fair

NECESSARY_HOLD = "NECESSARY-HOLD"
NECESSARY_FAIL = "NECESSARY-FAIL"
SUFFICIENT_HOLD = "SUFFICIENT-HOLD"
SUFFICIENT_FAIL = "SUFFICIENT-FAIL"
IMPOSSIBLE = "IMPOSSIBLE"
TRIVIAL = "TRIVIALLY-RECOVERABLE"


@dataclass(frozen=True)
class Step:
    beta_p: float
    beta_n: float
    nu: float = 0.0

    @property
    def c(self) -> float:
        return self.beta_n / self.beta_p

    def as_bias(self) -> BlumStanglBias:
        return BlumStanglBias(self.beta_p, self.beta_n, self.nu)


@dataclass(frozen=True)
class BiasSchedule:
    """Per-step bias parameters plus worst-case bounds (smallest betas, largest nu)."""

    steps: tuple[Step, ...]
    bounds: Step | None = None

    def __post_init__(self):
        steps = tuple(s if isinstance(s, Step) else Step(*s) for s in self.steps)
        object.__setattr__(self, "steps", steps)
        if not steps:
            raise ValidationError("PARAM_OUT_OF_RANGE", "schedule needs at least one step")
        for s in steps:
            s.as_bias()
        if self.bounds is None:
            object.__setattr__(self, "bounds", Step(min(s.beta_p for s in steps),
                                                    min(s.beta_n for s in steps),
                                                    max(s.nu for s in steps)))
        b = self.bounds
        if not b.nu < 0.5:
            raise ValidationError("PARAM_OUT_OF_RANGE", f"nu bound {b.nu} must be below 1/2")
        for s in steps:
            if s.beta_p < b.beta_p - 1e-12 or s.beta_n < b.beta_n - 1e-12 or s.nu > b.nu + 1e-12:
                raise ValidationError("PARAM_OUT_OF_RANGE", f"step {s} violates bounds {b}")

    @classmethod
    def uniform(cls, beta_p: float, beta_n: float, nu: float, t: int) -> "BiasSchedule":
        return cls(tuple(Step(beta_p, beta_n, nu) for _ in range(t)))

    def __len__(self) -> int:
        return len(self.steps)

    def prefix(self, t: int) -> "BiasSchedule":
        return BiasSchedule(self.steps[:t], self.bounds)

    def to_json(self) -> dict:
        enc = lambda s: {"beta_p": s.beta_p, "beta_n": s.beta_n, "nu": s.nu}  # noqa: E731
        return {"steps": [enc(s) for s in self.steps], "bounds": enc(self.bounds)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "BiasSchedule":
        dec = lambda d: Step(float(d["beta_p"]), float(d["beta_n"]), float(d.get("nu", 0.0)))  # noqa: E731
        bounds = dec(obj["bounds"]) if obj.get("bounds") else None
        return cls(tuple(dec(s) for s in obj["steps"]), bounds)

    @classmethod
    def load(cls, path) -> "BiasSchedule":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ComposedTransform:
    """Group-0 map eta -> eta / (R eta + S) after all steps."""

    R: float
    S: float

    def __call__(self, eta: float) -> float:
        return eta / (self.R * eta + self.S)

    def as_lft(self) -> LinearFractionalTransform:
        return LinearFractionalTransform(1.0, 0.0, self.R, self.S)


def compose(schedule: BiasSchedule) -> ComposedTransform:
    """Fold the steps: 1/eta_t = a_t + b_t / eta_{t-1}, a = (1-c)/(1-nu), b = c/(1-nu)."""
    R, S = 0.0, 1.0
    for s in schedule.steps:
        if s.nu >= 1:
            raise ValidationError("DIVIDE_BY_ZERO", "nu = 1 collapses every positive")
        a, b = (1 - s.c) / (1 - s.nu), s.c / (1 - s.nu)
        R, S = a + b * R, b * S
    return ComposedTransform(R, S)


def _check(r, delta):
    if not 0 < r < 1:
        raise ValidationError("PARAM_OUT_OF_RANGE", f"r={r} must lie in (0,1)")
    if not 0 < delta < 0.5:
        raise ValidationError("PARAM_OUT_OF_RANGE", f"delta={delta} must lie in (0, 1/2)")


def _geometric(beta_p: float, nu: float, t: int) -> float:
    """(1 - beta_p) (1 - x^t) / (1 - x) with x = beta_p (1 - nu); zero when beta_p = 1."""
    x = beta_p * (1 - nu)
    if beta_p == 1:
        return 0.0
    if x == 1:
        return (1 - beta_p) * t
    return (1 - beta_p) * (1 - x ** t) / (1 - x)


def check_infinite_horizon(r: float, delta: float, beta_p: float, beta_n: float, nu: float
                           ) -> RecoveryReport:
    """Necessary conditions for recovery as the same bias repeats forever."""
    _check(r, delta)
    BlumStanglBias(beta_p, beta_n, nu)
    if beta_n < 1:
        return RecoveryReport({}, {}, False, IMPOSSIBLE, -math.inf,
                              notes={"reason": "eta(x, 0) -> 0 for every x when beta_n < 1"})
    if beta_p * (1 - nu) == 1:
        return RecoveryReport({}, {}, True, TRIVIAL, math.inf, notes={"reason": "no bias"})
    mid = nu * beta_p / (1 - beta_p * (1 - nu))
    lo = 1 - (1 - 2 * delta) / ((1 - delta) * r)
    hi = 1 + (1 - 2 * delta) / (delta * r)
    rep = _report({"lower": mid - lo, "upper": hi - mid}, labels=(NECESSARY_HOLD, NECESSARY_FAIL))
    rep.notes.update({"middle": mid, "bounds": [lo, hi]})
    return rep


def finite_horizon_eo_values(r: float, delta: float, beta_p: float, beta_n: float, nu: float, t: int
                             ) -> tuple[float, float]:
    """(LHS - RHS) of both inequalities; positive means the condition holds."""
    lhs1 = (1 - 2 * delta) * (1 - r) / ((1 - delta) * r) - delta / (1 - delta)
    rhs1 = 1 / beta_n ** t - 2 * beta_p ** t * (1 - nu) ** t
    lhs2 = (1 - 2 * delta) * (1 - r) / (delta * r)
    rhs2 = (1 - nu) ** t * beta_p ** t * _geometric(beta_p, nu, t) - beta_n ** t / delta - 2
    return lhs1 - rhs1, lhs2 - rhs2


def check_finite_horizon_eo(r: float, delta: float, bounds: Step, t: int) -> RecoveryReport:
    """Necessary conditions for EO recovery after ``t`` bounded steps."""
    _check(r, delta)
    if t < 1:
        raise ValidationError("PARAM_OUT_OF_RANGE", "t must be at least 1")
    if not bounds.nu < 0.5:
        raise ValidationError("PARAM_OUT_OF_RANGE", "nu bound must be below 1/2")
    bounds.as_bias()
    n1, n2 = finite_horizon_eo_values(r, delta, bounds.beta_p, bounds.beta_n, bounds.nu, t)
    return _report({"N1": n1, "N2": n2}, labels=(NECESSARY_HOLD, NECESSARY_FAIL))


def check_finite_horizon_dp(delta: float, bounds: Step, t: int) -> RecoveryReport:
    """The two DP inequalities for ``t`` bounded steps (stated as sufficient)."""
    if not 0 < delta < 0.5:
        raise ValidationError("PARAM_OUT_OF_RANGE", f"delta={delta} must lie in (0, 1/2)")
    if t < 1:
        raise ValidationError("PARAM_OUT_OF_RANGE", "t must be at least 1")
    if not bounds.nu < 0.5:
        raise ValidationError("PARAM_OUT_OF_RANGE", "nu bound must be below 1/2")
    bounds.as_bias()
    bp, bn, nu = bounds.beta_p, bounds.beta_n, bounds.nu
    g = -_geometric(bp, nu, t)  # (beta_p - 1) * ratio
    x_t = bp ** t * (1 - nu) ** t
    shrink = (1 - bn ** t) / bn ** t
    d1 = (1 - 3 * delta) * g - 2 * delta - (1 - delta) * (shrink - 2 * x_t)
    d2 = 1 + delta * (g - 2 / bn ** t - (2 * delta - 1) * shrink) - 2 * (delta - 1)
    return _report({"DP1": d1, "DP2": d2}, labels=(SUFFICIENT_HOLD, SUFFICIENT_FAIL))


def horizon_constant(r: float, delta: float) -> float:
    return (1 - 2 * delta) * (1 - r) / ((1 - delta) * r) - delta / (1 - delta) + 2


def max_recovery_horizon(r: float, delta: float, beta_n: float) -> int:
    """Largest integer t with t < log K / log(1 / beta_n); 0 when K <= 1."""
    _check(r, delta)
    if beta_n == 1:
        raise ValidationError("UNBOUNDED", "beta_n = 1 gives no finite horizon")
    if not 0 < beta_n < 1:
        raise ValidationError("PARAM_OUT_OF_RANGE", f"beta_n={beta_n} must lie in (0,1)")
    k = horizon_constant(r, delta)
    if k <= 1:
        return 0
    return max(0, math.ceil(math.log(k) / math.log(1 / beta_n)) - 1)


# -- pipeline -----------------------------------------------------------------


@dataclass(frozen=True)
class PipelineStep:
    t: int
    recovered: bool
    conditions: RecoveryReport | None
    lambda_star: float | None

    @property
    def n1(self) -> bool | None:
        return None if self.conditions is None else list(self.conditions.satisfied.values())[0]

    @property
    def n2(self) -> bool | None:
        return None if self.conditions is None else list(self.conditions.satisfied.values())[1]

    def values(self) -> tuple[float | None, float | None]:
        if self.conditions is None:
            return None, None
        v = list(self.conditions.condition_values.values())
        return v[0], v[1]


def run_pipeline(dist: DiscreteJointDistribution, schedule: BiasSchedule,
                 constraint: Constraint | str = Constraint.EO, delta: float | None = None
                 ) -> list[PipelineStep]:
    """Apply the steps one at a time, re-solving after each and comparing with the Bayes classifier.

    With ``delta`` given (a stylized input), each step is paired with the
    horizon conditions evaluated at the schedule bounds.
    """
    constraint = Constraint(constraint)
    dist = require_valid(dist)
    target = bayes_optimal(dist)
    cur = dist
    out = []
    for t, step in enumerate(schedule.steps, start=1):
        cur = apply_bias(cur, step.as_bias())
        try:
            sol = solve_fair(cur, constraint)
            ok = sol.table.equals(target, cells=dist.cells(), tol=DECISION_TOL)
            lam = sol.lambda_star
        except InfeasibleError:
            ok, lam = False, None
        cond = None
        if delta is not None:
            if constraint is Constraint.DP:
                cond = check_finite_horizon_dp(delta, schedule.bounds, t)
            else:
                cond = check_finite_horizon_eo(dist.r, delta, schedule.bounds, t)
        out.append(PipelineStep(t, ok, cond, lam))
    return out


def pipeline_csv(steps: Sequence[PipelineStep]) -> str:
    fmt = lambda v: "" if v is None else ("1" if v else "0") if isinstance(v, bool) else f"{v:.9g}"  # noqa: E731
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "recovered", "n1", "n2", "n1_value", "n2_value"])
    for s in steps:
        v1, v2 = s.values()
        w.writerow([s.t, fmt(s.recovered), fmt(s.n1), fmt(s.n2), fmt(v1), fmt(v2)])
    return buf.getvalue()
