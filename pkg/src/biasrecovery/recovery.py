"""Closed-form recovery conditions under Blum-Stangl bias and their end-to-end check.

The closed forms are written in the unnormalized convention where the biased
masses are not divided by the survival normalizer ``Z``; a multiplier from
:func:`biasrecovery.solver.solve_fair` on the renormalized table equals the
closed-form multiplier divided by ``Z``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .bias import BlumStanglBias, apply_bias, survival_normalizer
from .distribution import DiscreteJointDistribution, MassartSpec, bayes_optimal
from .errors import InfeasibleError, ValidationError
from .solver import Constraint, LambdaSolution, solve_fair

BOUNDARY_TOL = 1e-9
DECISION_TOL = 1e-9

RECOVERABLE = "RECOVERABLE"
NOT_RECOVERABLE = "NOT_RECOVERABLE"
INDETERMINATE = "INDETERMINATE"


@dataclass(frozen=True)
class RecoveryReport:
    """Evaluated condition left-hand sides with their verdict.

    ``margin`` is the smallest distance of a condition to its violation
    boundary (negative when violated). ``status`` is ``INDETERMINATE`` when
    some condition sits within ``BOUNDARY_TOL`` of its boundary.
    """

    condition_values: dict[str, float]
    satisfied: dict[str, bool]
    verdict: bool
    status: str
    margin: float
    lambda_interval: tuple[float, float] | None = None
    notes: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "verdict": self.verdict,
            "conditions": self.condition_values,
            "satisfied": self.satisfied,
            "margin": self.margin,
            "lambda_interval": list(self.lambda_interval) if self.lambda_interval else None,
            **self.notes,
        }


def _report(values: dict[str, float], strict: bool = True, lam=None, notes=None,
            labels=(RECOVERABLE, NOT_RECOVERABLE)) -> RecoveryReport:
    sat = {k: (v > 0 if strict else v >= 0) for k, v in values.items()}
    verdict = all(sat.values())
    margin = min(values.values())
    if any(abs(v) < BOUNDARY_TOL for v in values.values()) and strict:
        status = INDETERMINATE
    else:
        status = labels[0] if verdict else labels[1]
    return RecoveryReport(values, sat, verdict, status, margin, lam, notes or {})


def _unit_open(name, v):
    if not 0 < v < 1:
        raise ValidationError("PARAM_OUT_OF_RANGE", f"{name}={v} must lie in (0,1)")


def check_bias_params(beta_p: float, beta_n: float, nu: float) -> None:
    BlumStanglBias(beta_p, beta_n, nu)


def check_params(r: float, q: float, delta: float, beta_p: float, beta_n: float, nu: float) -> None:
    _unit_open("r", r)
    _unit_open("q", q)
    if not 0 < delta < 0.5:
        raise ValidationError("PARAM_OUT_OF_RANGE", f"delta={delta} must lie in (0, 1/2)")
    check_bias_params(beta_p, beta_n, nu)


def _intersect(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float] | None:
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    return (lo, hi) if lo < hi else None


def eo_conditions(r: float, delta: float, beta_p: float, beta_n: float, nu: float) -> tuple[float, float]:
    base = (1 - r) * (1 - 2 * delta)
    c1 = base + r * ((1 - delta) * beta_p * (1 - 2 * nu) - delta * beta_n)
    c2 = base + r * ((1 - delta) * beta_n - delta * beta_p * (1 - 2 * nu))
    return c1, c2


def eo_lambda_windows(r, q, delta, beta_p, beta_n, nu):
    """Multipliers that put each group's threshold on eta strictly inside (delta, 1 - delta)."""
    c = beta_n / beta_p
    g1 = (-(1 - 2 * delta) * (1 - r) * q / delta, (1 - 2 * delta) * (1 - r) * q / (1 - delta))
    k = beta_n * r * q
    g0 = (k * (delta / (1 - delta) - (1 - 2 * nu) / c), k * ((1 - delta) / delta - (1 - 2 * nu) / c))
    return g0, g1


def check_eo_recovery(r: float, q: float, delta: float, beta_p: float, beta_n: float,
                      nu: float = 0.0) -> RecoveryReport:
    """Does the EO-optimal classifier on the biased data equal the Bayes classifier?

    Exact (iff) for i.i.d. noise, sufficient for bounded (Massart) noise.
    """
    check_params(r, q, delta, beta_p, beta_n, nu)
    c1, c2 = eo_conditions(r, delta, beta_p, beta_n, nu)
    g0, g1 = eo_lambda_windows(r, q, delta, beta_p, beta_n, nu)
    return _report({"C1": c1, "C2": c2}, lam=_intersect(g0, g1))


def dp_conditions(r: float, delta: float, beta_p: float, beta_n: float, nu: float) -> tuple[float, float]:
    d1 = (beta_p * (1 - delta) * (1 - 2 * delta - 2 * r * (nu - delta))
          + delta * beta_n * (1 - 2 * delta - 2 * r * (1 - delta)))
    d2 = (beta_p * delta * (1 - 2 * r * (1 - nu) - 2 * delta * (1 - r))
          + (1 - delta) * beta_n * (1 - 2 * delta * (1 - r)))
    return d1, d2


def dp_lambda_windows(r, delta, beta_p, beta_n, nu):
    c = beta_n / beta_p
    g1 = ((2 * delta - 1) * (1 - r), (1 - 2 * delta) * (1 - r))
    g0 = (r * (1 - 2 * (1 - delta) * (1 - nu) / (c + (1 - c) * (1 - delta))),
          r * (1 - 2 * delta * (1 - nu) / (delta * (1 - c) + c)))
    return g0, g1


def check_dp_recovery(r: float, q: float, delta: float, beta_p: float, beta_n: float,
                      nu: float = 0.0) -> RecoveryReport:
    """DP analogue of :func:`check_eo_recovery`; exact recovery also needs beta_p == beta_n."""
    check_params(r, q, delta, beta_p, beta_n, nu)
    d1, d2 = dp_conditions(r, delta, beta_p, beta_n, nu)
    g0, g1 = dp_lambda_windows(r, delta, beta_p, beta_n, nu)
    return _report({"D1": d1, "D2": d2}, lam=_intersect(g0, g1))


# -- end-to-end ---------------------------------------------------------------


@dataclass(frozen=True)
class EndToEnd:
    theory: RecoveryReport
    empirical: bool
    solution: LambdaSolution | None
    normalizer: float

    @property
    def agree(self) -> bool | None:
        if self.theory.status == INDETERMINATE:
            return None
        return self.theory.verdict == self.empirical

    @property
    def unnormalized_lambda(self) -> float | None:
        """Solver multiplier in the unnormalized convention of the closed forms."""
        return None if self.solution is None else self.solution.lambda_star * self.normalizer


def recovers(dist: DiscreteJointDistribution, bias: BlumStanglBias, constraint: Constraint | str
             ) -> tuple[bool, LambdaSolution | None]:
    """Solve on the biased table and compare with the Bayes classifier of ``dist`` atom-wise."""
    target = bayes_optimal(dist)
    try:
        sol = solve_fair(apply_bias(dist, bias), constraint)
    except InfeasibleError:
        return False, None
    return sol.table.equals(target, cells=dist.cells(), tol=DECISION_TOL), sol


def verify_end_to_end(dist: DiscreteJointDistribution, spec: MassartSpec, bias: BlumStanglBias,
                      constraint: Constraint | str = Constraint.EO) -> EndToEnd:
    """Closed-form verdict next to the solver's actual behaviour on one stylized instance."""
    constraint = Constraint(constraint)
    check = check_eo_recovery if constraint is Constraint.EO else check_dp_recovery
    theory = check(dist.r, spec.target_base_rate, spec.delta_cap, bias.beta_p, bias.beta_n, bias.nu)
    ok, sol = recovers(dist, bias, constraint)
    return EndToEnd(theory, ok, sol, survival_normalizer(dist, bias))


# -- region sweeps ------------------------------------------------------------


@dataclass(frozen=True)
class RegionRow:
    beta_p: float
    beta_n: float
    cond1: float
    cond2: float
    theory: str
    empirical: bool | None = None

    @property
    def agree(self) -> bool | None:
        if self.empirical is None or self.theory == INDETERMINATE:
            return None
        return (self.theory == RECOVERABLE) == self.empirical


def grid(n: int) -> list[float]:
    """``k / n`` for ``k = 1..n``: an n-point grid on (0, 1]."""
    if n < 2:
        raise ValidationError("PARAM_OUT_OF_RANGE", "grid needs at least 2 points")
    return [k / n for k in range(1, n + 1)]


def sweep_region(evaluate: Callable[[float, float], RecoveryReport], grid_n: int,
                 empirical: Callable[[float, float], bool] | None = None) -> list[RegionRow]:
    """Evaluate a two-condition report on the (beta_p, beta_n) grid, row-major in beta_p."""
    rows = []
    for bp in grid(grid_n):
        for bn in grid(grid_n):
            rep = evaluate(bp, bn)
            c1, c2 = list(rep.condition_values.values())[:2]
            emp = empirical(bp, bn) if empirical is not None else None
            rows.append(RegionRow(bp, bn, c1, c2, rep.status, emp))
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, str):
        return v
    return f"{v:.9g}"


def region_csv(rows: Iterable[RegionRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta_p", "beta_n", "cond1", "cond2", "theory", "empirical", "agree"])
    for row in rows:
        w.writerow([_fmt(row.beta_p), _fmt(row.beta_n), _fmt(row.cond1), _fmt(row.cond2),
                    row.theory, _fmt(row.empirical), _fmt(row.agree)])
    return buf.getvalue()


def line_distance(beta_p: float, beta_n: float, slope: float, intercept: float) -> float:
    """Euclidean distance from a grid point to the line beta_n = slope * beta_p + intercept."""
    return abs(slope * beta_p - beta_n + intercept) / math.hypot(slope, 1.0)
