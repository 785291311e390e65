"""Command-line front end.

Exit codes: 0 success, 1 bad input, 2 infeasible or indeterminate verdict,
3 internal error. Errors go to stderr as ``code=<CODE> <message>``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .bias import BlumStanglBias, apply_bias, load_model
from .distribution import ClassifierTable, DiscreteJointDistribution, build_stylized, validate
from .errors import LabError, ValidationError
from .oracle import MAX_DETERMINISTIC_ATOMS, enumerate_deterministic, enumerate_thresholds
from .recovery import (
    INDETERMINATE,
    check_dp_recovery,
    check_eo_recovery,
    recovers,
    region_csv,
    sweep_region,
)
from .reject import check_reject_recovery
from .robustness import (
    FiniteHypothesisClass,
    check_eps_robust,
    check_robust_recovery,
    verify_robust_end_to_end,
)
from .solver import solve_fair
from .timevarying import (
    BiasSchedule,
    Step,
    check_finite_horizon_dp,
    check_finite_horizon_eo,
    check_infinite_horizon,
    compose,
    max_recovery_horizon,
    pipeline_csv,
    run_pipeline,
)


def _clean(obj):
    """Make a result JSON-safe: non-finite floats become strings."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, out: str | None) -> None:
    _emit(json.dumps(_clean(obj), indent=2) + "\n", out)


def _load_dist(path) -> DiscreteJointDistribution:
    try:
        return DiscreteJointDistribution.load(path)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ValidationError("BAD_INPUT", f"cannot read distribution {path}: {exc}") from None


def _verdict_code(status: str) -> int:
    return 2 if status == INDETERMINATE else 0


# -- handlers -----------------------------------------------------------------


def cmd_dist_validate(a) -> int:
    rep = validate(_load_dist(a.input))
    _emit_json({"ok": rep.ok, "codes": rep.codes, "total_mass": rep.total_mass, "r": rep.r,
                "base_rates": rep.base_rates,
                "eta": [{"x": x, "a": g, "eta": e} for (x, g), e in rep.eta.items()]}, a.out)
    return 0 if rep.ok else 1


def cmd_dist_stylized(a) -> int:
    table = None
    if a.delta_table:
        raw = json.loads(Path(a.delta_table).read_text())
        table = {(d["x"], int(d["a"])): float(d["delta"]) for d in raw}
    dist, _spec = build_stylized(a.features, a.r, a.q, a.delta, table)
    _emit_json(dist.to_json(), a.out)
    return 0


def cmd_bias_apply(a) -> int:
    biased = apply_bias(_load_dist(a.input), load_model(a.model))
    _emit_json(biased.to_json(), a.out)
    return 0


def cmd_solve(a) -> int:
    sol = solve_fair(_load_dist(a.input), a.constraint)
    _emit_json(sol.to_json(), a.out)
    return 0


def cmd_check_recovery(a) -> int:
    fn = check_dp_recovery if a.which == "dp" else check_eo_recovery
    rep = fn(a.r, a.q, a.delta, a.beta_p, a.beta_n, a.nu)
    _emit_json(rep.to_json(), a.out)
    return _verdict_code(rep.status)


def cmd_check_reject(a) -> int:
    res = check_reject_recovery(_load_dist(a.input), a.delta, BlumStanglBias(a.beta_p, a.beta_n, a.nu))
    _emit_json({"theory": res.theory.to_json(), "empirical": res.empirical,
                "rejection_mass": res.classifier.rejection_mass,
                "disagreement_mass": res.disagreement_mass,
                "precondition_gap": res.precondition_gap,
                "classifier": res.classifier.to_json()}, a.out)
    return _verdict_code(res.theory.status)


def cmd_check_robust(a) -> int:
    if a.input is None:
        if a.r is None:
            raise ValidationError("BAD_INPUT", "give --in/--hypotheses or --r for the closed form")
        rep = check_robust_recovery(a.r, a.nu, a.epsilon, a.beta_p, a.beta_n)
        _emit_json(rep.to_json(), a.out)
        return 0
    if a.seed is None:
        raise ValidationError("MISSING_SEED", "sampled robustness checks need --seed")
    if a.hypotheses is None:
        raise ValidationError("BAD_INPUT", "--hypotheses is required with --in")
    dist = _load_dist(a.input)
    H = FiniteHypothesisClass.load(a.hypotheses)
    if a.beta_p is None:
        v = check_eps_robust(dist, H, a.epsilon, a.samples, a.seed)
        _emit_json(v.to_json(), a.out)
        return 0
    res = verify_robust_end_to_end(dist, H, a.epsilon, BlumStanglBias(a.beta_p, a.beta_n, a.nu),
                                   seed=a.seed, samples=a.samples)
    _emit_json({"theory": res.theory.to_json(), "robust": res.robust.to_json(),
                "empirical": res.empirical, "best_index": res.best_index,
                "fair_best": res.fair_best, "lagrangian_witness": res.lagrangian_witness}, a.out)
    return 0


def cmd_check_horizon(a) -> int:
    if a.infinite:
        rep = check_infinite_horizon(a.r, a.delta, a.beta_p, a.beta_n, a.nu)
        _emit_json(rep.to_json(), a.out)
        return 0
    bounds = Step(a.beta_p, a.beta_n, a.nu)
    out = {}
    if a.t is not None:
        rep = (check_finite_horizon_dp(a.delta, bounds, a.t) if a.dp
               else check_finite_horizon_eo(a.r, a.delta, bounds, a.t))
        out["conditions"] = rep.to_json()
    if not a.dp and a.beta_n < 1:
        out["t_max"] = max_recovery_horizon(a.r, a.delta, a.beta_n)
    _emit_json(out, a.out)
    status = out.get("conditions", {}).get("status")
    return _verdict_code(status) if status else 0


def cmd_sweep_region(a) -> int:
    if a.theorem == "robust":
        if a.epsilon is None:
            raise ValidationError("BAD_INPUT", "--epsilon is required for the robust region")
        # the plotted region is the two linear conditions only
        evaluate = lambda bp, bn: check_robust_recovery(a.r, a.nu, a.epsilon, bp, bn,  # noqa: E731
                                                        include_gate=a.gate)
        empirical = None
    else:
        if a.delta is None:
            raise ValidationError("BAD_INPUT", "--delta is required for the eo/dp regions")
        fn = check_dp_recovery if a.theorem == "dp" else check_eo_recovery
        evaluate = lambda bp, bn: fn(a.r, a.q, a.delta, bp, bn, a.nu)  # noqa: E731
        empirical = None
        if a.empirical:
            dist, _ = build_stylized(a.features, a.r, a.q, a.delta)
            cons = "DP" if a.theorem == "dp" else "EO"
            empirical = lambda bp, bn: recovers(dist, BlumStanglBias(bp, bn, a.nu), cons)[0]  # noqa: E731
    rows = sweep_region(evaluate, a.grid, empirical)
    _emit(region_csv(rows), a.out)
    return 0


def _load_schedule(path) -> BiasSchedule:
    try:
        return BiasSchedule.load(path)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ValidationError("BAD_INPUT", f"cannot read schedule {path}: {exc}") from None


def cmd_timevary_compose(a) -> int:
    ct = compose(_load_schedule(a.schedule))
    _emit_json({"P": 1.0, "Q": 0.0, "R": ct.R, "S": ct.S}, a.out)
    return 0


def cmd_timevary_run(a) -> int:
    sched = _load_schedule(a.schedule)
    if a.input:
        dist = _load_dist(a.input)
    else:
        if a.delta is None:
            raise ValidationError("BAD_INPUT", "give --in or stylized parameters with --delta")
        dist, _ = build_stylized(a.features, a.r, a.q, a.delta)
    steps = run_pipeline(dist, sched, a.constraint, delta=a.delta)
    _emit(pipeline_csv(steps), a.out)
    return 0


def cmd_oracle_compare(a) -> int:
    dist = _load_dist(a.input)
    sol = solve_fair(dist, a.constraint)
    thr = enumerate_thresholds(dist, a.constraint)
    out = {"solver_accuracy": sol.accuracy, "threshold_oracle_accuracy": thr.best_accuracy,
           "difference": sol.accuracy - thr.best_accuracy, "solver_gap": sol.gap,
           "threshold_maximizers": len(thr.arg_best)}
    if len(dist.cells()) <= MAX_DETERMINISTIC_ATOMS:
        det = enumerate_deterministic(dist, a.constraint)
        out["deterministic_oracle_accuracy"] = det.best_accuracy
        out["deterministic_maximizers"] = [t.to_json() for t in det.arg_best]
    _emit_json(out, a.out)
    return 0


# -- parser -------------------------------------------------------------------


def _bias_flags(p, required=True):
    p.add_argument("--beta-p", type=float, required=required)
    p.add_argument("--beta-n", type=float, required=required)
    p.add_argument("--nu", type=float, default=0.0)


def _stylized_flags(p):
    p.add_argument("--features", type=int, default=4, help="features per group")
    p.add_argument("--r", type=float, default=0.25)
    p.add_argument("--q", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="biasrecovery", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    def leaf(parent, name, fn, help_):
        p = parent.add_parser(name, help=help_)
        p.set_defaults(fn=fn)
        p.add_argument("--out", help="output file (default: stdout)")
        return p

    dist = sub.add_parser("dist", help="distribution files").add_subparsers(dest="sub", required=True)
    p = leaf(dist, "validate", cmd_dist_validate, "check a distribution file")
    p.add_argument("--in", dest="input", required=True)
    p = leaf(dist, "stylized", cmd_dist_stylized, "build a noisy stylized distribution")
    _stylized_flags(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--delta-table", help='JSON list of {"x","a","delta"} for bounded noise')

    bias = sub.add_parser("bias", help="bias models").add_subparsers(dest="sub", required=True)
    p = leaf(bias, "apply", cmd_bias_apply, "apply a bias model to a distribution")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)

    p = leaf(sub, "solve", cmd_solve, "optimal constrained classifier")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--constraint", choices=["EO", "DP", "NONE"], default="EO")

    check = sub.add_parser("check", help="recovery conditions").add_subparsers(dest="sub", required=True)
    for name, which in (("recovery", "eo"), ("dp", "dp")):
        p = leaf(check, name, cmd_check_recovery, f"{which.upper()} recovery conditions")
        p.set_defaults(which=which)
        p.add_argument("--r", type=float, required=True)
        p.add_argument("--q", type=float, required=True)
        p.add_argument("--delta", type=float, required=True)
        _bias_flags(p)
    p = leaf(check, "reject", cmd_check_reject, "abstaining-classifier recovery")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--delta", type=float, required=True, help="rejection penalty")
    _bias_flags(p)
    p = leaf(check, "robust", cmd_check_robust, "eps-robustness and its recovery conditions")
    p.add_argument("--in", dest="input")
    p.add_argument("--hypotheses")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--r", type=float)
    _bias_flags(p, required=False)
    p = leaf(check, "horizon", cmd_check_horizon, "repeated-bias horizon conditions")
    p.add_argument("--r", type=float, default=0.25)
    p.add_argument("--delta", type=float, required=True)
    _bias_flags(p)
    p.add_argument("--t", type=int)
    p.add_argument("--infinite", action="store_true")
    p.add_argument("--dp", action="store_true")

    sweep = sub.add_parser("sweep", help="parameter sweeps").add_subparsers(dest="sub", required=True)
    p = leaf(sweep, "region", cmd_sweep_region, "(beta_p, beta_n) recovery region as CSV")
    p.add_argument("--theorem", choices=["eo", "dp", "robust"], default="eo")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--delta", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--nu", type=float, default=0.0)
    p.add_argument("--gate", action="store_true", help="robust region: also require the beta ratio band")
    p.add_argument("--empirical", action="store_true", help="also run the solver at every cell")
    _stylized_flags(p)

    tv = sub.add_parser("timevary", help="repeated bias").add_subparsers(dest="sub", required=True)
    p = leaf(tv, "compose", cmd_timevary_compose, "composed group-0 transform of a schedule")
    p.add_argument("--schedule", required=True)
    p = leaf(tv, "run", cmd_timevary_run, "step-by-step pipeline as CSV")
    p.add_argument("--schedule", required=True)
    p.add_argument("--in", dest="input")
    p.add_argument("--constraint", choices=["EO", "DP"], default="EO")
    p.add_argument("--delta", type=float)
    _stylized_flags(p)

    orc = sub.add_parser("oracle", help="brute-force cross-checks").add_subparsers(dest="sub", required=True)
    p = leaf(orc, "compare", cmd_oracle_compare, "solver against exhaustive oracles")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--constraint", choices=["EO", "DP", "NONE"], default="EO")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except LabError as exc:
        print(f"code={exc.code} {exc.message}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        print(f"code=INTERNAL {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
