"""Repeated Blum-Stangl bias on a stylized distribution, step by step.

Prints one CSV block per schedule: whether the EO solver still recovers the
Bayes classifier after t steps, next to the horizon conditions at the bounds.
"""

import argparse

from biasrecovery.distribution import build_stylized
from biasrecovery.timevarying import BiasSchedule, max_recovery_horizon, pipeline_csv, run_pipeline

SCHEDULES = [(0.9, 0.9, 0.05), (0.5, 0.3, 0.05), (1.0, 0.9, 0.0), (0.6, 0.9, 0.1)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=12)
    ap.add_argument("--delta", type=float, default=0.3)
    ap.add_argument("--r", type=float, default=0.25)
    ap.add_argument("--constraint", choices=["EO", "DP"], default="EO")
    args = ap.parse_args()
    d, _ = build_stylized(4, args.r, 0.5, args.delta)
    for bp, bn, nu in SCHEDULES:
        head = f"# beta_p={bp} beta_n={bn} nu={nu}"
        if bn < 1:
            head += f" t_max={max_recovery_horizon(args.r, args.delta, bn)}"
        print(head)
        steps = run_pipeline(d, BiasSchedule.uniform(bp, bn, nu, args.steps), args.constraint, delta=args.delta)
        print(pipeline_csv(steps), end="")


if __name__ == "__main__":
    main()
