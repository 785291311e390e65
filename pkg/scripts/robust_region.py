"""Robust recovery region for r=0.2, nu=0.1, eps=0.05 (the two linear conditions).

Pass --gate to also require (1 - eps) beta_n <= beta_p <= (1 + eps) beta_n.
"""

import argparse
from pathlib import Path

from biasrecovery.recovery import region_csv, sweep_region
from biasrecovery.robustness import check_robust_recovery


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=101)
    ap.add_argument("--gate", action="store_true")
    ap.add_argument("--out", default="results/robust_region.csv")
    args = ap.parse_args()
    rows = sweep_region(
        lambda bp, bn: check_robust_recovery(0.2, 0.1, 0.05, bp, bn, include_gate=args.gate), args.grid)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(region_csv(rows))
    inside = sum(r.theory == "RECOVERABLE" for r in rows)
    print(f"{inside}/{len(rows)} cells satisfy the conditions -> {args.out}")


if __name__ == "__main__":
    main()
