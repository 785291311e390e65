"""EO recovery region over (beta_p, beta_n) for r=0.25, nu=0.05, delta=0.45.

Writes the sweep CSV and prints how far the verdict boundary sits from the
two lines beta_n = (0.495 beta_p + 0.3) / 0.45 and (0.405 beta_p - 0.3) / 0.55.
"""

import argparse
from pathlib import Path

from biasrecovery.recovery import check_eo_recovery, line_distance, region_csv, sweep_region


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=101)
    ap.add_argument("--out", default="results/eo_region.csv")
    args = ap.parse_args()

    rows = sweep_region(lambda bp, bn: check_eo_recovery(0.25, 0.5, 0.45, bp, bn, 0.05), args.grid)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(region_csv(rows))

    lines = [(0.495 / 0.45, 0.3 / 0.45), (0.405 / 0.55, -0.3 / 0.55)]
    n = args.grid
    cells = {(round(r.beta_p * n), round(r.beta_n * n)): r.theory for r in rows}
    worst = 0.0
    for (i, j), v in cells.items():
        for nbr in (cells.get((i + 1, j)), cells.get((i, j + 1))):
            if nbr is not None and nbr != v:
                worst = max(worst, min(line_distance(i / n, j / n, s, c) for s, c in lines))
    inside = sum(v == "RECOVERABLE" for v in cells.values())
    print(f"{inside}/{len(cells)} cells recoverable; worst boundary distance {worst:.4f} (grid step {1 / n:.4f})")


if __name__ == "__main__":
    main()
