#!/usr/bin/env python3
"""Cross-dataset correlation analysis of a systems x datasets EER grid.

Reads a CSV matrix (header row = dataset ids, index column = system ids,
cells = EER in percent or fractions), correlates every dataset column with
the per-system average EER using all six statistics, and prints the grid
sorted by Pearson correlation. This is the data behind a dataset-vs-average
heatmap: a high-ranking dataset is a good single-dataset proxy for the
cross-dataset average.

Usage:
    python scripts/correlate_reference_grid.py [matrix.csv] [--systems a,b,c]

The bundled example grid lives at tests/data/reference_eer_grid.csv.
"""

import argparse
import sys
from pathlib import Path

from df_arena.stats import correlate_matrix, load_matrix_csv

DEFAULT_GRID = Path(__file__).resolve().parent.parent / "tests" / "data" / "reference_eer_grid.csv"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("matrix", nargs="?", default=str(DEFAULT_GRID))
    parser.add_argument("--systems", default=None, help="comma-separated system subset")
    parser.add_argument("--bins", type=int, default=None, help="mutual-information bins")
    args = parser.parse_args()

    matrix = load_matrix_csv(args.matrix)
    if args.systems:
        matrix = matrix.subset([s.strip() for s in args.systems.split(",")])
    report = correlate_matrix(matrix, bins=args.bins)

    print(f"{matrix.values.shape[0]} systems x {matrix.values.shape[1]} datasets, "
          f"MI bins = {report.bins}\n")
    print(f"{'dataset':<18} {'pearson':>8} {'spearman':>9} {'kendall':>8} "
          f"{'dcor':>7} {'mi':>7} {'ccc':>7}")
    rows = sorted(
        report.dataset_ids,
        key=lambda ds: report.values[ds]["pearson"] or -2.0,
        reverse=True,
    )
    for ds in rows:
        v = report.values[ds]
        cells = [
            f"{v[m]:.4f}" if v[m] is not None else "   --  "
            for m in ("pearson", "spearman", "kendall_tau", "distance_corr", "mutual_info", "ccc")
        ]
        print(f"{ds:<18} {cells[0]:>8} {cells[1]:>9} {cells[2]:>8} {cells[3]:>7} {cells[4]:>7} {cells[5]:>7}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
