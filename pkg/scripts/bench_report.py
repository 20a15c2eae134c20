#!/usr/bin/env python3
"""Run the micro-benchmarks and emit the timing table (optionally as CSV).

Example:
    python scripts/bench_report.py --small
    python scripts/bench_report.py --csv out.csv
"""

import argparse
import csv

from tensorlite.bench import ELEMENTWISE_SIZES, MATMUL_SIZES, bench_rows, format_report


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--small", action="store_true",
                    help="tiny sizes for a quick smoke run")
    ap.add_argument("--csv", metavar="PATH", default=None,
                    help="also write raw rows as CSV")
    args = ap.parse_args()

    if args.small:
        ew, mm = (10_000, 100_000), (32, 64)
    else:
        ew, mm = ELEMENTWISE_SIZES, MATMUL_SIZES

    rows = list(bench_rows(elementwise_sizes=ew, matmul_sizes=mm))
    print(format_report(rows))

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {args.csv}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
